import numpy as np
import pytest

from sigbasis.signature import PiecewisePath, signature_batch


def random_path(rng: np.random.Generator, K: int, d: int, T: float | None = None) -> PiecewisePath:
    """Piecewise-linear path with random (positive) durations and Gaussian increments."""
    dt = rng.uniform(0.1, 1.0, size=K)
    if T is not None:
        dt *= T / dt.sum()
    t = np.concatenate([[0.0], np.cumsum(dt)])
    x = np.vstack([rng.normal(size=d), rng.normal(size=d) + np.cumsum(rng.normal(size=(K, d)), axis=0)])
    return PiecewisePath(t, x)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def term_mass(path: PiecewisePath, B) -> dict:
    """Signature over ``B`` of the path with absolute-value increments.

    Every Chen or integration term for ``S^w`` is a product of segment
    increments divided by factorials, so this is the sum of the absolute
    values of those terms: the natural scale for rounding error.
    """
    vals, _ = signature_batch(abs(path.increments())[None], B)
    return dict(zip(B.ordered(), vals[0]))


def close_to(value: float, oracle: float, mass: float, rtol: float) -> bool:
    return abs(value - oracle) <= rtol * mass


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
