"""Simulation of additive-noise SDEs and Gram diagnostics of signature features.

Every path draws from its own counter-based generator
``Philox(SeedSequence(seed, spawn_key=(stream, index)))``, so a batch is
reproducible whatever the chunking or worker count, and independent batches
are obtained by changing ``stream``.
"""

from __future__ import annotations

import warnings
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .basis import relation_kernel
from .errors import InvalidInputError
from .signature import FORWARD, PiecewisePath, signature_batch
from .words import WordSet

KINDS = ("brownian", "ornstein_uhlenbeck", "custom_drift")
_ALIASES = {"bm": "brownian", "ou": "ornstein_uhlenbeck", "custom": "custom_drift"}

Drift = Callable[[float, np.ndarray], np.ndarray]
InitialSampler = Callable[[np.random.Generator], np.ndarray]


def _ou_drift(t: float, x: np.ndarray) -> np.ndarray:
    return -(x + 1.0)


@dataclass(frozen=True)
class SdeSpec:
    """``dX_t = b(t, X_t) dt + dW_t`` on ``[0, T]``.

    ``drift`` is vectorized: it receives the time and an ``(n, d)`` state
    array and returns an ``(n, d)`` array.  ``initial`` is a fixed vector or a
    callable drawing one from the path's generator.
    """

    kind: str
    d: int = 1
    T: float = 1.0
    initial: Sequence[float] | InitialSampler | None = None
    drift: Drift | None = None

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise InvalidInputError(f"unknown process kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.d < 1:
            raise InvalidInputError("dimension must be >= 1")
        if not self.T > 0:
            raise InvalidInputError("horizon must be positive")
        if kind == "custom_drift" and self.drift is None:
            raise InvalidInputError("custom_drift needs a drift callback")
        if kind != "custom_drift" and self.drift is not None:
            raise InvalidInputError(f"{kind} has a fixed drift")

    def drift_fn(self) -> Drift | None:
        if self.kind == "brownian":
            return None
        if self.kind == "ornstein_uhlenbeck":
            return _ou_drift
        return self.drift

    def to_json(self) -> dict:
        init = self.initial
        if callable(init):
            init = "sampler"
        elif init is not None:
            init = [float(v) for v in init]
        return {"kind": self.kind, "d": self.d, "T": self.T, "initial": init}


@dataclass
class PathBatch:
    """``n`` paths sampled on a shared uniform grid."""

    times: np.ndarray          # (K+1,)
    values: np.ndarray         # (n, K+1, d)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.times.shape[0] - 1

    @property
    def d(self) -> int:
        return self.values.shape[2]

    def increments(self) -> np.ndarray:
        """``(n, K, d+1)`` segment increments, time column first."""
        n = len(self)
        dt = np.broadcast_to(np.diff(self.times)[None, :, None], (n, self.K, 1))
        return np.concatenate([dt, np.diff(self.values, axis=1)], axis=2)

    def __getitem__(self, i: int) -> PiecewisePath:
        return PiecewisePath(self.times, self.values[i])

    def paths(self) -> list[PiecewisePath]:
        return [self[i] for i in range(len(self))]

    @classmethod
    def from_paths(cls, paths: Sequence[PiecewisePath]) -> "PathBatch":
        if not paths:
            raise InvalidInputError("empty path list")
        t = paths[0].times
        for p in paths:
            if p.times.shape != t.shape or not np.array_equal(p.times, t):
                raise InvalidInputError("paths do not share a time grid")
        return cls(t.copy(), np.stack([p.values for p in paths]))


def path_generator(seed: int, stream: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(stream, index))
    return np.random.Generator(np.random.Philox(ss))


def simulate(spec: SdeSpec, K: int, n: int, seed: int, stream: int = 0) -> PathBatch:
    """Euler-Maruyama on ``t_k = k T / K`` with exact Gaussian Brownian increments."""
    if K < 1 or n < 1:
        raise InvalidInputError("need K >= 1 and n >= 1")
    d, h = spec.d, spec.T / K
    x0 = np.zeros((n, d))
    noise = np.empty((n, K, d))
    for i in range(n):
        g = path_generator(seed, stream, i)
        if callable(spec.initial):
            x0[i] = np.asarray(spec.initial(g), dtype=float)
        elif spec.initial is not None:
            x0[i] = np.asarray(spec.initial, dtype=float)
        noise[i] = g.standard_normal((K, d))
    noise *= np.sqrt(h)
    times = np.linspace(0.0, spec.T, K + 1)
    values = np.empty((n, K + 1, d))
    values[:, 0] = x0
    b = spec.drift_fn()
    if b is None:
        values[:, 1:] = x0[:, None, :] + np.cumsum(noise, axis=1)
    else:
        x = x0
        for k in range(K):
            x = x + np.asarray(b(times[k], x), dtype=float) * h + noise[:, k]
            values[:, k + 1] = x
    return PathBatch(times, values)


# -- Gram diagnostics --------------------------------------------------------------

EIG_RTOL = 1e-12


@dataclass
class GramReport:
    word_set: WordSet
    n: int
    gram: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    undersampled: bool = False

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def trace(self) -> float:
        return float(np.trace(self.gram))

    @property
    def zero_tolerance(self) -> float:
        return EIG_RTOL * float(np.linalg.norm(self.gram, 2)) if self.gram.size else 0.0

    @property
    def determinant_sign(self) -> int:
        """Sign of ``det G``; eigenvalues within the zero tolerance count as 0."""
        tol = self.zero_tolerance
        if np.any(np.abs(self.eigenvalues) <= tol):
            return 0
        return int(np.prod(np.sign(self.eigenvalues)))

    @property
    def condition(self) -> float:
        lo = abs(self.min_eigenvalue)
        hi = float(np.max(np.abs(self.eigenvalues))) if self.eigenvalues.size else 0.0
        return float("inf") if lo <= self.zero_tolerance else hi / lo

    def null_direction(self) -> np.ndarray:
        """Unit eigenvector of the smallest eigenvalue, in ``word_set.ordered()`` order."""
        return self.eigenvectors[:, 0]

    def to_json(self) -> dict:
        cond = self.condition
        return {
            "words": [str(w) for w in self.word_set.ordered()],
            "n": self.n,
            "min_eigenvalue": self.min_eigenvalue,
            "trace": self.trace,
            "determinant_sign": self.determinant_sign,
            "condition": None if np.isinf(cond) else cond,
            "undersampled": self.undersampled,
            "eigenvalues": [float(v) for v in self.eigenvalues],
        }


def gram_from_features(F: np.ndarray, B: WordSet) -> GramReport:
    F = np.asarray(F, dtype=float)
    n, p = F.shape
    if p != len(B):
        raise InvalidInputError(f"{p} feature columns for {len(B)} words")
    undersampled = n < p
    if undersampled:
        warnings.warn(f"n={n} < |B|={p}: the Gram matrix is singular by construction", stacklevel=2)
    G = F.T @ F / n
    G = (G + G.T) / 2
    vals, vecs = np.linalg.eigh(G)
    return GramReport(B, n, G, vals, vecs, undersampled)


def gram_report(paths: PathBatch | np.ndarray, B: WordSet, N: int | None = None,
                workers: int | None = None) -> GramReport:
    """Second-moment matrix ``(1/n) sum_i f_i f_i^T`` of the raw features over ``B``.

    ``paths`` is a :class:`PathBatch` or an ``(n, K, d+1)`` increment array.
    """
    if N is not None and any(len(w) > N for w in B.words):
        raise InvalidInputError(f"word set exceeds order {N}")
    inc = paths.increments() if isinstance(paths, PathBatch) else np.asarray(paths, dtype=float)
    F, _ = signature_batch(inc, B, FORWARD, workers=workers)
    return gram_from_features(F, B)


def null_direction_residual(report: GramReport, T: float = 1) -> float:
    """Distance from the Gram null direction to the span of the exact time-padding
    relations among ``report.word_set``; ``inf`` when no relation exists."""
    words = report.word_set.ordered()
    N = max((len(w) for w in words), default=0)
    rel = relation_kernel(words, N, Fraction(T).limit_denominator())
    if not rel:
        return float("inf")
    basis = np.array([[float(r.get(w, 0)) for r in rel] for w in words])
    q, _ = np.linalg.qr(basis)
    v = report.null_direction()
    return float(np.linalg.norm(v - q @ (q.T @ v)))


def independence_sweep(spec: SdeSpec, B: WordSet, Ks: Sequence[int], n: int,
                       seed: int) -> dict[int, float]:
    """Minimum Gram eigenvalue of the features over ``B`` for each grid size."""
    return {K: gram_report(simulate(spec, K, n, seed), B).min_eigenvalue for K in Ks}
