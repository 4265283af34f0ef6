"""Ridge regression on signature features and the generalization-gap experiment.

Conventions
-----------
* Features are standardized with the training mean and the biased
  (``ddof=0``) standard deviation; the same statistics are applied to test
  features.
* Constant features (the empty word and ``0_k``, whose values are the
  deterministic ``T^k/k!``) are dropped from the penalized design and the
  intercept absorbs them.  The intercept is not penalized.
* ``beta(lam)`` solves ``((1/n) Z^T Z + lam I) beta = (1/n) Z^T (y - mean(y))``.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .basis import is_basis_of_words
from .errors import DataError, InvalidInputError, SingularFitError
from .signature import FORWARD, cost_closed_form, signature_batch, signature_levels
from .stochastic import SdeSpec, simulate
from .words import Word, WordSet, count_up_to, suffix_words, words_up_to

CONSTANT_RTOL = 1e-12
TIE_RTOL = 1e-12


def default_lambda_grid() -> np.ndarray:
    """``{0}`` followed by 100 log-spaced values from ``1e-2`` to ``1e4``."""
    return np.concatenate([[0.0], 10.0 ** (-2 + 6 * np.arange(100) / 99)])


# -- design matrices ----------------------------------------------------------------


@dataclass
class DesignMatrix:
    word_set: WordSet
    raw: np.ndarray            # (n, |B|) in word_set.ordered() order
    mean: np.ndarray           # over kept columns
    scale: np.ndarray
    kept: np.ndarray           # column indices into raw
    excluded: list[Word]

    @property
    def n(self) -> int:
        return self.raw.shape[0]

    @property
    def p(self) -> int:
        return self.raw.shape[1]

    @property
    def features(self) -> np.ndarray:
        """Standardized non-constant columns."""
        return self.transform(self.raw)

    def transform(self, raw: np.ndarray) -> np.ndarray:
        raw = np.asarray(raw, dtype=float)
        if raw.ndim != 2 or raw.shape[1] != self.p:
            raise InvalidInputError(f"expected {self.p} raw feature columns")
        return (raw[:, self.kept] - self.mean) / self.scale

    @classmethod
    def from_features(cls, raw: np.ndarray, word_set: WordSet) -> "DesignMatrix":
        raw = np.asarray(raw, dtype=float)
        if raw.ndim != 2 or raw.shape[1] != len(word_set):
            raise InvalidInputError("feature matrix does not match the word set")
        words = word_set.ordered()
        bad = np.argwhere(~np.isfinite(raw))
        if bad.size:
            i, j = bad[0]
            raise DataError(f"non-finite feature for path {i}, word {words[j]}")
        mean = raw.mean(axis=0)
        scale = raw.std(axis=0)
        const = scale <= CONSTANT_RTOL * np.maximum(1.0, np.abs(mean))
        kept = np.flatnonzero(~const)
        return cls(
            word_set, raw, mean[kept], scale[kept], kept,
            [words[j] for j in np.flatnonzero(const)],
        )


def selection_words(selection: str | WordSet, N: int, d: int) -> WordSet:
    if isinstance(selection, WordSet):
        if not is_basis_of_words(selection, N).is_basis:
            raise InvalidInputError("custom selection must be a certified basis of words")
        return selection
    if selection == "all":
        return words_up_to(N, d)
    if selection == "suffix":
        return suffix_words(N, d)
    raise InvalidInputError(f"unknown selection {selection!r}")


def build_design(increments: np.ndarray, N: int, selection: str | WordSet = "all",
                 workers: int | None = None) -> DesignMatrix:
    """Signature features of each path, forward Chen over the selected words."""
    inc = np.asarray(increments, dtype=float)
    B = selection_words(selection, N, inc.shape[-1] - 1)
    raw, _ = signature_batch(inc, B, FORWARD, workers=workers)
    return DesignMatrix.from_features(raw, B)


# -- ridge ----------------------------------------------------------------------------


@dataclass
class RidgeFit:
    coefficients: np.ndarray   # standardized scale, kept columns
    intercept: float
    lam: float
    cv_curve: dict[float, float | None] = field(default_factory=dict)

    def predict_standardized(self, Z: np.ndarray) -> np.ndarray:
        return self.intercept + Z @ self.coefficients

    def predict(self, X: DesignMatrix, raw: np.ndarray) -> np.ndarray:
        return self.predict_standardized(X.transform(raw))


def _svd(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    n, p = Z.shape
    if p == 0:
        return np.zeros((n, 0)), np.zeros(0), False
    U, s, _ = np.linalg.svd(Z, full_matrices=False)
    tol = s.max(initial=0.0) * max(n, p) * np.finfo(float).eps
    singular = p > n or bool(np.any(s <= tol))
    return U, s, singular


def ridge_fit(X: DesignMatrix, y: np.ndarray, lam: float) -> RidgeFit:
    """Ridge estimator with unpenalized intercept on standardized features."""
    y = np.asarray(y, dtype=float)
    if y.shape != (X.n,):
        raise InvalidInputError("target length does not match the design")
    if lam < 0:
        raise InvalidInputError("lambda must be >= 0")
    Z = X.features
    n, p = Z.shape
    ybar = float(y.mean())
    if p == 0:
        return RidgeFit(np.zeros(0), ybar, float(lam))
    if lam == 0 and _svd(Z)[2]:
        raise SingularFitError("normal equations are singular at lambda = 0")
    A = Z.T @ Z / n + lam * np.eye(p)
    beta = np.linalg.solve(A, Z.T @ (y - ybar) / n)
    return RidgeFit(beta, ybar, float(lam))


def loo_curve(X: DesignMatrix, y: np.ndarray, grid: Sequence[float] | None = None) -> dict[float, float | None]:
    """Leave-one-out MSE for each grid value via the hat-matrix identity.

    With centred ``Z = U S V^T`` the hat matrix is
    ``11^T/n + U diag(s^2/(s^2 + n lam)) U^T``; the LOO residual is
    ``(y_i - yhat_i)/(1 - H_ii)``.  ``None`` marks a singular ``lam = 0``.
    """
    y = np.asarray(y, dtype=float)
    n = X.n
    if n < 3:
        raise InvalidInputError("leave-one-out needs n >= 3")
    grid = default_lambda_grid() if grid is None else np.asarray(grid, dtype=float)
    if np.any(grid < 0):
        raise InvalidInputError("lambda grid must be non-negative")
    U, s, singular = _svd(X.features)
    r = y - y.mean()
    Ur = U.T @ r
    U2 = U ** 2
    s2 = s ** 2
    curve: dict[float, float | None] = {}
    for lam in grid:
        if lam == 0 and singular:
            curve[float(lam)] = None
            continue
        shrink = s2 / (s2 + n * lam) if lam > 0 else np.ones_like(s2)
        resid = r - U @ (shrink * Ur)
        h = 1.0 / n + U2 @ shrink
        curve[float(lam)] = float(np.mean((resid / (1.0 - h)) ** 2))
    return curve


def choose_lambda(curve: dict[float, float | None]) -> float:
    """Argmin of the LOO curve; near-ties go to the larger lambda."""
    valid = [(lam, v) for lam, v in curve.items() if v is not None]
    if not valid:
        raise SingularFitError("no admissible lambda on the grid")
    best = min(v for _, v in valid)
    return max(lam for lam, v in valid if np.isclose(v, best, rtol=TIE_RTOL, atol=0.0))


def loo_cv(X: DesignMatrix, y: np.ndarray, grid: Sequence[float] | None = None) -> tuple[float, dict[float, float | None]]:
    curve = loo_curve(X, y, grid)
    return choose_lambda(curve), curve


def fit_with_loo(X: DesignMatrix, y: np.ndarray, grid: Sequence[float] | None = None) -> RidgeFit:
    lam, curve = loo_cv(X, y, grid)
    fit = ridge_fit(X, y, lam)
    fit.cv_curve = curve
    return fit


def loo_brute_force(X: DesignMatrix, y: np.ndarray, lam: float) -> float:
    """Literal leave-one-out: ``n`` refits on the fixed standardized design,
    each minimizing ``sum_{j != i} (y_j - a - z_j beta)^2 + n lam |beta|^2``."""
    y = np.asarray(y, dtype=float)
    Z = X.features
    n, p = Z.shape
    errs = np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        A = np.column_stack([np.ones(n - 1), Z[keep]])
        P = n * lam * np.eye(p + 1)
        P[0, 0] = 0.0
        coef = np.linalg.solve(A.T @ A + P, A.T @ y[keep])
        errs[i] = y[i] - coef[0] - Z[i] @ coef[1:]
    return float(np.mean(errs ** 2))


# -- target functional ------------------------------------------------------------------

BETA_KINDS = ("ones", "geom-up", "geom-down")


def beta_true(kind: str, N_true: int = 10, d: int = 1) -> np.ndarray:
    """Coefficient vector over ``W_{<=N_true}`` in canonical order."""
    L = count_up_to(N_true, d)
    if kind == "ones":
        return np.ones(L)
    if kind == "geom-up":
        return np.arange(1, L + 1, dtype=float)
    if kind == "geom-down":
        return np.arange(L, 0, -1, dtype=float)
    raise InvalidInputError(f"unknown beta kind {kind!r}")


def target_functional(sig, beta: np.ndarray) -> float:
    """Dual bracket ``<beta, S>`` with ``beta`` in canonical word order over ``sig``'s words."""
    words = sig.words.ordered()
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (len(words),):
        raise InvalidInputError(f"beta has length {beta.size}, expected {len(words)}")
    return float(sum(b * sig[w] for b, w in zip(beta, words)))


def _level_sums(inc: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-level sums ``s_m = sum_{|w|=m} S^w`` and radix-weighted sums
    ``R_m = sum_{|w|=m} r(w) S^w`` (``r`` the radix value), shape ``(N+1, n)``.

    Both are closed under Chen's relation since a word of length ``m`` splits
    uniquely at each position ``j``, and ``r(uv) = r(u) D^{|v|} + r(v)``.
    """
    n, K, D = inc.shape
    d = D - 1
    fact = np.array([float(np.prod(np.arange(1, m + 1))) for m in range(N + 1)])
    powD = D ** np.arange(N + 1, dtype=float)
    s = np.zeros((N + 1, n))
    R = np.zeros((N + 1, n))
    s[0] = 1.0
    letters = np.arange(D, dtype=float)
    for k in range(K):
        sig = inc[:, k, :].sum(axis=1)
        rho = inc[:, k, :] @ letters
        ps = np.vstack([sig ** m / fact[m] for m in range(N + 1)])
        pr = np.zeros((N + 1, n))
        for m in range(1, N + 1):
            pr[m] = rho * sig ** (m - 1) * (powD[m] - 1) / (d * fact[m])
        ns = np.zeros_like(s)
        nR = np.zeros_like(R)
        for m in range(N + 1):
            for j in range(m + 1):
                ns[m] += s[j] * ps[m - j]
                nR[m] += R[j] * powD[m - j] * ps[m - j] + s[j] * pr[m - j]
        s, R = ns, nR
    return s, R


def target_values(increments: np.ndarray, beta: str | np.ndarray, N_true: int = 10) -> np.ndarray:
    """``F = <beta, S^{<=N_true}>`` for every path of an ``(n, K, d+1)`` batch.

    The three named coefficient vectors are affine in the canonical index,
    so they only need per-level sums; an explicit vector goes through the
    dense level tensors.
    """
    inc = np.asarray(increments, dtype=float)
    d = inc.shape[2] - 1
    if isinstance(beta, str):
        s, R = _level_sums(inc, N_true)
        L = count_up_to(N_true, d)
        offset = np.array([count_up_to(m - 1, d) if m else 0 for m in range(N_true + 1)], dtype=float)
        if beta == "ones":
            return s.sum(axis=0)
        if beta == "geom-up":
            return ((offset + 1)[:, None] * s + R).sum(axis=0)
        if beta == "geom-down":
            return ((L - offset)[:, None] * s - R).sum(axis=0)
        raise InvalidInputError(f"unknown beta kind {beta!r}")
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (count_up_to(N_true, d),):
        raise InvalidInputError("beta length does not match the truncation order")
    flat = np.concatenate(signature_levels(inc, N_true), axis=1)
    return flat @ beta


# -- generalization-gap experiment --------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    N: int
    process: str = "bm"
    beta: str | tuple[float, ...] = "ones"
    n_train: int = 500
    n_test: int = 10_000
    batches: int = 20
    seed: int = 0
    K: int = 100
    N_true: int = 10
    d: int = 1
    T: float = 1.0
    workers: int | None = None

    def spec(self) -> SdeSpec:
        return SdeSpec(self.process, d=self.d, T=self.T)

    def to_json(self) -> dict:
        out = asdict(self)
        out.pop("workers")
        if not isinstance(self.beta, str):
            out["beta"] = [float(b) for b in self.beta]
        return out


@dataclass
class BatchResult:
    mse_all: float
    mse_suffix: float
    lambda_all: float
    lambda_suffix: float

    @property
    def diff(self) -> float:
        return self.mse_all - self.mse_suffix


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    batches: list[BatchResult]
    y_test_var: float
    p_all: int
    p_suffix: int
    timing: dict[str, float] = field(default_factory=dict)

    @property
    def delta_egen(self) -> float:
        return float(np.mean([b.diff for b in self.batches]))

    @property
    def standard_error(self) -> float:
        diffs = np.array([b.diff for b in self.batches])
        return float(diffs.std(ddof=1) / np.sqrt(diffs.size))

    def confidence_interval(self, level: float = 0.95) -> tuple[float, float]:
        q = stats.t.ppf(0.5 + level / 2, df=len(self.batches) - 1)
        est, se = self.delta_egen, self.standard_error
        return est - q * se, est + q * se

    def _r2(self, key: str) -> float:
        return float(np.mean([100.0 * (1.0 - getattr(b, key) / self.y_test_var) for b in self.batches]))

    @property
    def r2_all(self) -> float:
        return self._r2("mse_all")

    @property
    def r2_suffix(self) -> float:
        return self._r2("mse_suffix")

    @property
    def mean_lambda_all(self) -> float:
        return float(np.mean([b.lambda_all for b in self.batches]))

    @property
    def mean_lambda_suffix(self) -> float:
        return float(np.mean([b.lambda_suffix for b in self.batches]))

    def to_json(self, include_timing: bool = True) -> dict:
        lo, hi = self.confidence_interval()
        out = {
            "config": self.config.to_json(),
            "batch_count": len(self.batches),
            "p_all": self.p_all,
            "p_suffix": self.p_suffix,
            "delta_egen": self.delta_egen,
            "standard_error": self.standard_error,
            "ci95": [lo, hi],
            "r2_all": self.r2_all,
            "r2_suffix": self.r2_suffix,
            "mean_lambda_all": self.mean_lambda_all,
            "mean_lambda_suffix": self.mean_lambda_suffix,
            "y_test_var": self.y_test_var,
            "batches": [asdict(b) for b in self.batches],
        }
        if include_timing:
            out["timing"] = dict(self.timing)
        return out

    def dumps(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_json(include_timing), sort_keys=True)


def algorithm1(config: ExperimentConfig) -> ExperimentReport:
    """Estimate the test-error gap between full and suffix feature sets.

    One shared test set (stream 0) and ``batches`` independent training sets
    (streams 1..B).  Each training set fits both strategies with LOO-chosen
    ridge penalties; the per-batch difference of test MSEs is averaged.
    """
    if config.batches < 2:
        raise InvalidInputError("need at least two training batches")
    p_all = count_up_to(config.N, config.d)
    if min(config.n_train, config.n_test) < p_all:
        raise InvalidInputError(f"sample sizes must be >= {p_all} features")
    spec = config.spec()
    timing = {"simulate": 0.0, "target": 0.0, "signature_all": 0.0, "signature_suffix": 0.0,
              "fit_all": 0.0, "fit_suffix": 0.0}

    def clock(key, fn, *args):
        t0 = time.perf_counter()
        out = fn(*args)
        timing[key] += time.perf_counter() - t0
        return out

    test = clock("simulate", simulate, spec, config.K, config.n_test, config.seed, 0).increments()
    beta = config.beta if isinstance(config.beta, str) else np.asarray(config.beta, dtype=float)
    y_test = clock("target", target_values, test, beta, config.N_true)
    sets = {"all": words_up_to(config.N, config.d), "suffix": suffix_words(config.N, config.d)}
    test_raw = {k: clock(f"signature_{k}", signature_batch, test, B, FORWARD, config.workers)[0]
                for k, B in sets.items()}

    def run_batch(b: int) -> tuple[BatchResult, dict[str, float]]:
        local = {key: 0.0 for key in timing}

        def tick(key, fn, *args):
            t0 = time.perf_counter()
            out = fn(*args)
            local[key] += time.perf_counter() - t0
            return out

        train = tick("simulate", simulate, spec, config.K, config.n_train, config.seed, b + 1).increments()
        y = tick("target", target_values, train, beta, config.N_true)
        res = {}
        for k in sets:
            X = tick(f"signature_{k}", build_design, train, config.N, k)
            fit = tick(f"fit_{k}", fit_with_loo, X, y)
            pred = fit.predict(X, test_raw[k])
            res[k] = (float(np.mean((y_test - pred) ** 2)), fit.lam)
        return BatchResult(res["all"][0], res["suffix"][0], res["all"][1], res["suffix"][1]), local

    if config.workers and config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outs = list(pool.map(run_batch, range(config.batches)))
    else:
        outs = [run_batch(b) for b in range(config.batches)]
    for _, local in outs:
        for key, v in local.items():
            timing[key] += v
    return ExperimentReport(config, [o[0] for o in outs], float(np.var(y_test)),
                            p_all, len(sets["suffix"]), timing)


# -- timing harness -------------------------------------------------------------------


@dataclass(frozen=True)
class TimingConfig:
    orders: tuple[int, ...] = (2, 3, 4, 5, 6)
    d: int = 1
    K: int = 100
    n_paths: int = 1000
    n_fit: int = 500
    repeats: int = 5
    seed: int = 0


def _median_time(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def timing_harness(config: TimingConfig = TimingConfig()) -> list[dict]:
    """Wall-clock medians for features and fits, full vs suffix set, next to the
    closed-form forward-cost ratio."""
    spec = SdeSpec("bm", d=config.d)
    inc = simulate(spec, config.K, max(config.n_paths, config.n_fit), config.seed).increments()
    y = target_values(inc[: config.n_fit], "ones", 10)
    rows = []
    for N in config.orders:
        full, suf = words_up_to(N, config.d), suffix_words(N, config.d)
        c_all = cost_closed_form(FORWARD, full, config.K)
        c_suf = cost_closed_form(FORWARD, suf, config.K)
        t_all = _median_time(lambda: signature_batch(inc[: config.n_paths], full), config.repeats)
        t_suf = _median_time(lambda: signature_batch(inc[: config.n_paths], suf), config.repeats)
        X_all = build_design(inc[: config.n_fit], N, "all")
        X_suf = build_design(inc[: config.n_fit], N, "suffix")
        f_all = _median_time(lambda: fit_with_loo(X_all, y), config.repeats)
        f_suf = _median_time(lambda: fit_with_loo(X_suf, y), config.repeats)
        rows.append({
            "N": N, "p_all": len(full), "p_suffix": len(suf),
            "counter_all": c_all, "counter_suffix": c_suf, "counter_ratio": c_suf / c_all,
            "sig_time_all": t_all, "sig_time_suffix": t_suf, "sig_time_ratio": t_suf / t_all,
            "fit_time_all": f_all, "fit_time_suffix": f_suf, "fit_time_ratio": f_suf / f_all,
        })
    return rows
