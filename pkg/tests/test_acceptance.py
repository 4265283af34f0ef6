"""Acceptance suite: eight criteria, one PASS/FAIL line each.

Run through pytest (lines are echoed live and repeated in the terminal
summary) or directly with ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import io
import random
import sys
import time
from contextlib import redirect_stdout
from fractions import Fraction
from math import factorial
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import close_to, random_path, term_mass  # noqa: E402
from sigbasis import cli  # noqa: E402
from sigbasis.basis import (  # noqa: E402
    certify_block, completion_matrix, construct_family, enumerate_all_bases,
    is_basis_of_words, necessary_filter, random_pad,
)
from sigbasis.freealg import dual_bracket, shuffle, time_rescaled_padding  # noqa: E402
from sigbasis.regress import (  # noqa: E402
    DesignMatrix, ExperimentConfig, algorithm1, default_lambda_grid, loo_brute_force, loo_curve,
)
from sigbasis.signature import (  # noqa: E402
    brute_force_sig, cost_closed_form, sig_backward, sig_forward,
)
from sigbasis.stochastic import SdeSpec, gram_report, simulate  # noqa: E402
from sigbasis.words import (  # noqa: E402
    Word, WordSet, minimal_basis_length, prefix_words, suffix_words, words_up_to,
)

RESULTS: list[str] = []


def report(num: int, title: str, ok: bool, elapsed: float, budget: float, detail: str = "") -> None:
    within = elapsed < budget
    tag = "PASS" if ok and within else "FAIL"
    line = f"[{tag}] criterion {num}: {title} ({elapsed:.2f}s / budget {budget:g}s){'  ' + detail if detail else ''}"
    RESULTS.append(line)
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line
    assert within, f"criterion {num} exceeded its {budget:g}s budget"


def W(s: str, d: int = 1) -> Word:
    return Word.parse(s, d)


# -- 1 ---------------------------------------------------------------------------------

COUNTEREXAMPLE_ROWS = ["101", "110", "0101", "0110", "1001", "1010"]
COUNTEREXAMPLE_MATRIX = (
    (0, 1, 0, 2, 1, 0),
    (0, 0, 1, 0, 1, 2),
    (0, 1, 0, 0, 0, 0),
    (0, 0, 1, 0, 0, 0),
    (0, 0, 0, 1, 0, 0),
    (0, 0, 0, 0, 1, 0),
)


def test_criterion_1_worked_examples():
    t0 = time.perf_counter()
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli.run(["shuffle", "1", "21"])
    cli_ok = code == 0 and buf.getvalue() == "121 + 2*211\n"
    lib_ok = str(shuffle(W("1", 2), W("21", 2))) == "121 + 2*211"
    cm = completion_matrix([W(s) for s in COUNTEREXAMPLE_ROWS], 4, gamma=W("11"))
    matrix_ok = cm.entries == COUNTEREXAMPLE_MATRIX
    blk = certify_block([W(s) for s in COUNTEREXAMPLE_ROWS], 4, W("11"))
    rank_ok = cm.rank() == 5 and blk.rank == 5 and not blk.ok
    ok = cli_ok and lib_ok and matrix_ok and rank_ok
    report(1, "worked examples (shuffle, 6x6 completion matrix, rank 5)", ok, time.perf_counter() - t0, 1,
           f"shuffle={cli_ok and lib_ok} matrix={matrix_ok} rank={cm.rank()}")


# -- 2 ---------------------------------------------------------------------------------

SIZES_2 = [(N, 1) for N in range(1, 6)] + [(N, 2) for N in range(1, 4)]


def test_criterion_2_basis_families():
    t0 = time.perf_counter()
    rng = random.Random(2024)
    failures = []
    checked = 0
    for N, d in SIZES_2:
        fams = {"prefix": construct_family("prefix", N, d, verify=False),
                "suffix": construct_family("suffix", N, d, verify=False)}
        for j in range(3):
            kind = rng.choice(["prefix_padded", "suffix_padded"])
            fams[f"{kind}#{j}"] = construct_family(kind, N, d, pad=random_pad(kind, N, d, rng), verify=False)
        for name, B in fams.items():
            cert = is_basis_of_words(B, N)
            filt = necessary_filter(B, N)
            checked += 1
            if not (cert.is_basis and cert.rank == (d + 1) ** N and filt.passed):
                failures.append(f"{name}@N={N},d={d}")
    for d in (1, 2):
        for i in range(1, d + 1):
            block = [W(s.replace("i", str(i)), d) for s in ("i", "0i", "0i0")]
            checked += 1
            if not certify_block(block, 3, W(str(i), d)).ok:
                failures.append(f"{{i,0i,0i0}} i={i} d={d}")
    report(2, "basis families certify at desk scale", not failures, time.perf_counter() - t0, 30,
           f"{checked} certificates, failures={failures or 'none'}")


# -- 3 ---------------------------------------------------------------------------------


def test_criterion_3_minimality():
    t0 = time.perf_counter()
    problems = []
    counts = {}
    for N in (2, 3):
        bound = minimal_basis_length(N, 1)
        bases = list(enumerate_all_bases(N, 1))
        counts[N] = len(bases)
        keys = {frozenset(b.words) for b in bases}
        pre, suf = prefix_words(N, 1), suffix_words(N, 1)
        if frozenset(pre.words) not in keys or frozenset(suf.words) not in keys:
            problems.append(f"N={N}: prefix/suffix set missing from enumeration")
        if min(b.length for b in bases) < bound:
            problems.append(f"N={N}: length below bound")
        if not (pre.length == suf.length == bound):
            problems.append(f"N={N}: prefix/suffix length differs from bound")
        for K in (2, 10, 100):
            best_f = cost_closed_form("forward", suf, K)
            best_b = cost_closed_form("backward", pre, K)
            for B in bases:
                if cost_closed_form("forward", B, K) < best_f or cost_closed_form("backward", B, K) < best_b:
                    problems.append(f"N={N},K={K}: cheaper basis {B}")
                    break
    report(3, "minimal length and minimal Chen cost", not problems, time.perf_counter() - t0, 120,
           f"bases enumerated {counts}, problems={problems or 'none'}")


# -- 4 ---------------------------------------------------------------------------------


def test_criterion_4_signature_engine():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = {"chen": 0.0, "shuffle": 0.0, "padding": 0.0, "time": 0.0}
    for _ in range(200):
        K, d, N = int(rng.integers(1, 11)), int(rng.integers(1, 3)), int(rng.integers(1, 5))
        T = float(rng.uniform(0.3, 3.0))
        p = random_path(rng, K, d, T=T)
        B = words_up_to(N, d)
        f, _ = sig_forward(p, B)
        b, _ = sig_backward(p, B)
        o = brute_force_sig(p, N)
        mass = term_mass(p, B)
        for w in B:
            for v in (f[w], b[w]):
                worst["chen"] = max(worst["chen"], abs(v - o[w]) / mass[w])
        words = B.ordered()
        for i, w in enumerate(words):
            for v in words[i:]:
                if len(w) + len(v) > N:
                    continue
                lhs = f[w] * f[v]
                err = abs(lhs - dual_bracket(shuffle(w, v), f)) / (1 + abs(f[w]) + abs(f[v]))
                worst["shuffle"] = max(worst["shuffle"], err)
            for k in range(1, min(3, N - len(w)) + 1):
                rhs = dual_bracket(time_rescaled_padding(w, k, Fraction(T)), f)
                worst["padding"] = max(worst["padding"], abs(f[w] - rhs) / (1 + abs(f[w])))
        for k in range(N + 1):
            exact = T ** k / factorial(k)
            worst["time"] = max(worst["time"], abs(f[Word.zeros(k, d)] - exact) / exact)
    ok = worst["chen"] <= 1e-10 and worst["shuffle"] <= 1e-9 and worst["padding"] <= 1e-9 and worst["time"] <= 1e-12
    report(4, "forward = backward = brute force; shuffle and padding identities", ok,
           time.perf_counter() - t0, 60, "worst " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()))


# -- 5 ---------------------------------------------------------------------------------


def test_criterion_5_cost_model():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    r = random.Random(5)
    mismatches = 0
    for _ in range(50):
        d = r.choice([1, 2])
        N = r.randint(1, 4)
        pool = words_up_to(N, d).ordered()
        B = WordSet(r.sample(pool, r.randint(1, min(len(pool), 15))), d, N)
        for K in (2, 5, 100):
            p = random_path(rng, K, d)
            if sig_forward(p, B)[1].elementary_ops != cost_closed_form("forward", B, K):
                mismatches += 1
            if sig_backward(p, B)[1].elementary_ops != cost_closed_form("backward", B, K):
                mismatches += 1
    ratios = {}
    for N in range(2, 7):
        ratios[N] = cost_closed_form("forward", suffix_words(N, 1), 100) / cost_closed_form("forward", words_up_to(N, 1), 100)
    ratio_ok = all(abs(v - 0.5) <= 0.02 for v in ratios.values())
    report(5, "instrumented counters equal closed-form costs", mismatches == 0 and ratio_ok,
           time.perf_counter() - t0, 10,
           f"mismatches={mismatches}, ratios=" + ",".join(f"{v:.4f}" for v in ratios.values()))


# -- 6 ---------------------------------------------------------------------------------


def test_criterion_6_degeneracy():
    t0 = time.perf_counter()
    problems = []
    rows = []
    for kind in ("bm", "ou"):
        batch = simulate(SdeSpec(kind), 100, 5000, seed=6)
        for N in (1, 2, 3):
            full = gram_report(batch, words_up_to(N, 1))
            suf = gram_report(batch, suffix_words(N, 1))
            rows.append(f"{kind}/N={N}: full {full.min_eigenvalue:.1e} suffix {suf.min_eigenvalue:.1e}")
            if not full.min_eigenvalue < 1e-6 * full.trace:
                problems.append(f"{kind} N={N} full set not degenerate")
            if not (suf.min_eigenvalue > 0 and suf.min_eigenvalue > 1e3 * abs(full.min_eigenvalue)):
                problems.append(f"{kind} N={N} suffix set not separated")
    report(6, "full-set Gram degenerate, suffix Gram non-degenerate", not problems,
           time.perf_counter() - t0, 120, "; ".join(rows) + (f" problems={problems}" if problems else ""))


# -- 7 ---------------------------------------------------------------------------------


def test_criterion_7_regression():
    t0 = time.perf_counter()
    base = dict(process="bm", beta="ones", n_train=500, n_test=10_000, batches=20)
    gaps, cis = {}, {}
    for N in (2, 3):
        rep = algorithm1(ExperimentConfig(N=N, seed=7, **base))
        gaps[N] = abs(rep.r2_suffix - rep.r2_all)
        lo, hi = rep.confidence_interval()
        cis[N] = f"N={N}: R2 suffix {rep.r2_suffix:.2f} all {rep.r2_all:.2f}, dE {rep.delta_egen:.2e} CI [{lo:.2e}, {hi:.2e}]"
        ci_ok = np.isfinite(lo) and np.isfinite(hi) and lo <= rep.delta_egen <= hi
        if not ci_ok:
            gaps[N] = float("inf")
    wins = 0
    lams = []
    for seed in range(10):
        rep = algorithm1(ExperimentConfig(N=3, seed=100 + seed, **base))
        lams.append((rep.mean_lambda_suffix, rep.mean_lambda_all))
        wins += rep.mean_lambda_suffix < rep.mean_lambda_all
    ok = all(g <= 1.0 for g in gaps.values()) and wins >= 6
    report(7, "regression experiment (R2 gap, lambda ordering, CI)", ok, time.perf_counter() - t0, 600,
           "; ".join(cis.values()) + f"; lambda_suffix<lambda_all in {wins}/10 seeds "
           f"(mean {np.mean([a for a, _ in lams]):.3g} vs {np.mean([b for _, b in lams]):.3g})")


# -- 8 ---------------------------------------------------------------------------------


def test_criterion_8_loo_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst = 0.0
    grid = default_lambda_grid()
    feature_words = words_up_to(3, 1).ordered()[1:]
    for _ in range(20):
        n = int(rng.integers(5, 51))
        p = int(rng.integers(1, min(10, n - 2) + 1))
        raw = rng.normal(size=(n, p)) * rng.uniform(0.1, 10, size=p)
        y = raw @ rng.normal(size=p) + rng.normal(size=n)
        X = DesignMatrix.from_features(raw, WordSet(feature_words[:p], 1, 3))
        curve = loo_curve(X, y, grid)
        for lam in grid:
            fast = curve[float(lam)]
            if fast is None:
                worst = float("inf")
                continue
            slow = loo_brute_force(X, y, lam)
            worst = max(worst, abs(fast - slow) / max(1.0, abs(slow)))
    report(8, "closed-form LOO equals n-refit LOO on every grid value", worst <= 1e-8,
           time.perf_counter() - t0, 30, f"worst relative gap {worst:.1e}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
