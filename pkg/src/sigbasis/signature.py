"""Truncated signatures of time-augmented piecewise-linear paths.

The engine computes only the components indexed by a chosen word set,
folding Chen's relation over the segments either forward (working set =
prefix closure) or backward (working set = suffix closure).  It carries an
operation counter following a unit-cost convention: one operation per
component of the first segment's signature, ``2|w|`` per Chen update of
``w``.  Batches of paths sharing a segment count are processed together,
with paths on the trailing array axis.
"""

from __future__ import annotations

from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Iterator, Sequence

import numpy as np

from .errors import IncompleteSignatureError, InvalidInputError
from .words import Word, WordSet, closure_backward, closure_forward, words_up_to

FORWARD = "forward"
BACKWARD = "backward"
_DIRECTIONS = {"forward": FORWARD, "fwd": FORWARD, "backward": BACKWARD, "bwd": BACKWARD}


def _direction(name: str) -> str:
    try:
        return _DIRECTIONS[name]
    except KeyError:
        raise InvalidInputError(f"unknown direction {name!r}") from None


# -- value types ----------------------------------------------------------------


@dataclass(frozen=True)
class AffineSegment:
    duration: float
    increment: tuple[float, ...]

    def __post_init__(self):
        if not self.duration > 0:
            raise InvalidInputError(f"segment duration must be positive, got {self.duration}")
        object.__setattr__(self, "increment", tuple(float(x) for x in self.increment))

    @property
    def d(self) -> int:
        return len(self.increment)

    def augmented(self) -> np.ndarray:
        """Increment of the time-augmented segment, time first."""
        return np.array((self.duration,) + self.increment, dtype=float)


class PiecewisePath:
    """Piecewise-linear interpolation of ``values`` at strictly increasing ``times``."""

    def __init__(self, times, values):
        t = np.asarray(times, dtype=float)
        x = np.asarray(values, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if t.ndim != 1 or x.ndim != 2 or x.shape[0] != t.shape[0]:
            raise InvalidInputError("times must be (n+1,) and values (n+1, d)")
        if t.shape[0] < 2:
            raise InvalidInputError("a path needs at least two timestamps")
        if x.shape[1] < 1:
            raise InvalidInputError("a path needs at least one space dimension")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x))):
            raise InvalidInputError("path contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise InvalidInputError("timestamps must be strictly increasing")
        self.times = t
        self.values = x
        self.times.setflags(write=False)
        self.values.setflags(write=False)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def K(self) -> int:
        return self.times.shape[0] - 1

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    def increments(self) -> np.ndarray:
        """``(K, d+1)`` array of segment increments, time column first."""
        return np.column_stack([np.diff(self.times), np.diff(self.values, axis=0)])

    def segments(self) -> list[AffineSegment]:
        return [AffineSegment(row[0], tuple(row[1:])) for row in self.increments()]

    @classmethod
    def from_segments(cls, segments: Sequence[AffineSegment], start=None) -> "PiecewisePath":
        d = segments[0].d
        inc = np.array([s.augmented() for s in segments])
        t = np.concatenate([[0.0], np.cumsum(inc[:, 0])])
        x0 = np.zeros(d) if start is None else np.asarray(start, dtype=float)
        x = np.vstack([x0, x0 + np.cumsum(inc[:, 1:], axis=0)])
        return cls(t, x)

    def __repr__(self) -> str:
        return f"PiecewisePath(K={self.K}, d={self.d}, T={self.horizon:g})"


class SigVector(Mapping):
    """Signature components of one path, indexed by the words of a word set."""

    def __init__(self, words: WordSet, values: Mapping[Word, float]):
        vals = {}
        for w in words.words:
            if w not in values:
                raise IncompleteSignatureError(w)
            v = float(values[w])
            if not np.isfinite(v):
                raise InvalidInputError(f"non-finite signature value for {w}")
            vals[w] = v
        empty = Word.empty(words.d)
        if empty in vals and vals[empty] != 1.0:
            raise InvalidInputError("the empty-word component must equal 1")
        self.words = words
        self._values = vals

    @property
    def d(self) -> int:
        return self.words.d

    @property
    def N(self) -> int:
        return self.words.N

    def __getitem__(self, w: Word) -> float:
        try:
            return self._values[w]
        except KeyError:
            raise IncompleteSignatureError(w) from None

    def __iter__(self) -> Iterator[Word]:
        return iter(self.words.ordered())

    def __len__(self) -> int:
        return len(self._values)

    def as_array(self) -> np.ndarray:
        return np.array([self._values[w] for w in self.words.ordered()])

    def to_json(self) -> dict:
        return {str(w): self._values[w] for w in self.words.ordered()}

    def __repr__(self) -> str:
        return f"SigVector({len(self)} words, d={self.d}, N={self.N})"


@dataclass
class OpCounter:
    elementary_ops: int = 0

    def add(self, k: int) -> None:
        if k < 0:
            raise InvalidInputError("operation counts only grow")
        self.elementary_ops += int(k)


# -- single-segment formula and Chen's relation ---------------------------------


def sig_affine(seg: AffineSegment, words: WordSet) -> SigVector:
    """Signature of one affine segment: ``S^{i1..im} = prod(increments)/m!``."""
    if seg.d != words.d:
        raise InvalidInputError(f"segment has dimension {seg.d}, words have {words.d}")
    inc = seg.augmented()
    vals = {}
    for w in words.words:
        v = 1.0
        for a in w.letters:
            v *= inc[a]
        vals[w] = v / factorial(len(w))
    return SigVector(words, vals)


def chen_combine(left: Mapping[Word, float], right: Mapping[Word, float], w: Word,
                 counter: OpCounter | None = None) -> float:
    """``S^w(X*Y) = sum_k S^{w[:k]}(X) S^{w[k:]}(Y)``."""
    total = 0.0
    for p, s in zip(w.prefixes(), w.suffixes()):
        try:
            a = left[p]
        except KeyError:
            raise IncompleteSignatureError(p) from None
        try:
            b = right[s]
        except KeyError:
            raise IncompleteSignatureError(s) from None
        total += a * b
    if counter is not None:
        counter.add(2 * len(w))
    return total


# -- batched Chen engine -----------------------------------------------------------


class _ChenPlan:
    """Index tables driving the Chen fold for one (word set, direction)."""

    def __init__(self, B: WordSet, direction: str):
        self.direction = direction
        self.target = B.ordered()
        forward = direction == FORWARD
        work = closure_forward(B) if forward else closure_backward(B)
        self.work = work.ordered()
        # the segment factor needs the opposite closure of the working set
        seg = closure_backward(work) if forward else closure_forward(work)
        self.seg = seg.ordered()
        widx = {w: i for i, w in enumerate(self.work)}
        sidx = {w: i for i, w in enumerate(self.seg)}

        # seg[v] = seg[parent] * inc[letter] / |v|
        parents, letters = [], []
        for v in self.seg[1:] if self.seg and not self.seg[0].letters else self.seg:
            if forward:
                parents.append(sidx[Word(v.letters[1:], v.d)])
                letters.append(v.letters[0])
            else:
                parents.append(sidx[Word(v.letters[:-1], v.d)])
                letters.append(v.letters[-1])
        self.seg_parent = np.array(parents, dtype=np.intp)
        self.seg_letter = np.array(letters, dtype=np.intp)
        self.seg_len = np.array([len(v) for v in self.seg[1:]], dtype=float)
        self.seg_has_empty = bool(self.seg) and not self.seg[0].letters

        self.init_idx = np.array([sidx[w] for w in self.work], dtype=np.intp)
        self.full = self._pairs(self.work, widx, sidx, forward)
        self.last = self._pairs(self.target, widx, sidx, forward)
        self.target_in_work = np.array([widx[w] for w in self.target], dtype=np.intp)

    @staticmethod
    def _pairs(words, widx, sidx, forward):
        state, seg, starts = [], [], []
        for w in words:
            starts.append(len(state))
            for j in range(len(w) + 1):
                head, tail = Word(w.letters[:j], w.d), Word(w.letters[j:], w.d)
                if forward:
                    state.append(widx[head])
                    seg.append(sidx[tail])
                else:
                    state.append(widx[tail])
                    seg.append(sidx[head])
        terms = np.diff(np.array(starts + [len(state)]))
        return (
            np.array(state, dtype=np.intp),
            np.array(seg, dtype=np.intp),
            np.array(starts, dtype=np.intp),
            int(np.sum(2 * (terms - 1))),
        )

    def segment_tables(self, inc: np.ndarray) -> np.ndarray:
        """Signatures of every segment over ``self.seg``; ``inc`` is ``(K, d+1, n)``."""
        K, _, n = inc.shape
        out = np.empty((K, len(self.seg), n))
        if not self.seg_has_empty:
            raise AssertionError("segment table must contain the empty word")
        out[:, 0, :] = 1.0
        for i, (p, a, m) in enumerate(zip(self.seg_parent, self.seg_letter, self.seg_len), start=1):
            np.multiply(out[:, p, :], inc[:, a, :], out=out[:, i, :])
            out[:, i, :] /= m
        return out

    def run(self, inc: np.ndarray) -> tuple[np.ndarray, int]:
        """Fold over segments. ``inc`` is ``(K, d+1, n)``; returns ``(|B|, n)`` values
        and the per-path operation count."""
        K = inc.shape[0]
        seg = self.segment_tables(inc)
        order = range(K) if self.direction == FORWARD else range(K - 1, -1, -1)
        order = list(order)
        state = seg[order[0]][self.init_idx]
        ops = len(self.work)
        if K == 1:
            return state[self.target_in_work], ops
        s_idx, q_idx, starts, cost = self.full
        for k in order[1:-1]:
            state = np.add.reduceat(state[s_idx] * seg[k][q_idx], starts, axis=0)
            ops += cost
        s_idx, q_idx, starts, cost = self.last
        if len(s_idx):
            state = np.add.reduceat(state[s_idx] * seg[order[-1]][q_idx], starts, axis=0)
        else:
            state = np.empty((0, inc.shape[2]))
        ops += cost
        return state, ops


@lru_cache(maxsize=64)
def _plan(B: WordSet, direction: str) -> _ChenPlan:
    return _ChenPlan(B, direction)


def _as_increment_batch(increments) -> np.ndarray:
    inc = np.asarray(increments, dtype=float)
    if inc.ndim == 2:
        inc = inc[None]
    if inc.ndim != 3:
        raise InvalidInputError("increments must be (n, K, d+1)")
    if inc.shape[1] < 1:
        raise InvalidInputError("a path needs at least one segment")
    if np.any(inc[:, :, 0] <= 0):
        raise InvalidInputError("segment durations must be positive")
    return inc


def signature_batch(increments, B: WordSet, direction: str = FORWARD, workers: int | None = None,
                    chunk: int = 2048) -> tuple[np.ndarray, int]:
    """Signature components over ``B`` for a batch of paths with equal segment count.

    Parameters
    ----------
    increments : array of shape (n, K, d+1)
        Segment increments, time column first.
    B : WordSet
        Words to evaluate; the output columns follow ``B.ordered()``.
    direction : {"forward", "backward"}
    workers : int, optional
        Thread count over path chunks. Results do not depend on it.

    Returns
    -------
    values : ndarray of shape (n, |B|)
    ops : int
        Operation count for a single path.
    """
    direction = _direction(direction)
    inc = _as_increment_batch(increments)
    if inc.shape[2] != B.d + 1:
        raise InvalidInputError(f"paths have dimension {inc.shape[2] - 1}, words have {B.d}")
    if len(B) == 0:
        return np.empty((inc.shape[0], 0)), 0
    plan = _plan(B, direction)
    slices = [slice(i, i + chunk) for i in range(0, inc.shape[0], chunk)]

    def work(sl):
        vals, ops = plan.run(np.ascontiguousarray(inc[sl].transpose(1, 2, 0)))
        return vals.T, ops

    if workers and workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, slices))
    else:
        parts = [work(sl) for sl in slices]
    ops = parts[0][1] if parts else 0
    return np.concatenate([p[0] for p in parts], axis=0), ops


def _sig_single(path: PiecewisePath, B: WordSet, direction: str) -> tuple[SigVector, OpCounter]:
    if path.d != B.d:
        raise InvalidInputError(f"path has dimension {path.d}, words have {B.d}")
    values, ops = signature_batch(path.increments()[None], B, direction)
    counter = OpCounter()
    counter.add(ops)
    return SigVector(B, dict(zip(B.ordered(), values[0]))), counter


def sig_forward(path: PiecewisePath, B: WordSet) -> tuple[SigVector, OpCounter]:
    """Components over ``B`` by left-to-right Chen folding over the prefix closure."""
    return _sig_single(path, B, FORWARD)


def sig_backward(path: PiecewisePath, B: WordSet) -> tuple[SigVector, OpCounter]:
    """Components over ``B`` by right-to-left Chen folding over the suffix closure."""
    return _sig_single(path, B, BACKWARD)


def cost_closed_form(direction: str, B: WordSet, K: int) -> int:
    """``Card(Phi(B)) + 2(K-2) l(Phi(B)) + 2 l(B)`` with Phi the prefix
    (forward) or suffix (backward) closure."""
    direction = _direction(direction)
    if K < 2:
        raise InvalidInputError(f"closed-form cost needs K >= 2, got {K}")
    closure = closure_forward(B) if direction == FORWARD else closure_backward(B)
    return len(closure) + 2 * (K - 2) * closure.length + 2 * B.length


# -- dense full signature -------------------------------------------------------------


def signature_levels(increments, N: int, chunk: int = 2048) -> list[np.ndarray]:
    """Full truncated signature as dense tensors, one array per level.

    Level ``m`` has shape ``(n, (d+1)**m)``; the column of word ``w`` is the
    radix-(d+1) value of its letters, so concatenating the levels gives the
    canonical word order.  Each segment is multiplied in with a Horner scheme.
    """
    inc = _as_increment_batch(increments)
    n, K, D = inc.shape
    out = [np.empty((n, D ** m)) for m in range(N + 1)]
    for lo in range(0, n, chunk):
        x_all = inc[lo:lo + chunk]
        b = x_all.shape[0]
        lev = [np.ones((b, 1))] + [np.zeros((b, D ** m)) for m in range(1, N + 1)]
        for k in range(K):
            x = x_all[:, k, :]
            for m in range(N, 0, -1):
                acc = lev[0]
                for j in range(1, m + 1):
                    acc = (acc[:, :, None] * x[:, None, :]).reshape(b, -1)
                    acc *= 1.0 / (m - j + 1)
                    acc += lev[j]
                lev[m] = acc
        for m in range(N + 1):
            out[m][lo:lo + chunk] = lev[m]
    return out


def levels_to_sigvector(levels: list[np.ndarray], row: int, d: int) -> SigVector:
    N = len(levels) - 1
    words = words_up_to(N, d)
    flat = np.concatenate([lv[row] for lv in levels])
    return SigVector(words, dict(zip(words.ordered(), flat)))


# -- independent oracle -----------------------------------------------------------------

BRUTE_FORCE_MAX_ORDER = 5
BRUTE_FORCE_MAX_SEGMENTS = 50


def brute_force_sig(path: PiecewisePath, N: int) -> SigVector:
    """Iterated integrals over all words of length ``<= N`` without Chen's relation.

    Solves ``dS^{wa} = S^w dX^a`` exactly on each segment: every component is
    a polynomial in local time there, so it is integrated in closed form and
    evaluated at the segment end.  Slow on purpose; guarded to small sizes.
    """
    if N > BRUTE_FORCE_MAX_ORDER or path.K > BRUTE_FORCE_MAX_SEGMENTS:
        raise InvalidInputError(
            f"oracle limited to N <= {BRUTE_FORCE_MAX_ORDER} and K <= {BRUTE_FORCE_MAX_SEGMENTS}"
        )
    words = words_up_to(N, path.d).ordered()
    value = {w: (1.0 if not w.letters else 0.0) for w in words}
    for h, *dx in path.increments():
        rate = np.array([1.0] + [v / h for v in dx])
        poly = {}
        for w in words:
            if not w.letters:
                poly[w] = np.polynomial.Polynomial([1.0])
                continue
            parent = Word(w.letters[:-1], w.d)
            integral = (poly[parent] * rate[w.letters[-1]]).integ()
            poly[w] = integral + value[w]
        for w in words:
            value[w] = float(poly[w](h))
    return SigVector(words_up_to(N, path.d), value)
