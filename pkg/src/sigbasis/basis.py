"""Certification and construction of bases of words.

A set ``B`` of words of length ``<= N`` is a basis of words for the length-N
words when the zero-padded shuffles ``w ш 0_{N-|w|}`` (``w`` in ``B``) form a
basis of the span of all length-N words.  Padding with zeros never moves
the non-zero letters, so the completion matrix is block diagonal over pure
words and every check here runs block by block.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterator, Mapping, Sequence

from .errors import InvalidInputError, InvariantError
from .freealg import WordPoly, completion_image, time_rescaled_padding
from .words import (
    Word,
    WordSet,
    canonical_order,
    class_words,
    class_words_up_to,
    prefix_words,
    pure,
    pure_words_up_to,
    suffix_words,
    words_of_length,
)

# -- exact linear algebra -----------------------------------------------------


def bareiss_rank(rows: Sequence[Sequence[int]]) -> int:
    """Rank of an integer matrix by fraction-free (Bareiss) elimination.

    Pivots are the first non-zero entry scanning columns left to right and
    rows top to bottom; every division is exact.
    """
    m = [list(r) for r in rows]
    if not m:
        return 0
    n_rows, n_cols = len(m), len(m[0])
    rank, prev = 0, 1
    for col in range(n_cols):
        if rank == n_rows:
            break
        piv = next((r for r in range(rank, n_rows) if m[r][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        p = m[rank][col]
        for r in range(rank + 1, n_rows):
            a = m[r][col]
            row_r, row_p = m[r], m[rank]
            for c in range(col, n_cols):
                num = p * row_r[c] - a * row_p[c]
                q, rem = divmod(num, prev)
                if rem:
                    raise InvariantError("inexact Bareiss division")
                row_r[c] = q
        prev = p
        rank += 1
    return rank


def nullspace(rows: Sequence[Sequence[Fraction | int]]) -> list[list[Fraction]]:
    """Basis of ``{x : A x = 0}`` over the rationals, via reduced row echelon form."""
    a = [[Fraction(v) for v in r] for r in rows]
    if not a:
        return []
    n_rows, n_cols = len(a), len(a[0])
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        piv = next((i for i in range(r, n_rows) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = 1 / a[r][c]
        a[r] = [v * inv for v in a[r]]
        for i in range(n_rows):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [vi - f * vr for vi, vr in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == n_rows:
            break
    free = [c for c in range(n_cols) if c not in pivots]
    basis = []
    for f in free:
        x = [Fraction(0)] * n_cols
        x[f] = Fraction(1)
        for i, pc in enumerate(pivots):
            x[pc] = -a[i][f]
        basis.append(x)
    return basis


def left_kernel(rows: Sequence[Sequence[Fraction | int]]) -> list[list[Fraction]]:
    """Basis of ``{c : c^T A = 0}``."""
    if not rows:
        return []
    transposed = [list(col) for col in zip(*rows)]
    if not transposed:
        # zero columns: every coefficient vector is in the kernel
        return [[Fraction(int(i == j)) for j in range(len(rows))] for i in range(len(rows))]
    return nullspace(transposed)


# -- completion matrix --------------------------------------------------------


@dataclass(frozen=True)
class CompletionMatrix:
    rows: tuple[Word, ...]
    cols: tuple[Word, ...]
    entries: tuple[tuple[int, ...], ...]
    N: int
    d: int
    gamma: Word | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.cols)

    def rank(self) -> int:
        return bareiss_rank(self.entries)

    def __str__(self) -> str:
        width = max([len(str(c)) for c in self.cols] + [1])
        head = " " * (self.N + 2) + " ".join(str(c).rjust(width) for c in self.cols)
        lines = [head]
        for w, row in zip(self.rows, self.entries):
            lines.append(str(w).rjust(self.N) + "  " + " ".join(str(v).rjust(width) for v in row))
        return "\n".join(lines)


def _check_lengths(words, N: int) -> None:
    for w in words:
        if len(w) > N:
            raise InvalidInputError(f"word {w} longer than order {N}")


def completion_matrix(B: WordSet | Sequence[Word], N: int, gamma: Word | None = None,
                      d: int | None = None) -> CompletionMatrix:
    """Coefficients of ``w ш 0_{N-|w|}`` for ``w`` in ``B``.

    Rows follow canonical order of ``B`` (or the given order for a plain
    sequence).  Columns are all length-N words, or only the class of
    ``gamma`` when given.
    """
    if isinstance(B, WordSet):
        rows, d = B.ordered(), B.d
    else:
        rows = list(B)
        if d is None:
            if not rows:
                raise InvalidInputError("dimension of an empty row set must be given")
            d = rows[0].d
    _check_lengths(rows, N)
    if gamma is not None:
        cols = class_words(gamma, N)
    else:
        cols = words_of_length(N, d).ordered()
    col_index = {c: j for j, c in enumerate(cols)}
    entries = []
    for w in rows:
        row = [0] * len(cols)
        for u, c in completion_image(w, N).items():
            if u not in col_index:
                raise InvalidInputError(f"row {w} leaves the class of {gamma}")
            row[col_index[u]] = c
        entries.append(tuple(row))
    return CompletionMatrix(tuple(rows), tuple(cols), tuple(entries), N, d, gamma)


# -- certificates -------------------------------------------------------------


@dataclass(frozen=True)
class BlockReport:
    gamma: Word
    cardinality: int
    required: int
    rank: int
    witness: dict[Word, Fraction] | None = None

    @property
    def ok(self) -> bool:
        return self.cardinality == self.required == self.rank

    def to_json(self) -> dict:
        out = {
            "gamma": str(self.gamma),
            "cardinality": self.cardinality,
            "required": self.required,
            "rank": self.rank,
        }
        if self.witness is not None:
            out["witness"] = WordPoly(self.witness, d=self.gamma.d).to_json()
        return out


@dataclass(frozen=True)
class BasisCertificate:
    verdict: str
    rank: int
    N: int
    d: int
    blocks: tuple[BlockReport, ...]
    witness: dict[Word, Fraction] | None = None

    @property
    def is_basis(self) -> bool:
        return self.verdict == "basis"

    def block(self, gamma: Word | str) -> BlockReport:
        key = str(gamma)
        for b in self.blocks:
            if str(b.gamma) == key:
                return b
        raise KeyError(key)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "rank": self.rank,
            "N": self.N,
            "d": self.d,
            "blocks": [b.to_json() for b in self.blocks],
            "witness": None if self.witness is None else WordPoly(self.witness, d=self.d).to_json(),
        }


def certify_block(words: Sequence[Word], N: int, gamma: Word) -> BlockReport:
    """Check whether ``words`` (all with pure word ``gamma``) complete to a
    basis of the span of ``W_N(gamma)``."""
    words = canonical_order(words)
    for w in words:
        if pure(w) != gamma:
            raise InvalidInputError(f"{w} does not belong to the class of {gamma}")
    required = comb(N, len(gamma))
    if not words:
        return BlockReport(gamma, 0, required, 0)
    cm = completion_matrix(words, N, gamma=gamma, d=gamma.d)
    rank = cm.rank()
    witness = None
    if rank < len(words):
        vec = left_kernel(cm.entries)[0]
        witness = {w: c for w, c in zip(words, vec) if c != 0}
    return BlockReport(gamma, len(words), required, rank, witness)


def is_basis_of_words(B: WordSet, N: int | None = None) -> BasisCertificate:
    """Exact, blockwise verdict on whether ``B`` is a basis of words at order ``N``."""
    N = B.N if N is None else N
    _check_lengths(B.words, N)
    by_gamma: dict[Word, list[Word]] = {}
    for w in B.words:
        by_gamma.setdefault(pure(w), []).append(w)
    blocks = []
    for gamma in pure_words_up_to(N, B.d):
        blocks.append(certify_block(by_gamma.get(gamma, []), N, gamma))
    ok = all(b.ok for b in blocks)
    witness = next((b.witness for b in blocks if b.witness), None)
    return BasisCertificate(
        "basis" if ok else "not_basis",
        sum(b.rank for b in blocks),
        N,
        B.d,
        tuple(blocks),
        witness,
    )


def certify_dense(B: WordSet, N: int | None = None) -> bool:
    """Same question as :func:`is_basis_of_words`, answered on the full
    (non block-split) completion matrix."""
    N = B.N if N is None else N
    size = (B.d + 1) ** N
    if len(B) != size:
        return False
    return completion_matrix(B, N).rank() == size


def apply_completion(coeffs: Mapping[Word, Fraction], N: int, d: int) -> WordPoly:
    """``sum c_w (w ш 0_{N-|w|})``."""
    total = WordPoly.zero(d)
    for w, c in coeffs.items():
        total = total + completion_image(w, N).scale(c)
    return total


def relation_kernel(words: Sequence[Word], N: int, T: Fraction | int = 1) -> list[dict[Word, Fraction]]:
    """Exact basis of the linear relations ``sum c_w S^w = 0`` forced on every
    signature over ``[0, T]`` by the time-padding identity.

    Each word ``w`` is rewritten as ``(k!/T^k)(w ш 0_k)`` with ``k = N-|w|``;
    relations are the left kernel of the resulting matrix.
    """
    words = canonical_order(words)
    if not words:
        return []
    d = words[0].d
    _check_lengths(words, N)
    cols = words_of_length(N, d).ordered()
    idx = {c: j for j, c in enumerate(cols)}
    rows = []
    for w in words:
        row = [Fraction(0)] * len(cols)
        for u, c in time_rescaled_padding(w, N - len(w), T).items():
            row[idx[u]] = Fraction(c)
        rows.append(row)
    return [{w: c for w, c in zip(words, v) if c != 0} for v in left_kernel(rows)]


# -- necessary condition --------------------------------------------------------


@dataclass(frozen=True)
class FilterResult:
    passed: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.passed


def necessary_filter(B: WordSet, N: int | None = None, gamma: Word | None = None) -> FilterResult:
    """Cardinality conditions every basis of words satisfies (not sufficient).

    With ``gamma`` given, ``B`` is treated as a candidate block for the
    class of ``gamma`` alone.
    """
    N = B.N if N is None else N
    _check_lengths(B.words, N)
    lengths_by_gamma: dict[Word, list[int]] = {}
    for w in B.words:
        lengths_by_gamma.setdefault(pure(w), []).append(len(w))
    if gamma is not None:
        stray = set(lengths_by_gamma) - {gamma}
        if stray:
            return FilterResult(False, f"words outside the class of {gamma}")
    classes = pure_words_up_to(N, B.d) if gamma is None else [gamma]
    for gamma in classes:
        g = len(gamma)
        lens = lengths_by_gamma.get(gamma, [])
        if len(lens) != comb(N, g):
            return FilterResult(False, f"class {gamma}: {len(lens)} words, need {comb(N, g)}")
        for m in range(g, N):
            count = sum(1 for k in lens if k <= m)
            if count > comb(m, g):
                return FilterResult(
                    False, f"class {gamma}: {count} words of length <= {m}, at most {comb(m, g)} allowed"
                )
    return FilterResult(True)


# -- constructions ----------------------------------------------------------------


def construct_family(kind: str, N: int, d: int, pad: Mapping[Word, int] | None = None,
                     verify: bool = True) -> WordSet:
    """Prefix- or suffix-based basis of words with optional zero padding.

    ``prefix_padded`` appends ``0_{pad[w]}`` to each word not ending in 0;
    ``suffix_padded`` prepends ``0_{pad[w]}`` to each word not starting in 0.
    Unlisted words get no padding.
    """
    if kind in ("prefix", "prefix_padded"):
        base, append = prefix_words(N, d), True
    elif kind in ("suffix", "suffix_padded"):
        base, append = suffix_words(N, d), False
    else:
        raise InvalidInputError(f"unknown family {kind!r}")
    pad = dict(pad or {})
    unknown = [w for w in pad if w not in base]
    if unknown:
        raise InvalidInputError(f"padding given for words outside the family: {unknown}")
    out = []
    for w in base.ordered():
        m = pad.get(w, 0)
        if m < 0 or len(w) + m > N:
            raise InvalidInputError(f"padding {m} for {w} exceeds order {N}")
        z = Word.zeros(m, d)
        out.append(w + z if append else z + w)
    family = WordSet(out, d, N)
    if len(family) != len(base):
        raise InvariantError("padding produced duplicate words")
    if verify and not is_basis_of_words(family, N).is_basis:
        raise InvariantError(f"{kind} family failed certification")
    return family


def random_pad(kind: str, N: int, d: int, rng: random.Random) -> dict[Word, int]:
    """Uniformly random admissible padding for :func:`construct_family`."""
    base = prefix_words(N, d) if kind.startswith("prefix") else suffix_words(N, d)
    return {w: rng.randint(0, N - len(w)) for w in base.ordered()}


# -- exhaustive search ----------------------------------------------------------

MAX_ENUMERATION_CANDIDATES = 20


def enumerate_bases(N: int, d: int, gamma: Word) -> Iterator[WordSet]:
    """Every subset of the class of ``gamma`` (lengths <= N) that is a basis
    of words for its length-N class.  Only subsets of the right size can
    qualify, so only those are examined."""
    if gamma.d != d:
        raise InvalidInputError("alphabet dimension mismatch")
    candidates = class_words_up_to(gamma, N).ordered()
    if len(candidates) > MAX_ENUMERATION_CANDIDATES:
        raise InvalidInputError(
            f"{len(candidates)} candidate words exceed the enumeration guard of {MAX_ENUMERATION_CANDIDATES}"
        )
    size = comb(N, len(gamma))
    for subset in itertools.combinations(candidates, size):
        if certify_block(subset, N, gamma).ok:
            yield WordSet(subset, d, N)


def enumerate_all_bases(N: int, d: int) -> Iterator[WordSet]:
    """Bases of words for all length-N words, composed across pure-word classes."""
    per_class = [list(enumerate_bases(N, d, g)) for g in pure_words_up_to(N, d)]
    for combo in itertools.product(*per_class):
        words = set()
        for part in combo:
            words |= part.words
        yield WordSet(words, d, N)
