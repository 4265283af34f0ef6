"""Words over the time-augmented alphabet {0, ..., d} and finite word sets.

Letter ``0`` is the time coordinate, letters ``1..d`` are the space
coordinates.  Words are immutable letter tuples tagged with their alphabet
dimension; a word set always knows both its dimension and its truncation
order, and operations refuse to mix dimensions.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from math import comb
from typing import Iterable, Iterator

from .errors import InvalidInputError

EMPTY_TOKEN = "e"


@dataclass(frozen=True, slots=True)
class Word:
    letters: tuple[int, ...]
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise InvalidInputError(f"alphabet dimension must be >= 1, got {self.d}")
        for a in self.letters:
            if not 0 <= a <= self.d:
                raise InvalidInputError(f"letter {a} outside alphabet {{0..{self.d}}}")

    @classmethod
    def parse(cls, text: str, d: int) -> "Word":
        """Read ``"021"`` style strings; ``"e"`` (or ``""``) is the empty word."""
        text = text.strip()
        if text in (EMPTY_TOKEN, "", "∅"):
            return cls((), d)
        if not text.isdigit():
            raise InvalidInputError(f"cannot parse word {text!r}")
        return cls(tuple(int(c) for c in text), d)

    @classmethod
    def empty(cls, d: int) -> "Word":
        return cls((), d)

    @classmethod
    def zeros(cls, k: int, d: int) -> "Word":
        return cls((0,) * k, d)

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __str__(self) -> str:
        if not self.letters:
            return EMPTY_TOKEN
        return "".join(str(a) for a in self.letters)

    def __repr__(self) -> str:
        return f"Word({str(self)!r}, d={self.d})"

    @property
    def key(self) -> tuple[int, int]:
        """Sort key: length first, then the radix-(d+1) value of the letters."""
        v = 0
        for a in self.letters:
            v = v * (self.d + 1) + a
        return (len(self.letters), v)

    def __lt__(self, other: "Word") -> bool:
        _check_same_d(self, other)
        return self.key < other.key

    def __add__(self, other: "Word") -> "Word":
        return concat(self, other)

    def is_pure(self) -> bool:
        return 0 not in self.letters

    def prefixes(self) -> list["Word"]:
        return [Word(self.letters[:j], self.d) for j in range(len(self.letters) + 1)]

    def suffixes(self) -> list["Word"]:
        return [Word(self.letters[j:], self.d) for j in range(len(self.letters) + 1)]


def _check_same_d(*words: Word) -> int:
    ds = {w.d for w in words}
    if len(ds) > 1:
        raise InvalidInputError(f"alphabet dimension mismatch: {sorted(ds)}")
    return ds.pop()


def concat(w: Word, v: Word) -> Word:
    _check_same_d(w, v)
    return Word(w.letters + v.letters, w.d)


def pure(w: Word) -> Word:
    """Drop every time letter, keeping the order of the others."""
    return Word(tuple(a for a in w.letters if a != 0), w.d)


@dataclass(frozen=True, init=False)
class WordSet:
    """A finite set of words of length at most ``N`` over ``{0..d}``."""

    words: frozenset
    d: int
    N: int

    def __init__(self, words: Iterable[Word], d: int, N: int):
        words = frozenset(words)
        if N < 0:
            raise InvalidInputError(f"order must be >= 0, got {N}")
        for w in words:
            if not isinstance(w, Word):
                raise InvalidInputError(f"not a Word: {w!r}")
            if w.d != d:
                raise InvalidInputError(f"word {w} has dimension {w.d}, set has {d}")
            if len(w) > N:
                raise InvalidInputError(f"word {w} longer than order {N}")
        object.__setattr__(self, "words", words)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "N", N)

    def __iter__(self) -> Iterator[Word]:
        return iter(self.ordered())

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, w) -> bool:
        return w in self.words

    @property
    def length(self) -> int:
        """Total number of letters over all words."""
        return sum(len(w) for w in self.words)

    def ordered(self) -> list[Word]:
        return canonical_order(self.words)

    def with_order(self, N: int) -> "WordSet":
        return WordSet(self.words, self.d, N)

    def union(self, other: "WordSet") -> "WordSet":
        if other.d != self.d:
            raise InvalidInputError("alphabet dimension mismatch")
        return WordSet(self.words | other.words, self.d, max(self.N, other.N))

    def restrict(self, gamma: Word) -> "WordSet":
        """Words of this set whose pure word is ``gamma``."""
        return WordSet((w for w in self.words if pure(w) == gamma), self.d, self.N)

    def pure_words(self) -> set[Word]:
        return {pure(w) for w in self.words}

    def to_json(self) -> dict:
        return {"d": self.d, "N": self.N, "words": [str(w) for w in self.ordered()]}

    @classmethod
    def from_json(cls, obj: dict) -> "WordSet":
        try:
            d, N, raw = int(obj["d"]), int(obj["N"]), obj["words"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed word set document: {exc}") from None
        return cls((Word.parse(s, d) for s in raw), d, N)

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    def __repr__(self) -> str:
        body = ", ".join(str(w) for w in self.ordered())
        return f"WordSet({{{body}}}, d={self.d}, N={self.N})"


def canonical_order(words: Iterable[Word]) -> list[Word]:
    """Sort by length, then lexicographically."""
    words = list(words)
    if words:
        _check_same_d(*words)
    return sorted(words, key=lambda w: w.key)


# -- enumeration ---------------------------------------------------------------


def _check_order(N: int, d: int) -> None:
    if N < 0:
        raise InvalidInputError(f"order must be >= 0, got {N}")
    if d < 1:
        raise InvalidInputError(f"dimension must be >= 1, got {d}")


def words_of_length(N: int, d: int) -> WordSet:
    _check_order(N, d)
    words = (Word(t, d) for t in itertools.product(range(d + 1), repeat=N))
    return WordSet(words, d, N)


def words_up_to(N: int, d: int) -> WordSet:
    _check_order(N, d)
    words = (
        Word(t, d) for k in range(N + 1) for t in itertools.product(range(d + 1), repeat=k)
    )
    return WordSet(words, d, N)


def prefix_words(N: int, d: int) -> WordSet:
    """Words of length <= N not ending with the time letter (empty word included)."""
    full = words_up_to(N, d)
    return WordSet((w for w in full.words if not w.letters or w.letters[-1] != 0), d, N)


def suffix_words(N: int, d: int) -> WordSet:
    """Words of length <= N not starting with the time letter (empty word included)."""
    full = words_up_to(N, d)
    return WordSet((w for w in full.words if not w.letters or w.letters[0] != 0), d, N)


def _check_gamma(gamma: Word, N: int) -> None:
    if not gamma.is_pure():
        raise InvalidInputError(f"{gamma} is not a pure word")
    if len(gamma) > N:
        raise InvalidInputError(f"pure word {gamma} longer than order {N}")


def class_words(gamma: Word, n: int) -> list[Word]:
    """All words of length exactly ``n`` whose pure word is ``gamma``.

    Generated by choosing which ``len(gamma)`` slots carry the letters of
    ``gamma``; the result is in canonical order.
    """
    _check_gamma(gamma, n)
    m = len(gamma)
    out = []
    for slots in itertools.combinations(range(n), m):
        letters = [0] * n
        for pos, a in zip(slots, gamma.letters):
            letters[pos] = a
        out.append(Word(tuple(letters), gamma.d))
    return canonical_order(out)


def class_words_exact(gamma: Word, N: int) -> WordSet:
    return WordSet(class_words(gamma, N), gamma.d, N)


def class_words_up_to(gamma: Word, N: int) -> WordSet:
    _check_gamma(gamma, N)
    words = [w for n in range(len(gamma), N + 1) for w in class_words(gamma, n)]
    return WordSet(words, gamma.d, N)


def pure_words_up_to(N: int, d: int) -> list[Word]:
    _check_order(N, d)
    return [Word(t, d) for k in range(N + 1) for t in itertools.product(range(1, d + 1), repeat=k)]


ENUMERATION_KINDS = (
    "all_exact_N",
    "all_up_to_N",
    "prefixes_up_to_N",
    "suffixes_up_to_N",
    "class_exact_N",
    "class_up_to_N",
)


def enumerate_words(kind: str, N: int, d: int, gamma: Word | None = None) -> WordSet:
    """Dispatch over the canonical word families by name."""
    if kind in ("class_exact_N", "class_up_to_N"):
        if gamma is None:
            raise InvalidInputError(f"{kind} needs a pure word")
        if gamma.d != d:
            raise InvalidInputError("alphabet dimension mismatch")
        return class_words_exact(gamma, N) if kind == "class_exact_N" else class_words_up_to(gamma, N)
    table = {
        "all_exact_N": words_of_length,
        "all_up_to_N": words_up_to,
        "prefixes_up_to_N": prefix_words,
        "suffixes_up_to_N": suffix_words,
    }
    try:
        return table[kind](N, d)
    except KeyError:
        raise InvalidInputError(f"unknown enumeration kind {kind!r}") from None


# -- closed forms used by tests and cost formulas ------------------------------


def count_up_to(N: int, d: int) -> int:
    return ((d + 1) ** (N + 1) - 1) // d


def minimal_basis_length(N: int, d: int) -> int:
    """Total letter count of the prefix (equivalently suffix) word set."""
    return (N * d * (d + 1) ** N - (d + 1) ** N + 1) // d


def class_size(gamma: Word, N: int) -> int:
    return comb(N, len(gamma))


# -- closures --------------------------------------------------------------------


def closure_forward(B: WordSet) -> WordSet:
    """All prefixes of words of ``B`` (the empty word included when B is non-empty)."""
    return WordSet({p for w in B.words for p in w.prefixes()}, B.d, B.N)


def closure_backward(B: WordSet) -> WordSet:
    """All suffixes of words of ``B``."""
    return WordSet({s for w in B.words for s in w.suffixes()}, B.d, B.N)
