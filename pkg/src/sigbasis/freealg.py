"""Exact linear combinations of words and the shuffle product.

Shuffle coefficients are integers; :class:`fractions.Fraction` only enters
when a polynomial is scaled (for instance by ``k!/T**k``).
"""

from __future__ import annotations

import json
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from numbers import Rational
from typing import Iterable, Mapping

from .errors import IncompleteSignatureError, InvalidInputError
from .words import Word, _check_same_d, canonical_order


class WordPoly:
    """Finite linear combination ``sum c_w * w`` with exact coefficients.

    Zero coefficients are dropped on construction so that equality is
    plain dictionary equality.
    """

    __slots__ = ("_terms", "d")

    def __init__(self, terms: Mapping[Word, Rational] | Iterable[tuple[Word, Rational]] = (), d: int | None = None):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Word, Rational] = {}
        for w, c in items:
            if not isinstance(c, Rational):
                raise InvalidInputError(f"coefficient {c!r} is not exact")
            acc[w] = acc.get(w, 0) + c
        clean = {w: _normalize(c) for w, c in acc.items() if c != 0}
        ds = {w.d for w in clean}
        if d is not None:
            ds.add(d)
        if len(ds) > 1:
            raise InvalidInputError(f"alphabet dimension mismatch: {sorted(ds)}")
        if not ds:
            raise InvalidInputError("dimension of an empty polynomial must be given")
        self._terms = clean
        self.d = ds.pop()

    @classmethod
    def from_word(cls, w: Word, coeff: Rational = 1) -> "WordPoly":
        return cls({w: coeff}, d=w.d)

    @classmethod
    def zero(cls, d: int) -> "WordPoly":
        return cls({}, d=d)

    @property
    def terms(self) -> dict[Word, Rational]:
        return dict(self._terms)

    def __getitem__(self, w: Word) -> Rational:
        return self._terms.get(w, 0)

    def __iter__(self):
        return iter(canonical_order(self._terms))

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def items(self):
        return [(w, self._terms[w]) for w in self]

    def __eq__(self, other) -> bool:
        if not isinstance(other, WordPoly):
            return NotImplemented
        return self.d == other.d and self._terms == other._terms

    def __hash__(self):
        return hash((self.d, frozenset(self._terms.items())))

    def __add__(self, other: "WordPoly") -> "WordPoly":
        _check_poly_d(self, other)
        return WordPoly(list(self._terms.items()) + list(other._terms.items()), d=self.d)

    def __neg__(self) -> "WordPoly":
        return WordPoly({w: -c for w, c in self._terms.items()}, d=self.d)

    def __sub__(self, other: "WordPoly") -> "WordPoly":
        return self + (-other)

    def scale(self, c: Rational) -> "WordPoly":
        return WordPoly({w: c * v for w, v in self._terms.items()}, d=self.d)

    __rmul__ = scale

    def coefficient_sum(self) -> Rational:
        return sum(self._terms.values(), 0)

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for i, (w, c) in enumerate(self.items()):
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            body = str(w) if mag == 1 else f"{mag}*{w}"
            if i == 0:
                parts.append(body if sign == "+" else f"-{body}")
            else:
                parts.append(f"{sign} {body}")
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"WordPoly({self}, d={self.d})"

    def to_json(self) -> dict[str, str]:
        return {str(w): _rat_str(c) for w, c in self.items()}

    @classmethod
    def from_json(cls, obj: Mapping[str, str], d: int) -> "WordPoly":
        try:
            return cls({Word.parse(k, d): Fraction(v) for k, v in obj.items()}, d=d)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidInputError(f"malformed polynomial: {exc}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _normalize(c: Rational) -> Rational:
    if isinstance(c, Fraction) and c.denominator == 1:
        return int(c.numerator)
    return c


def _rat_str(c: Rational) -> str:
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _check_poly_d(p: WordPoly, q: WordPoly) -> None:
    if p.d != q.d:
        raise InvalidInputError(f"alphabet dimension mismatch: {p.d} vs {q.d}")


@lru_cache(maxsize=1 << 16)
def _shuffle_letters(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[tuple[tuple[int, ...], int], ...]:
    # (wi) ш (vj) = (w ш vj) i + (wi ш v) j
    if not a:
        return ((b, 1),)
    if not b:
        return ((a, 1),)
    acc: dict[tuple[int, ...], int] = {}
    i, j = a[-1], b[-1]
    for u, c in _shuffle_letters(a[:-1], b):
        key = u + (i,)
        acc[key] = acc.get(key, 0) + c
    for u, c in _shuffle_letters(a, b[:-1]):
        key = u + (j,)
        acc[key] = acc.get(key, 0) + c
    return tuple(acc.items())


def shuffle(w: Word, v: Word) -> WordPoly:
    """Shuffle product of two words."""
    d = _check_same_d(w, v)
    return WordPoly({Word(u, d): c for u, c in _shuffle_letters(w.letters, v.letters)}, d=d)


def shuffle_poly(p: WordPoly, q: WordPoly) -> WordPoly:
    """Bilinear extension of :func:`shuffle`."""
    _check_poly_d(p, q)
    out: list[tuple[Word, Rational]] = []
    for w, a in p._terms.items():
        for v, b in q._terms.items():
            for u, c in _shuffle_letters(w.letters, v.letters):
                out.append((Word(u, p.d), a * b * c))
    return WordPoly(out, d=p.d)


def zero_pad_shuffle(w: Word, k: int) -> WordPoly:
    """``w ш 0_k``: the image of ``w`` under the completion map at order ``len(w)+k``."""
    if k < 0:
        raise InvalidInputError(f"padding must be >= 0, got {k}")
    return shuffle(w, Word.zeros(k, w.d))


def completion_image(w: Word, N: int) -> WordPoly:
    return zero_pad_shuffle(w, N - len(w))


def time_rescaled_padding(w: Word, k: int, T: Rational = 1) -> WordPoly:
    """``(k!/T^k) (w ш 0_k)``, which pairs with any signature on ``[0, T]``
    to the same value as ``w`` itself."""
    return zero_pad_shuffle(w, k).scale(Fraction(factorial(k)) / Fraction(T) ** k)


def dual_bracket(p: WordPoly, s: Mapping[Word, float]) -> float:
    """Pair a word polynomial with signature values ``s`` (any word -> value mapping)."""
    total = 0.0
    for w, c in p.items():
        try:
            val = s[w]
        except KeyError:
            raise IncompleteSignatureError(w) from None
        total += float(c) * val
    return total


def shuffle_mass(w: Word, v: Word) -> int:
    """Closed-form total coefficient of ``w ш v``."""
    return comb(len(w) + len(v), len(w))
