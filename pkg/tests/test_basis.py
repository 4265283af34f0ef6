import itertools
import random
from fractions import Fraction
from math import comb

import pytest
from hypothesis import given, settings, strategies as st

from sigbasis.basis import (
    apply_completion, bareiss_rank, certify_block, certify_dense, completion_matrix,
    construct_family, enumerate_all_bases, enumerate_bases, is_basis_of_words,
    necessary_filter, nullspace, random_pad, relation_kernel,
)
from sigbasis.errors import InvalidInputError
from sigbasis.freealg import WordPoly
from sigbasis.words import (
    Word, WordSet, minimal_basis_length, prefix_words, pure, suffix_words, words_of_length,
    words_up_to,
)


def W(s, d=1):
    return Word.parse(s, d)


def WS(strs, d=1, N=None):
    ws = [W(s, d) for s in strs]
    return WordSet(ws, d, max(len(w) for w in ws) if N is None else N)


COUNTEREXAMPLE_ROWS = ["101", "110", "0101", "0110", "1001", "1010"]
COUNTEREXAMPLE_MATRIX = [
    (0, 1, 0, 2, 1, 0),
    (0, 0, 1, 0, 1, 2),
    (0, 1, 0, 0, 0, 0),
    (0, 0, 1, 0, 0, 0),
    (0, 0, 0, 1, 0, 0),
    (0, 0, 0, 0, 1, 0),
]


def test_counterexample_matrix():
    cm = completion_matrix([W(s) for s in COUNTEREXAMPLE_ROWS], 4, gamma=W("11"))
    assert [str(c) for c in cm.cols] == ["0011", "0101", "0110", "1001", "1010", "1100"]
    assert [list(r) for r in cm.entries] == [list(r) for r in COUNTEREXAMPLE_MATRIX]
    assert cm.rank() == 5


def test_counterexample_set_fails_in_context():
    # class 11 replaced by the counterexample block, every other class from the prefix basis
    base = [w for w in prefix_words(4, 1).words if pure(w) != W("11")]
    B = WordSet(base + [W(s) for s in COUNTEREXAMPLE_ROWS], 1, 4)
    cert = is_basis_of_words(B, 4)
    assert cert.verdict == "not_basis"
    blk = cert.block("11")
    assert (blk.cardinality, blk.required, blk.rank) == (6, 6, 5)
    assert necessary_filter(B, 4).passed
    assert apply_completion(cert.witness, 4, 1) == WordPoly.zero(1)


def test_completion_matrix_trivial_cases():
    for N, d in [(2, 1), (2, 2), (3, 1)]:
        cm = completion_matrix(words_of_length(N, d), N)
        size = (d + 1) ** N
        assert cm.entries == tuple(tuple(int(i == j) for j in range(size)) for i in range(size))
    cm = completion_matrix(WordSet([Word.empty(1)], 1, 2), 2)
    assert cm.entries == ((1, 0, 0, 0),)
    with pytest.raises(InvalidInputError):
        completion_matrix([W("111")], 2)


def test_basis_examples():
    cert = is_basis_of_words(suffix_words(3, 1), 3)
    assert (cert.verdict, cert.rank) == ("basis", 8)
    assert certify_block([W("1"), W("01"), W("010")], 3, W("1")).ok
    fam = construct_family("prefix_padded", 3, 2, pad={})
    assert is_basis_of_words(fam, 3).rank == 27


def test_construct_family_examples():
    assert [str(w) for w in construct_family("suffix_padded", 2, 1, pad={})] == ["e", "1", "10", "11"]
    fam = construct_family("prefix_padded", 2, 1, pad={W("e"): 0, W("1"): 1, W("01"): 0, W("11"): 0})
    assert sorted(map(str, fam)) == sorted(["e", "10", "01", "11"])
    with pytest.raises(InvalidInputError):
        construct_family("prefix_padded", 2, 1, pad={W("11"): 1})
    with pytest.raises(InvalidInputError):
        construct_family("middle", 2, 1)


def test_necessary_filter_examples():
    assert necessary_filter(WS(COUNTEREXAMPLE_ROWS), 4, gamma=W("11")).passed
    assert not necessary_filter(WS(COUNTEREXAMPLE_ROWS), 4).passed
    for N in range(1, 4):
        res = necessary_filter(words_up_to(N, 1), N)
        assert not res.passed and res.reason
    for N in range(0, 6):
        for d in (1, 2):
            if d == 2 and N > 4:
                continue
            assert necessary_filter(suffix_words(N, d), N).passed


def test_enumerate_bases_examples():
    found = {frozenset(map(str, b)) for b in enumerate_bases(2, 1, W("1"))}
    assert found == {frozenset({"1", "01"}), frozenset({"1", "10"}), frozenset({"01", "10"})}
    found = {frozenset(map(str, b)) for b in enumerate_bases(2, 1, Word.empty(1))}
    assert found == {frozenset({"e"}), frozenset({"0"}), frozenset({"00"})}


def test_one_word_per_length_gives_basis_for_single_letter_class():
    for N in (2, 3, 4):
        found = {frozenset(b.words) for b in enumerate_bases(N, 1, W("1"))}
        by_len = [[w for w in words_up_to(N, 1).words if pure(w) == W("1") and len(w) == k]
                  for k in range(1, N + 1)]
        expected = {frozenset(choice) for choice in itertools.product(*by_len)}
        # sufficient, not necessary: {01, 10} is also a basis at N = 2
        assert expected <= found
        assert all(certify_block(sorted(b), N, W("1")).ok for b in expected)


def test_enumeration_guard():
    with pytest.raises(InvalidInputError):
        list(enumerate_bases(6, 1, W("11")))


def test_minimal_length_small():
    for N in (2, 3):
        lengths = [b.length for b in enumerate_all_bases(N, 1)]
        assert min(lengths) == minimal_basis_length(N, 1)
        assert all(len(b) == 2 ** N for b in enumerate_all_bases(N, 1))


def test_bareiss_matches_fraction_rank():
    rng = random.Random(5)
    for _ in range(50):
        r, c = rng.randint(1, 6), rng.randint(1, 6)
        rows = [[rng.randint(-2, 2) for _ in range(c)] for _ in range(r)]
        assert bareiss_rank(rows) == c - len(nullspace(rows))


def test_relation_kernel_dimension():
    for N, d in [(1, 1), (2, 1), (3, 1), (2, 2)]:
        rels = relation_kernel(words_up_to(N, d).ordered(), N)
        assert len(rels) == len(words_up_to(N, d)) - (d + 1) ** N
    assert relation_kernel(suffix_words(3, 1).ordered(), 3) == []


def _random_subset(rng, N, d):
    words = words_up_to(N, d).ordered()
    return WordSet(rng.sample(words, rng.randint(1, len(words))), d, N)


def test_decomposition_matches_dense():
    rng = random.Random(11)
    checked = 0
    while checked < 50:
        B = _random_subset(rng, 3, 1)
        if len(B) != 8:
            # only equal-size candidates can be bases; keep a share of other sizes too
            if rng.random() < 0.7:
                continue
        assert is_basis_of_words(B, 3).is_basis == certify_dense(B, 3)
        checked += 1


def test_random_prefix_bases_agree_with_dense():
    rng = random.Random(3)
    for _ in range(20):
        kind = rng.choice(["prefix_padded", "suffix_padded"])
        B = construct_family(kind, 3, 1, pad=random_pad(kind, 3, 1, rng))
        assert certify_dense(B, 3)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_witness_soundness(seed):
    rng = random.Random(seed)
    B = _random_subset(rng, 3, 1)
    cert = is_basis_of_words(B, 3)
    for blk in cert.blocks:
        if blk.witness:
            assert apply_completion(blk.witness, 3, 1) == WordPoly.zero(1)
            assert any(c != 0 for c in blk.witness.values())
    if cert.is_basis:
        assert len(B) == 8


def test_certificate_json():
    doc = is_basis_of_words(WS(COUNTEREXAMPLE_ROWS, N=4), 4).to_json()
    assert doc["verdict"] == "not_basis"
    assert doc["witness"] == {"101": "-1", "0101": "1", "1001": "2", "1010": "1"}
