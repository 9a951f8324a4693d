from fractions import Fraction
from math import factorial

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ymloops.algebra_core import (
    Partition,
    Permutation,
    all_permutations,
    as_partition,
    cycle_type,
    partitions_of,
    sym_character,
    sym_dim,
)


def perms(max_n=7):
    return st.integers(1, max_n).flatmap(lambda n: st.permutations(range(n)).map(Permutation))


def hook_dim(lam):
    n = sum(lam)
    conj = [sum(1 for x in lam if x > j) for j in range(lam[0])] if lam else []
    hooks = 1
    for i, row in enumerate(lam):
        for j in range(row):
            hooks *= (row - j - 1) + (conj[j] - i - 1) + 1
    return factorial(n) // hooks


def test_partition_counts():
    assert [len(partitions_of(n)) for n in range(9)] == [1, 1, 2, 3, 5, 7, 11, 15, 22]


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition((1, 2))
    with pytest.raises(ValueError):
        Partition((2, 0))
    assert as_partition([1, 3, 2]) == Partition((3, 2, 1))


def test_max_length():
    assert partitions_of(4, 2) == [Partition((4,)), Partition((3, 1)), Partition((2, 2))]


@pytest.mark.parametrize("n", range(1, 7))
def test_class_sizes_sum_to_factorial(n):
    assert sum(mu.class_size() for mu in partitions_of(n)) == factorial(n)


def test_s3_character_table():
    # rows (3), (2,1), (1,1,1); columns (1,1,1), (2,1), (3)
    cols = [(1, 1, 1), (2, 1), (3,)]
    table = [[sym_character(lam, mu) for mu in cols] for lam in [(3,), (2, 1), (1, 1, 1)]]
    assert table == [[1, 1, 1], [2, 0, -1], [1, -1, 1]]


@pytest.mark.parametrize("n", range(1, 8))
def test_dims_match_hook_formula(n):
    for lam in partitions_of(n):
        assert sym_dim(lam) == hook_dim(lam.parts)


@pytest.mark.parametrize("n", range(1, 7))
def test_character_orthogonality(n):
    parts = partitions_of(n)
    for a in parts:
        for b in parts:
            s = sum(Fraction(mu.class_size() * sym_character(a, mu) * sym_character(b, mu), factorial(n)) for mu in parts)
            assert s == (1 if a == b else 0)


@given(perms(), st.data())
def test_group_laws(p, data):
    q = Permutation(data.draw(st.permutations(range(p.n))))
    e = Permutation.identity(p.n)
    assert p * p.inverse() == e == p.inverse() * p
    assert (p * q).sign() == p.sign() * q.sign()
    assert cycle_type(p * q) == cycle_type(q * p)
    assert cycle_type(p).size == p.n


@given(perms())
def test_from_cycles_roundtrip(p):
    assert Permutation.from_cycles(p.n, p.cycles()) == p


def test_all_permutations_count():
    assert len(set(all_permutations(4))) == 24


def test_character_size_mismatch():
    with pytest.raises(ValueError):
        sym_character((2,), (1, 1, 1))
