from math import factorial

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ymloops.brauer import (
    WalledBrauerDiagram,
    algebra_product,
    closed_trace,
    compose,
    dense_rho,
    enumerate_walled,
    mixed_tensor_rep,
    trace_classes,
)
from ymloops.montecarlo import haar_sample, make_rng


@st.composite
def diagram_pairs(draw, max_k=3):
    n = draw(st.integers(0, max_k))
    m = draw(st.integers(0, max_k - n))
    k = n + m
    p1 = draw(st.permutations(range(k)))
    p2 = draw(st.permutations(range(k)))
    return WalledBrauerDiagram(n, m, p1), WalledBrauerDiagram(n, m, p2)


@pytest.mark.parametrize("n,m", [(0, 0), (1, 0), (1, 1), (2, 1), (2, 2), (3, 1)])
def test_enumeration_size(n, m):
    ds = enumerate_walled(n, m)
    assert len(set(ds)) == factorial(n + m)
    for d in ds:
        d.check_wall()


@given(diagram_pairs(), st.integers(1, 3))
def test_composition_is_homomorphism(pair, N):
    d1, d2 = pair
    pr = compose(d1, d2)
    lhs = dense_rho(d1, N) @ dense_rho(d2, N)
    assert np.array_equal(lhs, N**pr.loops * dense_rho(pr.diagram, N))


@given(diagram_pairs(), st.integers(1, 3))
def test_trace_counts_classes(pair, N):
    d = pair[0]
    assert np.trace(dense_rho(d, N)) == N ** trace_classes(d)


@given(diagram_pairs(), st.integers(1, 3), st.integers(0, 10**6))
def test_closed_trace_matches_dense(pair, N, seed):
    d = pair[0]
    rng = np.random.default_rng(seed)
    mats = [rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N)) for _ in range(d.size)]
    K = np.ones((1, 1))
    for A in mats:
        K = np.kron(K, A)
    assert abs(closed_trace(d, mats) - np.trace(dense_rho(d, N) @ K)) < 1e-9 * (1 + abs(np.trace(dense_rho(d, N) @ K)))


@pytest.mark.parametrize("n,m,N", [(1, 1, 2), (2, 1, 2), (1, 2, 3), (2, 2, 2)])
def test_diagrams_commute_with_mixed_action(n, m, N):
    U = haar_sample(N, make_rng(5))
    R = mixed_tensor_rep(U, n, m)
    for d in enumerate_walled(n, m):
        D = dense_rho(d, N)
        assert np.allclose(D @ R, R @ D, atol=1e-12)


def test_mixed_rep_is_multiplicative():
    rng = make_rng(9)
    U, V = haar_sample(3, rng), haar_sample(3, rng)
    assert np.allclose(mixed_tensor_rep(U @ V, 1, 2), mixed_tensor_rep(U, 1, 2) @ mixed_tensor_rep(V, 1, 2))


@pytest.mark.parametrize("N", [1, 2, 5])
def test_contraction_squares_to_N(N):
    e = WalledBrauerDiagram.contraction(2, 1, 1, 0)
    prod = algebra_product({e: 1}, {e: 1}, N)
    assert prod == {e: N}


def test_identity_is_unit():
    one = WalledBrauerDiagram.identity(2, 1)
    for d in enumerate_walled(2, 1):
        pr = compose(one, d)
        assert pr.diagram == d and pr.loops == 0


def test_bad_permutation():
    with pytest.raises(ValueError):
        WalledBrauerDiagram(1, 1, (0, 0))
