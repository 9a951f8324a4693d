import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ymloops.brauer import closed_trace
from ymloops.montecarlo import haar_sample, make_rng
from ymloops.unitary_rep import (
    HighestWeight,
    build_A,
    character_coefficients,
    character_of_matrix,
    expand_projector_in_diagrams,
    isotypic_projector,
    labels_box,
    projector_character,
    traceless_dimension,
    weyl_character,
    weyl_dim,
)
from ymloops.brauer import mixed_tensor_rep


def hw(p, m, N):
    return HighestWeight(tuple(p), tuple(m), N)


@st.composite
def weights(draw, max_N=4, max_size=3):
    N = draw(st.integers(1, max_N))
    labs = labels_box(N, max_size)
    return labs[draw(st.integers(0, len(labs) - 1))]


def test_known_dimensions():
    for N in range(2, 7):
        assert weyl_dim(hw((1,), (1,), N)) == N * N - 1
        assert weyl_dim(hw((2,), (), N)) == N * (N + 1) // 2
        assert weyl_dim(hw((1, 1), (), N)) == N * (N - 1) // 2
        assert weyl_dim(HighestWeight.trivial(N)) == 1


def test_admissibility():
    with pytest.raises(ValueError):
        hw((1, 1), (1,), 2)
    assert hw((2, 1), (1,), 3).signature == (2, 1, -1)
    assert HighestWeight.from_signature((2, 0, -1)) == hw((2,), (1,), 3)


@pytest.mark.parametrize("N", [2, 3])
def test_contraction_spectrum_11(N):
    ev = np.linalg.eigvalsh(build_A(1, 1, N).entries)
    assert np.sum(np.abs(ev) < 1e-9) == N * N - 1
    assert np.sum(np.abs(ev - N) < 1e-9) == 1
    assert traceless_dimension(1, 1, N) == N * N - 1


@given(weights(), st.integers(0, 10**6))
def test_character_methods_agree(w, seed):
    U = haar_sample(w.N, make_rng(seed))
    z = np.linalg.eigvals(U)
    a = weyl_character(w, z, method="bialternant")
    b = weyl_character(w, z, method="jacobi-trudi")
    assert abs(a - b) < 1e-9 * max(1, abs(a))


@given(weights(), st.integers(0, 10**6))
def test_character_symmetries(w, seed):
    rng = make_rng(seed)
    U = haar_sample(w.N, rng)
    c = character_of_matrix(w, U)
    assert abs(character_of_matrix(w.dual(), U) - np.conj(c)) < 1e-9
    assert abs(character_of_matrix(w, U.conj().T) - np.conj(c)) < 1e-9
    th = rng.uniform(0, 2 * np.pi)
    assert abs(character_of_matrix(w, np.exp(1j * th) * U) - np.exp(1j * th * (w.n - w.m)) * c) < 1e-9


@given(weights())
def test_character_at_identity(w):
    assert abs(character_of_matrix(w, np.eye(w.N)) - weyl_dim(w)) < 1e-9


@pytest.mark.parametrize("N", [2, 3, 4])
def test_tensor_product_rules(N):
    U = haar_sample(N, make_rng(N))
    f = character_of_matrix(hw((1,), (), N), U)
    assert abs(f * f - character_of_matrix(hw((2,), (), N), U) - character_of_matrix(hw((1, 1), (), N), U)) < 1e-10
    assert abs(f * np.conj(f) - character_of_matrix(hw((1,), (1,), N), U) - 1) < 1e-10


@pytest.mark.parametrize("sig", [(1, 0), (1, -1), (2, 0), (2, -1), (1, 0, -1), (1, 1, 0), (2, 0, -1)])
def test_projector_is_equivariant_idempotent(sig):
    w = HighestWeight.from_signature(sig)
    P = isotypic_projector(w).entries
    R = mixed_tensor_rep(haar_sample(w.N, make_rng(3)), w.n, w.m)
    assert np.allclose(P @ P, P, atol=1e-10)
    assert np.allclose(P @ R, R @ P, atol=1e-10)


@pytest.mark.parametrize("sig", [(1, -1), (2, -1), (1, 0, -1), (2, 0, -1), (1, 1, -1)])
def test_product_and_lstsq_expansions_agree(sig):
    w = HighestWeight.from_signature(sig)
    a = expand_projector_in_diagrams(w, "product")
    b = expand_projector_in_diagrams(w, "lstsq")
    from ymloops.unitary_rep import _dense_from_map

    assert np.allclose(_dense_from_map(a, w.n, w.m, w.N), _dense_from_map(b, w.n, w.m, w.N), atol=1e-9)


@given(weights(max_N=3), st.integers(0, 10**6))
def test_diagram_character_matches_weyl(w, seed):
    U = haar_sample(w.N, make_rng(seed))
    mats = [U] * w.n + [U.conj()] * w.m
    val = sum(float(c) * closed_trace(d, mats) for d, c in character_coefficients(w).items())
    assert abs(val - character_of_matrix(w, U)) < 1e-9
    assert abs(projector_character(w, U) - val) < 1e-9


def test_labels_box_counts():
    # U(1): charges -s..s
    assert len(labels_box(1, 3)) == 7
    assert all(w.n + w.m <= 2 for w in labels_box(3, 2))


def test_eigenvalues_validated():
    w = hw((1,), (), 2)
    with pytest.raises(ValueError):
        weyl_character(w, [1.0])
    with pytest.raises(ValueError):
        weyl_character(w, [2.0, 1.0])
