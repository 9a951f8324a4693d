import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bessel_ratio
from suites import adj, fund, lattice_suite, spec
from ymloops.lattice import build_lattice, plaquette_loop, spanning_tree
from ymloops.montecarlo import (
    ReweightedAccumulator,
    haar_sample,
    lattice_family_estimates,
    make_rng,
    mc_lattice_expectation,
    mc_word_moment,
    metropolis_observables,
    word_product,
)
from ymloops.state_sum import ActionSpec, RefusalError, action_value, wilson_expectation_statesum


@given(st.integers(1, 4), st.integers(0, 10**6))
@settings(max_examples=20)
def test_haar_samples_are_unitary(N, seed):
    U = haar_sample(N, make_rng(seed), 16)
    I = np.broadcast_to(np.eye(N), U.shape)
    assert np.allclose(U @ np.conj(np.swapaxes(U, -1, -2)), I, atol=1e-12)


def test_haar_low_moments():
    # E Tr U = 0 and E |Tr U|^2 = 1 for N >= 1
    U = haar_sample(3, make_rng(1), 200_000)
    t = np.trace(U, axis1=-2, axis2=-1)
    assert abs(t.mean()) < 5 / np.sqrt(200_000)
    assert abs((np.abs(t) ** 2).mean() - 1) < 0.02


def test_streams_are_reproducible_and_distinct():
    a = haar_sample(2, make_rng(5, 0))
    assert np.array_equal(a, haar_sample(2, make_rng(5, 0)))
    assert not np.array_equal(a, haar_sample(2, make_rng(5, 1)))


def test_word_product_inverse():
    rng = make_rng(2)
    mats = {"x": haar_sample(2, rng, 4)}
    W = word_product([("x", 1), ("x", -1)], mats, 2, 4)
    assert np.allclose(W, np.eye(2))


@pytest.mark.parametrize("s,exact", [
    (spec(["x y X Y"], [adj(2)]), 1 / 3),
    (spec(["x", "X"], [fund(3), fund(3)]), 1.0),
])
def test_word_moment_estimator(s, exact):
    r = mc_word_moment(s, 100_000, seed=4)
    assert r.within(exact)
    assert 0 < r.stderr < 0.02


def test_accumulator_unit_weights_is_plain_mean():
    acc = ReweightedAccumulator(1, 1000, blocks=10)
    v = np.arange(1000, dtype=float)
    acc.add(0, np.ones(1000), [v])
    val, err = acc.estimate()
    assert abs(val[0] - v.mean()) < 1e-9
    assert acc.ess() == pytest.approx(1000)
    assert err[0] > 0


def test_u1_plaquette_reweighted():
    lat = build_lattice(2, (1, 1))
    r = mc_lattice_expectation(lat, [plaquette_loop(lat, 0)], ActionSpec("wilson", 1.0), 1, 200_000, seed=9)
    assert r.within(bessel_ratio(1.0))


def test_gauge_fixing_does_not_change_the_estimate():
    lat, fams = lattice_suite((1, 2))
    act = ActionSpec("wilson", 0.5)
    a = mc_lattice_expectation(lat, fams["rectangle"], act, 2, 200_000, seed=1)
    b = mc_lattice_expectation(lat, fams["rectangle"], act, 2, 200_000, seed=2, tree=spanning_tree(lat))
    assert abs(a.value - b.value) < 3 * np.hypot(a.stderr, b.stderr)


def test_metropolis_matches_state_sum():
    lat, fams = lattice_suite((1, 2))
    act = ActionSpec("heat", 0.5)
    fl = [fams["plaquette"], fams["rectangle"]]
    val, err = metropolis_observables(lat, fl, act, 2, chains=500, sweeps=60, seed=5, burn=30)
    for j, fam in enumerate(fl):
        ref = wilson_expectation_statesum(lat, fam, act, 2).value
        assert abs(val[j] - ref) < 3 * err[j]


def test_estimator_falls_back_for_peaked_weights():
    lat, fams = lattice_suite((1, 2))
    _, _, method = lattice_family_estimates(lat, [fams["plaquette"]], ActionSpec("heat", 0.5), 2, 5000, 1,
                                            chains=50, sweeps=5)
    assert method == "metropolis"
    _, _, method = lattice_family_estimates(lat, [fams["plaquette"]], ActionSpec("wilson", 0.3), 2, 5000, 1)
    assert method == "reweighted"


def test_heat_determinant_matches_series():
    U = haar_sample(3, make_rng(6), 200)
    act = ActionSpec("heat", 0.4)
    a = action_value(act, U, 3)
    b = action_value(act, U, 3, method="series")
    assert np.allclose(a, b, rtol=1e-10, atol=1e-12)


def test_ess_collapse_refuses():
    from ymloops.montecarlo import mc_lattice_observables

    lat = build_lattice(2, (2, 2))
    with pytest.raises(RefusalError):
        mc_lattice_observables(lat, [[]], ActionSpec("wilson", 40.0), 2, 2000, seed=0)
