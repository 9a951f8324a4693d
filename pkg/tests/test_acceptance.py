"""Acceptance criteria 1-8.  Each test prints one PASS/FAIL line and checks its runtime budget.

Run alone with ``pytest tests/test_acceptance.py -s``.
"""
import itertools
import time

import numpy as np
import pytest

import conftest
from oracles import bessel_ratio, gram_exact, penrose_ok, pinv_exact
from suites import fund, lattice_suite, rect, spec, word_suite
from ymloops import master_loop as ml
from ymloops.algebra_core import Partition
from ymloops.channel import channel_coefficient, check_locality, defect_ratio
from ymloops.lattice import LoopWord, build_lattice, plaquette_loop, spanning_tree
from ymloops.montecarlo import haar_sample, lattice_family_estimates, make_rng, mc_word_moment
from ymloops.state_sum import (
    ActionSpec,
    gauge_fixed_problem,
    topological_coeff,
    wilson_expectation_statesum,
)
from ymloops.surface import build_glued_surface, dbm_expansion, epe_ratio, surface_expansion, trace_only_check
from ymloops.unitary_rep import (
    character_operator,
    isotypic_projector,
    labels_box,
    multiplicity,
    projector_character,
    weyl_character,
    weyl_dim,
)
from ymloops.weingarten import SigmaTable, _Layout, character_word_integral, tau_configurations, wg


def report(k, ok, elapsed, budget, detail=""):
    status = "PASS" if ok and elapsed <= budget else "FAIL"
    line = f"criterion {k}: {status}  ({elapsed:.1f}s of {budget}s) {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return status == "PASS"


def _cycle_type(p):
    seen, out = set(), []
    for i in range(len(p)):
        if i in seen:
            continue
        c = 0
        while i not in seen:
            seen.add(i)
            i = p[i]
            c += 1
        out.append(c)
    return Partition(tuple(sorted(out, reverse=True)))


def test_criterion_1_weingarten():
    t0 = time.time()
    bad = []
    for n in range(1, 5):
        for N in range(1, 6):
            perms, G = gram_exact(n, N)
            X = pinv_exact(G)
            assert penrose_ok(G, X)
            inv = {p: tuple(sorted(range(n), key=lambda i: p[i])) for p in perms}
            W = [[wg(_cycle_type(tuple(inv[s][t[i]] for i in range(n))), N) for t in perms] for s in perms]
            if W != X:
                bad.append((n, N, "pinv"))
            if n <= N:
                I = [[sum(G[i][k] * W[k][j] for k in range(len(perms))) for j in range(len(perms))]
                     for i in range(len(perms))]
                if any(I[i][j] != (1 if i == j else 0) for i in range(len(perms)) for j in range(len(perms))):
                    bad.append((n, N, "gram"))
    ok = not bad
    assert report(1, ok, time.time() - t0, 10, f"mismatches={bad}")


def test_criterion_2_characters():
    t0 = time.time()
    rng = make_rng(2024)
    worst, bad_dims, count = 0.0, [], 0
    for N in (2, 3, 4):
        for w in labels_box(N, 3):
            d = weyl_dim(w)
            if w.n + w.m:
                tr = np.trace(character_operator(w)).real
                tr_full = isotypic_projector(w).trace.real
                if not (isinstance(d, int) and abs(tr - d) < 1e-9 and abs(tr_full - d * multiplicity(w)) < 1e-9):
                    bad_dims.append((w.signature, d, tr))
            for _ in range(100):
                U = haar_sample(N, rng)
                z = np.linalg.eigvals(U)
                a = projector_character(w, U)
                b = weyl_character(w, z, method="bialternant")
                worst = max(worst, abs(a - b))
                count += 1
    ok = worst < 1e-9 and not bad_dims
    assert report(2, ok, time.time() - t0, 60, f"max|diff|={worst:.2e} over {count} evaluations, bad dims={bad_dims}")


def test_criterion_3_word_integrals():
    t0 = time.time()
    fails = []
    for k, (name, s, known) in enumerate(word_suite()):
        exact = character_word_integral(s)
        _, surf = surface_expansion(s)
        mc = mc_word_moment(s, 1_000_000, seed=1000 + k)
        if surf != exact:
            fails.append((name, "surface", surf, exact))
        if known is not None and exact != known:
            fails.append((name, "known", exact, known))
        if not mc.within(float(exact)):
            fails.append((name, "mc", mc.value, mc.stderr, exact))
    ok = not fails
    assert report(3, ok, time.time() - t0, 300, f"failures={fails}")


def test_criterion_4_single_plaquette():
    t0 = time.time()
    lat = build_lattice(2, (1, 1))
    L = [plaquette_loop(lat, 0)]
    errs = []
    for beta in (0.5, 1.0, 2.0):
        r = wilson_expectation_statesum(lat, L, ActionSpec("wilson", beta), 1, truncation=20)
        errs.append(abs(r.value - bessel_ratio(beta)))
    ok = max(errs) < 1e-6
    assert report(4, ok, time.time() - t0, 5, f"errors={['%.1e' % e for e in errs]}")


def test_criterion_5_engine_agreement():
    t0 = time.time()
    fails, n_cmp = [], 0
    actions = [ActionSpec("wilson", 0.3), ActionSpec("wilson", 0.5), ActionSpec("heat", 0.5), ActionSpec("heat", 1.0)]
    for ext in ((1, 1), (1, 2), (2, 2)):
        lat, fams = lattice_suite(ext)
        tree = spanning_tree(lat)
        fams = {k: v for k, v in fams.items() if v}
        for N in (1, 2):
            for ai, act in enumerate(actions):
                seed = 1000 * len(lat.plaquettes) + 10 * N + ai
                mc_val, mc_err, _ = lattice_family_estimates(lat, list(fams.values()), act, N, 200_000, seed, tree=tree)
                for j, (name, fam) in enumerate(fams.items()):
                    ss = wilson_expectation_statesum(lat, fam, act, N, tree=tree)
                    sf = defect_ratio(lat, fam, act, N, tree=tree)
                    vals = {"statesum": (ss.value, ss.shell), "spinfoam": (sf.value, sf.shell)}
                    if act.kind == "wilson":
                        v, sh, _, _ = epe_ratio(lat, fam, act.coupling, N, 6, tree=tree, max_n=8)
                        vals["epe"] = (v, sh)
                    for (a, (va, sa)), (b, (vb, sb)) in itertools.combinations(vals.items(), 2):
                        n_cmp += 1
                        if abs(va - vb) > 1e-6 + sa + sb:
                            fails.append((ext, N, act, name, a, b, va, vb))
                    for a, (va, sa) in vals.items():
                        n_cmp += 1
                        if abs(va - mc_val[j]) > 3 * mc_err[j] + sa:
                            fails.append((ext, N, act, name, a, "mc", va, mc_val[j], mc_err[j]))
    ok = not fails
    assert report(5, ok, time.time() - t0, 900, f"{n_cmp} comparisons, failures={fails}")


def test_criterion_6_channel_reconstruction():
    t0 = time.time()
    worst, n, local = 0.0, 0, 0
    for ext in ((1, 1), (1, 2)):
        lat, fams = lattice_suite(ext)
        for N in (1, 2):
            labs = labels_box(N, 3)
            for fam in fams.values():
                prob = gauge_fixed_problem(lat, fam)
                for combo in itertools.product(labs, repeat=len(lat.plaquettes)):
                    alpha = dict(enumerate(combo))
                    a = channel_coefficient(lat, fam, alpha, N, prob=prob)
                    b = complex(topological_coeff(lat, fam, alpha, N, prob=prob))
                    worst = max(worst, abs(a - b))
                    n += 1
                    if fam:
                        check_locality(prob, alpha, N)
                        local += 1
    ok = worst < 1e-9
    assert report(6, ok, time.time() - t0, 300, f"max|diff|={worst:.2e} over {n} labelings, {local} locality checks")


def _ml_families(lat):
    L0, L1 = plaquette_loop(lat, 0), plaquette_loop(lat, 1)
    return [[L0], [L0, L0], [LoopWord(L0.letters * 2)], [L0, L1.inverse()], [rect(lat)], [rect(lat), L0]]


def test_criterion_7_master_loop():
    t0 = time.time()
    magic = max(max(ml.magic_residuals(N)) for N in range(1, 7))
    lat = build_lattice(2, (2, 2))
    rng = make_rng(77)
    point = 0.0
    for N in (2, 3):
        for fam in _ml_families(lat):
            edges = sorted({a for L in fam for a, _ in L.letters})
            for _ in range(50):
                U = {e: haar_sample(N, rng) for e in range(len(lat.edges))}
                for e in edges:
                    point = max(point, ml.loop_laplacian_pointwise(fam, e, U, N)[2])
    coef, n_eq = 0.0, 0
    for ext in ((1, 1), (1, 2)):
        lat2, fams = lattice_suite(ext)
        for N in (1, 2):
            labs = labels_box(N, 2)
            for fam in fams.values():
                if not fam:
                    continue
                edges = sorted({a for L in fam for a, _ in L.letters})
                for combo in itertools.product(labs, repeat=len(lat2.plaquettes)):
                    alpha = dict(enumerate(combo))
                    for e in edges:
                        coef = max(coef, abs(ml.master_equation_residual(lat2, fam, alpha, e, N).residual))
                        n_eq += 1
    wil = []
    for ext, fam_of in (((1, 1), lambda lt: [plaquette_loop(lt, 0)]), ((1, 2), lambda lt: [rect(lt)])):
        lt = build_lattice(2, ext)
        for beta in (0.3, 0.5):
            r = ml.wilson_master_residual(lt, fam_of(lt), beta, 2, samples=1_000_000, seed=7)
            wil.append((ext, beta, r.residual, r.stderr, r.within()))
    ok = magic < 1e-12 and point < 1e-10 and coef < 1e-8 and all(w[-1] for w in wil)
    detail = (f"magic={magic:.1e} pointwise={point:.1e} coefficient={coef:.1e} ({n_eq} eqs) "
              f"wilson={[(w[0], w[1], '%.1e+-%.1e' % (w[2], w[3])) for w in wil]}")
    assert report(7, ok, time.time() - t0, 600, detail)


def test_criterion_8_surface_bookkeeping():
    t0 = time.time()
    n_surf = n_map = n_trace = 0
    bad = []
    for name, s, _ in word_suite():
        if not s.balanced():
            continue
        lay = _Layout(s, "per-letter")
        sig = SigmaTable(s, lay)
        for _, _, taus in tau_configurations(s, lay):
            for perms, _, _ in sig.iterate():
                surf = build_glued_surface(s, taus, perms)
                cap = surf.cap()
                if surf.chi != surf.V - surf.E + surf.F or cap.chi != surf.chi + surf.b:
                    bad.append((name, "surface"))
                n_surf += 1
    trace_only = [["x", "x", "X", "X"], ["x y X Y"], ["x y", "Y X"], ["x x", "X", "X"], ["x y X Y", "y x Y X"]]
    for ws in trace_only:
        for N in (1, 2, 3):
            s = spec(ws, [fund(N)] * len(ws))
            n_trace += trace_only_check(s)
            maps, _ = dbm_expansion(s.words, N)
            lay = _Layout(s, "per-letter")
            _, _, taus = next(iter(tau_configurations(s, lay)))
            for (perms, _, _), m in zip(SigmaTable(s, lay).iterate(), maps):
                capped = build_glued_surface(s, taus, perms).cap()
                if (m.E != 2 * sum(m.n) or m.F != m.k + sum(len(x) for x in m.mu) or m.chi != m.V - m.E + m.F
                        or m.raw_weight != m.renormalized_weight or capped.chi != m.chi):
                    bad.append((ws, N, "map"))
                n_map += 1
    ok = not bad
    assert report(8, ok, time.time() - t0, 120,
                  f"{n_surf} surfaces, {n_map} maps, {n_trace} trace-only pairs, failures={bad[:5]}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
