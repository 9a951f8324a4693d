"""Local channel model on the dual incidence graph.

After gauge fixing, every plaquette character is expanded in walled Brauer
diagrams (one diagram before each letter).  A diagram tuple identifies the
row/column indices of the Haar entries of the plaquette in pairs.  A pair
whose two ends sit on the same non-tree edge is a local pair at that
incidence.  A pair joining two different edges is split as
delta(a, b) = sum_c delta(a, c) delta(b, c), and the colour c is recorded
at both incidences.  With colours included every elementary tensor
factorizes over incidences, so the boundary channel of an incidence is the
ordered list of leg charges, the local pairs and the coloured ends.

Loops enter as extra insertions with the fundamental label (their diagrams
are identities), so their legs only reach the edges they traverse.
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .algebra_core import all_permutations
from .lattice import Lattice, LoopWord, gauge_fix_word, spanning_tree
from .state_sum import (
    ActionSpec,
    RefusalError,
    balanced_alphas,
    default_truncation,
    gauge_fixed_problem,
    kappa,
    truncated_labels,
)
from .unitary_rep import HighestWeight, character_of_matrix, weyl_dim
from .weingarten import WordSpec, _Layout, tau_configurations, wg_perm

PROBE_SEED = 20240611
PROBE_TOL = 1e-9


@dataclass(frozen=True)
class Channel:
    """Boundary channel at one incidence.

    charges: +1 (entry of U_e) or -1 (entry of conj U_e) per leg, legs in
    word order; pairs: local index pairs ((leg, end), (leg, end)) with
    end 0 = Haar row, 1 = Haar column; colours: ((leg, end), colour).
    """

    charges: tuple
    pairs: tuple
    colours: tuple

    def serialize(self) -> str:
        legs = "".join("V" if q > 0 else "W" for q in self.charges)
        pr = ",".join(f"{a[0]}{'rc'[a[1]]}-{b[0]}{'rc'[b[1]]}" for a, b in self.pairs)
        co = ",".join(f"{a[0]}{'rc'[a[1]]}={c}" for a, c in self.colours)
        return f"{legs}|{pr}|{co}"


@dataclass
class LocalResolution:
    insertion: tuple  # (gauge-fixed word, label key)
    rid: int
    coefficient: Fraction
    edges: tuple  # incidences in sorted edge order
    channels: tuple  # Channel per incidence
    members: int = 1

    def tuple_key(self):
        return tuple(zip(self.edges, self.channels))


# ------------------------------------------------------------- resolutions


def _leg_table(spec: WordSpec, layout: _Layout):
    """node -> (edge, leg index at that edge, end) and per-edge charges."""
    where = {}
    charges = {}
    for o in spec.occurrences:
        e = o.letter
        k = len(charges.setdefault(e, []))
        charges[e].append(o.charge)
        R, C = layout.haar_index(o)
        where[R] = (e, k, 0)
        where[C] = (e, k, 1)
    return where, {e: tuple(v) for e, v in charges.items()}


def _raw_resolutions(word, label: HighestWeight):
    """Yield (coefficient, {edge: Channel}) over diagram tuples and colourings."""
    N = label.N
    spec = WordSpec([word], [label])
    layout = _Layout(spec, "per-letter")
    where, charges = _leg_table(spec, layout)
    edges = sorted(charges)
    for coef, pairs, _ in tau_configurations(spec, layout):
        local = {e: [] for e in edges}
        cross = []
        for a, b in pairs:
            ea, eb = where[a], where[b]
            if ea[0] == eb[0]:
                local[ea[0]].append(tuple(sorted((ea[1:], eb[1:]))))
            else:
                cross.append((ea, eb))
        for cols in itertools.product(range(N), repeat=len(cross)):
            colour = {e: [] for e in edges}
            for (ea, eb), c in zip(cross, cols):
                colour[ea[0]].append((ea[1:], c))
                colour[eb[0]].append((eb[1:], c))
            chans = {
                e: Channel(charges[e], tuple(sorted(local[e])), tuple(sorted(colour[e])))
                for e in edges
            }
            yield coef, chans


def channel_value(ch: Channel, U: np.ndarray) -> np.ndarray:
    """Evaluate the incidence tensor against a batch of unitaries U[S, N, N]."""
    S, N, _ = U.shape
    parent = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            x = parent[x]
        return x

    for a, b in ch.pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    ends = [(k, s) for k in range(len(ch.charges)) for s in (0, 1)]
    roots = sorted({find(x) for x in ends})
    if len(roots) > 50:
        raise OverflowError("too many index classes for einsum")
    sym = {r: chr(ord("b") + i) if i < 24 else chr(ord("A") + i - 24) for i, r in enumerate(roots)}
    ops, subs = [], []
    Ubar = np.conj(U)
    for k, q in enumerate(ch.charges):
        ops.append(U if q > 0 else Ubar)
        subs.append("a" + sym[find((k, 0))] + sym[find((k, 1))])
    fixed = {}
    for x, c in ch.colours:
        r = find(x)
        if fixed.setdefault(r, c) != c:
            return np.zeros(S, dtype=complex)
    for r, c in fixed.items():
        v = np.zeros(N)
        v[c] = 1.0
        ops.append(v)
        subs.append(sym[r])
    return np.einsum(",".join(subs) + "->a", *ops, optimize=True)


def _probes(edges, N, count=2):
    from .montecarlo import haar_sample, make_rng

    rng = make_rng(PROBE_SEED, N)
    return {e: haar_sample(N, rng, count) for e in edges}


def phi_value(chans: dict, mats: dict) -> np.ndarray:
    out = None
    for e, ch in chans.items():
        v = channel_value(ch, mats[e])
        out = v if out is None else out * v
    return out


_RES_LOCK = threading.Lock()


@lru_cache(maxsize=None)
def _grouped(word: tuple, key: tuple, N: int):
    label = HighestWeight.from_signature(key)
    groups = {}
    hashes = {}
    probes = None
    for coef, chans in _raw_resolutions(list(word), label):
        if probes is None:
            probes = _probes(sorted(chans), N)
        tkey = tuple(sorted(chans.items()))
        # equal channel tuples must give equal elementary tensors
        h = phi_value(chans, probes)
        if tkey in hashes:
            if np.max(np.abs(hashes[tkey] - h)) > PROBE_TOL:
                raise AssertionError("equal channel tuples with different tensors")
            groups[tkey][0] += coef
            groups[tkey][1] += 1
        else:
            hashes[tkey] = h
            groups[tkey] = [coef, 1]
    out = []
    for tkey, (c, n) in groups.items():
        if c == 0:
            continue
        edges = tuple(e for e, _ in tkey)
        chans = tuple(ch for _, ch in tkey)
        out.append(LocalResolution((word, key), len(out), c, edges, chans, n))
    return tuple(out)


def local_resolutions(word, label: HighestWeight, verify: bool = True, samples: int = 20, tol: float = 1e-8):
    """Grouped local resolutions of chi_label(U_word) for a gauge-fixed word."""
    word = tuple(tuple(x) for x in word)
    if not word:
        raise ValueError("empty gauge-fixed word")
    with _RES_LOCK:
        res = _grouped(word, label.signature, label.N)
    if verify:
        verify_reconstruction(word, label, res, samples, tol)
    return list(res)


def resolutions_for_plaquette(lat: Lattice, p: int, label: HighestWeight, tree=None, verify=True):
    tree = spanning_tree(lat) if tree is None else tree
    return local_resolutions(gauge_fix_word(LoopWord(tuple(lat.boundaries[p])), tree), label, verify)


def verify_reconstruction(word, label, res, samples=20, tol=1e-8, seed=7):
    """max |sum a Phi(U) - chi(U_word)| over random letters; raises above tol."""
    from .montecarlo import haar_sample, make_rng, word_product

    N = label.N
    rng = make_rng(seed, 1)
    letters = sorted({a for a, _ in word})
    mats = {a: haar_sample(N, rng, samples) for a in letters}
    W = word_product(word, mats, N, samples)
    target = np.array([character_of_matrix(label, W[s]) for s in range(samples)])
    got = np.zeros(samples, dtype=complex)
    for r in res:
        got += float(r.coefficient) * phi_value(dict(zip(r.edges, r.channels)), mats)
    err = float(np.max(np.abs(got - target)))
    if err > tol:
        raise AssertionError(f"reconstruction residual {err:.3e} exceeds {tol}")
    return err


def plaquette_amplitude(eta, resolutions) -> Fraction:
    """A_p(eta): coefficient sum over resolutions whose channel tuple is eta."""
    eta = tuple(eta)
    return sum((r.coefficient for r in resolutions if r.tuple_key() == eta), Fraction(0))


# ------------------------------------------------------------- edge kernels


@lru_cache(maxsize=None)
def _edge_kernel_cached(channels: tuple, N: int) -> Fraction:
    legs = []
    for j, ch in enumerate(channels):
        for k, q in enumerate(ch.charges):
            legs.append((j, k, q))
    plus = [(j, k) for j, k, q in legs if q > 0]
    minus = [(j, k) for j, k, q in legs if q < 0]
    if len(plus) != len(minus):
        return Fraction(0)
    fixed = {}
    local = []
    for j, ch in enumerate(channels):
        for a, b in ch.pairs:
            local.append(((j,) + a, (j,) + b))
        for a, c in ch.colours:
            fixed[(j,) + a] = c
    if N == 1:
        # a single index value: every delta holds and sum Wg over all
        # pairings equals the moment of |U_11|^{2p} = 1
        return Fraction(1)
    p = len(plus)
    nodes = [(j, k, s) for j, k, _ in legs for s in (0, 1)]
    total = Fraction(0)
    perms = all_permutations(p)
    for al in perms:
        for be in perms:
            parent = {x: x for x in nodes}

            def find(x):
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x

            def union(a, b):
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[ra] = rb

            for a, b in local:
                union(a, b)
            for t in range(p):
                union(plus[t] + (0,), minus[al(t)] + (0,))
                union(plus[t] + (1,), minus[be(t)] + (1,))
            col = {}
            ok = True
            for x, c in fixed.items():
                r = find(x)
                if col.setdefault(r, c) != c:
                    ok = False
                    break
            if not ok:
                continue
            free = len({find(x) for x in nodes}) - len(col)
            total += wg_perm(al.inverse() * be, N) * Fraction(N) ** free
    return total


def edge_kernel(channels, N: int) -> Fraction:
    """K_e for the channels of all incidences (plaquettes and loops) at e."""
    return _edge_kernel_cached(tuple(channels), N)


# ------------------------------------------------------- channel partition sums


@dataclass
class Insertion:
    word: tuple
    label: HighestWeight
    loop: bool
    resolutions: list


def _insertions(prob, alpha, N, loops_on, verify):
    ins = []
    for p, w in enumerate(prob.plaquette_words):
        lab = alpha[p]
        ins.append(Insertion(tuple(w), lab, False, None))
    if loops_on:
        fund = HighestWeight.fundamental(N)
        for w in prob.loop_words:
            ins.append(Insertion(tuple(w), fund, True, None))
    const = Fraction(1)
    kept = []
    for x in ins:
        if x.label.is_trivial():
            continue
        if not x.word:
            const *= weyl_dim(x.label)
            continue
        x.resolutions = local_resolutions(x.word, x.label, verify=verify)
        kept.append(x)
    return kept, const


@dataclass
class FactorTables:
    edges: list
    touching: dict  # edge -> insertion indices
    kernels: dict  # edge -> ndarray over the resolutions of touching insertions
    amplitudes: list  # per insertion coefficient vector


def factor_tables(prob, alpha, N, loops_on, verify=False):
    kept, const = _insertions(prob, alpha, N, loops_on, verify)
    edges = sorted({e for x in kept for r in x.resolutions for e in r.edges})
    touching = {e: [i for i, x in enumerate(kept) if any(a == e for a, _ in x.word)] for e in edges}
    kernels = {}
    for e in edges:
        idx = touching[e]
        # distinct channels per touching insertion
        chan_ids = []
        chan_lists = []
        for i in idx:
            ids, lst = [], {}
            for r in kept[i].resolutions:
                ch = r.channels[r.edges.index(e)]
                ids.append(lst.setdefault(ch, len(lst)))
            chan_ids.append(np.asarray(ids))
            chan_lists.append(list(lst))
        small = np.zeros([len(c) for c in chan_lists])
        for combo in itertools.product(*[range(len(c)) for c in chan_lists]):
            small[combo] = float(edge_kernel([chan_lists[k][j] for k, j in enumerate(combo)], N))
        kernels[e] = small[np.ix_(*chan_ids)]
    amps = [np.array([float(r.coefficient) for r in x.resolutions]) for x in kept]
    return FactorTables(edges, touching, kernels, amps), const, kept


def contract_tables(tabs: FactorTables) -> float:
    n = len(tabs.amplitudes)
    if n == 0:
        return 1.0
    sym = [chr(ord("a") + i) if i < 26 else chr(ord("A") + i - 26) for i in range(n)]
    ops, subs = [], []
    for i, a in enumerate(tabs.amplitudes):
        ops.append(a)
        subs.append(sym[i])
    for e in tabs.edges:
        ops.append(tabs.kernels[e])
        subs.append("".join(sym[i] for i in tabs.touching[e]))
    return float(np.einsum(",".join(subs) + "->", *ops, optimize="greedy"))


def channel_coefficient(lat: Lattice, loops, alpha: dict, N: int, tree=None, prob=None, verify=False) -> float:
    """sum over compatible channel fields of prod A_p prod K_e."""
    prob = gauge_fixed_problem(lat, loops, tree) if prob is None else prob
    tabs, const, _ = factor_tables(prob, alpha, N, bool(loops), verify)
    return float(const) * contract_tables(tabs)


def defect_support(prob) -> frozenset:
    return frozenset(a for w in prob.loop_words for a, _ in w)


def check_locality(prob, alpha, N):
    """Kernel tables off the defect support agree bit for bit with and without loops."""
    with_l, _, kl = factor_tables(prob, alpha, N, True)
    without, _, k0 = factor_tables(prob, alpha, N, False)
    D = defect_support(prob)
    for e in without.edges:
        if e in D:
            continue
        a, b = with_l.kernels.get(e), without.kernels[e]
        if a is None or a.shape != b.shape or not np.array_equal(a, b):
            raise AssertionError(f"edge kernel at e{e} changed off the defect support")
    return True


@dataclass
class DefectRatio:
    value: float
    numerator: float
    denominator: float
    shell: float
    n_alpha: int
    truncation: int


def defect_ratio(lat: Lattice, loops, action: ActionSpec, N: int, truncation: int | None = None,
                 tree=None, floor: float = 1e-14, check: bool = True) -> DefectRatio:
    """E[prod Tr U_loop] = Z^(L) / Z^(0) from the channel model."""
    trunc = default_truncation(N) if truncation is None else truncation
    if not loops:
        return DefectRatio(1.0, 1.0, 1.0, 0.0, 0, trunc)
    tree = spanning_tree(lat) if tree is None else tree
    prob = gauge_fixed_problem(lat, loops, tree)
    labs = truncated_labels(N, trunc, action, floor)
    P = len(lat.plaquettes)
    sums = {}
    for loops_on in (True, False):
        total = shell = 0.0
        n = 0
        for combo in balanced_alphas(prob, [labs] * P, with_loops=loops_on):
            alpha = {p: labs[i] for p, i in enumerate(combo)}
            k = kappa(alpha, action, N)
            if k == 0:
                continue
            W = channel_coefficient(lat, loops if loops_on else [], alpha, N, tree, prob)
            if loops_on and check:
                check_locality(prob, alpha, N)
            term = k * W
            total += term
            n += 1
            if max((w.n + w.m for w in alpha.values()), default=0) == trunc:
                shell += abs(term)
        sums[loops_on] = (total, shell, n)
    num, nsh, n1 = sums[True]
    den, dsh, n0 = sums[False]
    if abs(den) <= floor or dsh >= 0.5 * abs(den):
        raise RefusalError(f"background partition function not resolved: Z0={den:.3e}, shell={dsh:.3e}")
    val = num / den
    shell = nsh / abs(den) + abs(val) * dsh / abs(den)
    return DefectRatio(val, num, den, shell, n1 + n0, trunc)
