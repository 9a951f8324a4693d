"""Glued surfaces of the (tau, sigma) expansion, dual bipartite maps and the
edge-plaquette (strong coupling) expansion of Wilson loop expectations.

Cell model of the uncapped surface Sigma(tau, sigma):

* P faces: one polygon per (word i, slot u).  For each letter position r
  its boundary runs through four sides: the two halves of the Brauer port
  (top vertex, bottom vertex of tau_{i,r}) and the two halves of the letter
  side (row end, column end of the Haar entry).
* G faces: one band per strand of every tau_{i,r}, joining two Brauer
  port halves.
* H faces: one band per Kronecker pairing of sigma (alpha pairs rows,
  beta pairs columns), joining two letter-side halves.

Bands have two long sides left free.  The free sides close up into three
kinds of boundary cycles: index cycles (through the corners carrying the
summed indices), Brauer trace loops and Haar cycles of alpha^{-1} beta.
Capping glues one disk (C face) to every boundary cycle.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial, prod

from .algebra_core import Partition, all_permutations, cycle_type
from .weingarten import (
    SigmaTable,
    WordSpec,
    _Layout,
    _dims_factor,
    count_tau,
    tau_configurations,
    wg,
)


class _UF:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


@dataclass
class GluedSurface:
    """Faces are cyclic lists of side ids; gluing pairs sides orientation-reversingly."""

    faces: list  # (tag, label, [side ids])
    sides: dict  # side id -> None (sides are identified by their ids)
    gluing: dict  # side id -> side id (involution on glued sides)
    h: int = 0
    capped: bool = False
    boundary_kinds: list = field(default_factory=list)

    def free_sides(self):
        return [s for f in self.faces for s in f[2] if s not in self.gluing]

    def _vertex_classes(self):
        uf = _UF()
        # a corner is shared by consecutive sides of a face
        for _, _, ss in self.faces:
            for a, b in zip(ss, ss[1:] + ss[:1]):
                uf.union(("end", a), ("start", b))
        # orientation-reversing gluing: start of one side meets end of the other
        for a, b in self.gluing.items():
            uf.union(("start", a), ("end", b))
            uf.union(("end", a), ("start", b))
        return uf

    @property
    def V(self) -> int:
        uf = self._vertex_classes()
        return len({uf.find((k, s)) for s in self.sides for k in ("start", "end")})

    @property
    def E(self) -> int:
        n = len(self.sides)
        return n - len(self.gluing) // 2

    @property
    def F(self) -> int:
        return len(self.faces)

    @property
    def chi(self) -> int:
        return self.V - self.E + self.F

    def boundary_cycles(self) -> list:
        """Free sides grouped into boundary components."""
        free = set(self.free_sides())
        nxt = {}
        face_of = {}
        for _, _, ss in self.faces:
            for k, s in enumerate(ss):
                face_of[s] = (ss, k)
        # walking the boundary: after a free side, continue with the next
        # side of its face; if that side is glued, cross to the partner and
        # keep going around the partner's face
        for s in free:
            ss, k = face_of[s]
            t = ss[(k + 1) % len(ss)]
            guard = 0
            while t not in free:
                t = self.gluing[t]
                ss2, k2 = face_of[t]
                t = ss2[(k2 + 1) % len(ss2)]
                guard += 1
                if guard > 10 * len(self.sides):
                    raise AssertionError("inconsistent gluing")
            nxt[s] = t
        seen = set()
        cycles = []
        for s in sorted(free, key=repr):
            if s in seen:
                continue
            cyc = []
            while s not in seen:
                seen.add(s)
                cyc.append(s)
                s = nxt[s]
            cycles.append(cyc)
        return cycles

    @property
    def b(self) -> int:
        return len(self.boundary_cycles())

    def components(self) -> int:
        uf = _UF()
        for k, (_, _, ss) in enumerate(self.faces):
            uf.find(("f", k))
        owner = {s: k for k, (_, _, ss) in enumerate(self.faces) for s in ss}
        for a, b in self.gluing.items():
            uf.union(("f", owner[a]), ("f", owner[b]))
        return len({uf.find(("f", k)) for k in range(len(self.faces))})

    def check(self):
        for a, b in self.gluing.items():
            if self.gluing.get(b) != a or a == b:
                raise AssertionError("gluing is not a fixed-point-free involution")
        if self.capped and self.free_sides():
            raise AssertionError("capped surface has free sides")

    def cap(self) -> "GluedSurface":
        faces = list(self.faces)
        sides = dict(self.sides)
        gluing = dict(self.gluing)
        for c, cyc in enumerate(self.boundary_cycles()):
            new = []
            for s in reversed(cyc):
                t = ("cap", c, s)
                sides[t] = None
                gluing[t] = s
                gluing[s] = t
                new.append(t)
            faces.append(("C", c, new))
        out = GluedSurface(faces, sides, gluing, self.h, True, list(self.boundary_kinds))
        out.check()
        return out

    def uncap(self) -> "GluedSurface":
        caps = {s for tag, _, ss in self.faces if tag == "C" for s in ss}
        faces = [f for f in self.faces if f[0] != "C"]
        sides = {k: v for k, v in self.sides.items() if k not in caps}
        gluing = {a: b for a, b in self.gluing.items() if a not in caps and b not in caps}
        return GluedSurface(faces, sides, gluing, self.h, False, list(self.boundary_kinds))

    def signature(self):
        """Structural fingerprint (faces with tags and the gluing)."""
        return (
            tuple((t, l, tuple(ss)) for t, l, ss in self.faces),
            tuple(sorted(self.gluing.items(), key=repr)),
        )

    def face_counts(self) -> dict:
        return dict(Counter(t for t, _, _ in self.faces))


def build_glued_surface(spec: WordSpec, taus, sigma_perms) -> GluedSurface:
    """Surface for tau = ((i, pos, diagram), ...) and sigma = ((alpha_a, beta_a), ...)."""
    faces, sides, gluing = [], {}, {}
    h = 0
    # P faces
    for i, (w, lab) in enumerate(zip(spec.words, spec.labels)):
        r = lab.n + lab.m
        L = len(w)
        if L == 0:
            continue
        for u in range(r):
            ss = []
            for pos in range(L):
                for s in (("Kt", i, u, pos), ("Kb", i, u, pos), ("Lr", i, u, pos), ("Lc", i, u, pos)):
                    sides[s] = None
                    ss.append(s)
            if u >= lab.n:
                # contravariant slots carry the transposed matrices
                ss.reverse()
            faces.append(("P", (i, u), ss))
    # G faces: one band per strand
    for i, pos, d in taus:
        h += d.horizontal_count()
        for k, (v1, v2) in enumerate(d.pairs):
            p1 = ("Kt" if v1[0] == "t" else "Kb", i, v1[1], pos)
            p2 = ("Kt" if v2[0] == "t" else "Kb", i, v2[1], pos)
            p1, p2 = _order_ports(p1, p2, spec)
            band = [("G", i, pos, k, 0), ("G", i, pos, k, "node"), ("G", i, pos, k, 1), ("G", i, pos, k, "mid")]
            for s in band:
                sides[s] = None
            gluing[band[0]], gluing[p1] = p1, band[0]
            gluing[band[2]], gluing[p2] = p2, band[2]
            faces.append(("G", (i, pos, k), band))
    # H faces: one band per Kronecker pairing
    for a, (al, be) in zip(spec.letters, sigma_perms):
        plus, minus = spec.S_plus[a], spec.S_minus[a]
        for t in range(len(plus)):
            for kind, perm, half in (("alpha", al, "row"), ("beta", be, "col")):
                x, y = plus[t], minus[perm(t)]
                px = (_letter_half(x, half), x.word, x.slot, x.pos)
                py = (_letter_half(y, half), y.word, y.slot, y.pos)
                px, py = _order_ports(px, py, spec)
                band = [("H", a, kind, t, 0), ("H", a, kind, t, "node"), ("H", a, kind, t, 1), ("H", a, kind, t, "mid")]
                for s in band:
                    sides[s] = None
                gluing[band[0]], gluing[px] = px, band[0]
                gluing[band[2]], gluing[py] = py, band[2]
                faces.append(("H", (a, kind, t), band))
    surf = GluedSurface(faces, sides, gluing, h)
    surf.check()
    return surf


def _node_at_start(side, spec) -> bool:
    kind, i, u = side[0], side[1], side[2]
    cov = u < spec.labels[i].n
    return (kind in ("Kt", "Lr")) == cov


def _order_ports(p1, p2, spec):
    # a band's node side runs from the start of its first port to the end
    # of its second; both ports being of the same kind would need a twist
    a, b = _node_at_start(p1, spec), _node_at_start(p2, spec)
    if a == b:
        raise AssertionError(f"band between {p1} and {p2} is twisted")
    return (p1, p2) if a else (p2, p1)


def _letter_half(o, half):
    # the letter side runs from the row node J_{i,r} to the column node
    # I_{i,r+1}; the Haar row index is the slot row for eps = +1 and the
    # slot column for eps = -1
    if o.eps == 1:
        return "Lr" if half == "row" else "Lc"
    return "Lc" if half == "row" else "Lr"


def classify_boundary(surf: GluedSurface) -> Counter:
    """Count boundary cycles by the kind of free band side they run along."""
    out = Counter()
    for cyc in surf.boundary_cycles():
        kinds = {s[-1] for s in cyc}
        families = {s[0] for s in cyc}
        if kinds == {"node"}:
            out["index"] += 1
        elif families == {"G"}:
            out["brauer"] += 1
        elif families == {"H"}:
            out["haar"] += 1
        else:
            out["mixed"] += 1
    return out


@dataclass
class SurfaceClass:
    key: tuple
    omega: object
    chi: int
    h: int
    b: int
    members: int = 0


def _index_classes_from_surface(surf: GluedSurface) -> int:
    return classify_boundary(surf)["index"]


def surface_expansion(spec: WordSpec, coarse: bool = False, coeff_method="product", check=True):
    """Group the (tau, sigma) double sum into surface classes.

    Returns (classes, total) with total = sum Omega N^{chi - h}.
    """
    if not spec.balanced():
        return [], Fraction(0)
    N = spec.N
    layout = _Layout(spec, "per-letter")
    sig = SigmaTable(spec, layout)
    if count_tau(spec, layout, coeff_method) * sig.size > 2_000_000:
        raise OverflowError("surface enumeration too large")
    classes: dict = {}
    sigmas = list(sig.iterate())
    for coef, _, taus in tau_configurations(spec, layout, coeff_method):
        for perms, _, cls in sigmas:
            surf = build_glued_surface(spec, taus, perms)
            chi, b, h = surf.chi, surf.b, surf.h
            kinds = classify_boundary(surf)
            K = Fraction(N) ** kinds["index"]
            theta = Fraction(N) ** (h - chi) * K
            w = 1
            for ct in cls:
                w *= wg(ct, N)
            omega = coef * w * theta
            if coarse:
                key = (chi, h, b, tuple(sorted(cls)), surf.components())
            else:
                key = (taus, perms)
            c = classes.get(key)
            if c is None:
                c = classes[key] = SurfaceClass(key, 0, chi, h, b)
            elif (c.chi, c.h) != (chi, h):
                raise AssertionError("chi or h not constant on a class")
            c.omega += omega
            c.members += 1
    dims = _dims_factor(spec)
    total = sum(c.omega * Fraction(N) ** (c.chi - c.h) for c in classes.values()) * dims
    return list(classes.values()), total


def surface_census(classes) -> list:
    """Deterministic JSON-friendly census of surface classes."""
    rows = []
    for c in classes:
        rows.append({"chi": c.chi, "b": c.b, "h": c.h, "members": c.members, "omega": str(c.omega)})
    rows.sort(key=lambda r: (r["chi"], r["h"], r["b"], r["omega"]))
    return rows


# ---------------------------------------------------------- trace-only maps


@dataclass
class DualBipartiteMap:
    mu: tuple  # per letter cycle type of alpha^{-1} beta
    n: tuple  # per letter number of positive occurrences
    V: int
    E: int
    F: int
    k: int
    raw_weight: Fraction
    renormalized_weight: Fraction

    @property
    def chi(self) -> int:
        return self.V - self.E + self.F


def wg_tilde(mu: Partition, N: int) -> Fraction:
    """Wg rescaled by N^{2n - l(mu)}."""
    return wg(mu, N) * Fraction(N) ** (2 * mu.size - len(mu))


def _dbm_vertices(words, letters, plus, minus, perms):
    # corners of the map: each occurrence side has a row end and a column
    # end; polygon corners join consecutive sides, Haar faces join row ends
    # by alpha and column ends by beta
    uf = _UF()
    for i, w in enumerate(words):
        L = len(w)
        for r in range(L):
            uf.union(("C", i, r), ("R", i, (r + 1) % L))
    for a, (al, be) in zip(letters, perms):
        P, M = plus[a], minus[a]
        for t in range(len(P)):
            x, y = P[t], M[al(t)]
            uf.union(_haar_end(x, "row"), _haar_end(y, "row"))
            x, y = P[t], M[be(t)]
            uf.union(_haar_end(x, "col"), _haar_end(y, "col"))
    nodes = [(k, i, r) for i, w in enumerate(words) for r in range(len(w)) for k in ("R", "C")]
    return len({uf.find(x) for x in nodes})


def _haar_end(occ, half):
    i, r, eps = occ
    if (half == "row") == (eps == 1):
        return ("R", i, r)
    return ("C", i, r)


def dbm_expansion(words, N: int, max_n: int = 6, labels=None):
    """Trace-word moment E[prod Tr w_i(U)] as a sum over dual bipartite maps.

    Returns (maps, total).  Every map carries both weights
    prod Wg(mu) N^V and prod Wg~(mu) N^{chi - k}; they must agree.
    """
    if labels is not None:
        for lab in labels:
            if (lab.n, lab.m) != (1, 0):
                raise ValueError("dual bipartite maps need fundamental labels")
    words = [list(w) for w in words]
    k = len(words)
    letters = sorted({a for w in words for a, _ in w}, key=str)
    plus, minus = _occurrence_lists(words, letters)
    if any(len(plus[a]) != len(minus[a]) for a in letters):
        return [], Fraction(0)
    ns = tuple(len(plus[a]) for a in letters)
    if sum(ns) > max_n:
        raise OverflowError(f"sum of letter counts {sum(ns)} exceeds {max_n}")
    empty = sum(1 for w in words if not w)
    per_letter = [[(al, be) for al in all_permutations(n) for be in all_permutations(n)] for n in ns]
    maps = []
    total = Fraction(0)
    E = 2 * sum(ns)
    for perms in itertools.product(*per_letter):
        mus = tuple(cycle_type(al.inverse() * be) for al, be in perms)
        V = _dbm_vertices(words, letters, plus, minus, perms) + empty
        F = k + sum(len(m) for m in mus)
        raw = prod((wg(m, N) for m in mus), start=Fraction(1)) * Fraction(N) ** V
        chi = V - E + F
        ren = prod((wg_tilde(m, N) for m in mus), start=Fraction(1)) * Fraction(N) ** (chi - k)
        if raw != ren:
            raise AssertionError("map weights disagree: Euler bookkeeping broken")
        maps.append(DualBipartiteMap(mus, ns, V, E, F, k, raw, ren))
        total += raw
    return maps, total


def _occurrence_lists(words, letters):
    plus = {a: [] for a in letters}
    minus = {a: [] for a in letters}
    for i, w in enumerate(words):
        for r, (a, e) in enumerate(w):
            (plus if e == 1 else minus)[a].append((i, r, e))
    return plus, minus


def trace_only_check(spec: WordSpec) -> int:
    """Fundamental labels: every (tau, sigma) has h = 0 and K_N = N^{V(M)}
    for the dual bipartite map M of sigma.  Returns the number of pairs checked."""
    for lab in spec.labels:
        if (lab.n, lab.m) != (1, 0):
            raise ValueError("trace-only check needs fundamental labels")
    if not spec.balanced():
        return 0
    layout = _Layout(spec, "per-letter")
    sig = SigmaTable(spec, layout)
    plus, minus = _occurrence_lists(spec.words, spec.letters)
    empty = sum(1 for w in spec.words if not w)
    taus_all = list(tau_configurations(spec, layout))
    if len(taus_all) != 1 or taus_all[0][0] != 1:
        raise AssertionError("fundamental labels must carry only the identity diagram")
    _, _, taus = taus_all[0]
    n = 0
    for perms, _, _ in sig.iterate():
        surf = build_glued_surface(spec, taus, perms)
        V = _dbm_vertices(spec.words, spec.letters, plus, minus, perms) + empty
        if surf.h != 0 or classify_boundary(surf)["index"] != V:
            raise AssertionError("trace-only surface does not match its dual bipartite map")
        n += 1
    return n


# ------------------------------------------- edge-plaquette embedding series


def _multiplicity_fields(P: int, kmax: int):
    """All (K+, K-) in N^P x N^P with |K+| + |K-| <= kmax, by total size."""
    for tot in range(kmax + 1):
        for comp in _compositions(tot, 2 * P):
            yield tot, comp[:P], comp[P:]


def _compositions(n, parts):
    if parts == 0:
        if n == 0:
            yield ()
        return
    if parts == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


@dataclass
class EpeResult:
    value: float
    last_shell: float
    shells: list
    kmax: int


def epe_expansion(lat, loops, beta: float, N: int, kmax: int, tree=None, max_n: int = 6) -> EpeResult:
    """Truncated strong-coupling series of Z * E[prod Tr U_loop] for the Wilson action."""
    from .lattice import LoopWord, gauge_fix_word, spanning_tree

    tree = spanning_tree(lat) if tree is None else tree
    pw = [gauge_fix_word(LoopWord(tuple(b)), tree) for b in lat.boundaries]
    pinv = [[(e, -s) for e, s in reversed(w)] for w in pw]
    lw = [gauge_fix_word(L, tree) for L in loops]
    P = len(pw)
    shells = [0.0] * (kmax + 1)
    base_letters = Counter()
    for w in lw:
        for a, e in w:
            base_letters[a] += e
    for tot, Kp, Km in _multiplicity_fields(P, kmax):
        # quick balance test on net letter exponents
        net = Counter(base_letters)
        for p in range(P):
            d = Kp[p] - Km[p]
            if d:
                for a, e in pw[p]:
                    net[a] += d * e
        if any(v for v in net.values()):
            continue
        words = list(lw)
        for p in range(P):
            words += [pw[p]] * Kp[p] + [pinv[p]] * Km[p]
        _, moment = dbm_expansion(words, N, max_n=max_n)
        if moment == 0:
            continue
        weight = (beta / 2) ** tot / prod(factorial(x) for x in Kp + Km)
        shells[tot] += weight * float(moment)
    # parity can switch off alternate shells, so report the larger of the last two
    last = max(abs(x) for x in shells[-2:])
    return EpeResult(sum(shells), last, shells, kmax)


def epe_ratio(lat, loops, beta, N, kmax, tree=None, max_n=6):
    """E[W] from the truncated series, with a crude shell indicator."""
    num = epe_expansion(lat, loops, beta, N, kmax, tree, max_n)
    den = epe_expansion(lat, [], beta, N, kmax, tree, max_n)
    val = num.value / den.value
    shell = num.last_shell / abs(den.value) + abs(val) * den.last_shell / abs(den.value)
    return val, shell, num, den
