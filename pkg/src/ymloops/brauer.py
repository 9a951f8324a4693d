"""Walled Brauer diagrams, composition with loop counting, index patterns.

Slots 0..n-1 are covariant (V), slots n..n+m-1 contravariant (V*).
Each slot s has a top vertex ("t", s) carrying the output index I_s and a
bottom vertex ("b", s) carrying the input index J_s.

The wall rule pairs every "column" vertex (covariant top, contravariant
bottom) with a "row" vertex (covariant bottom, contravariant top), so a
diagram is the same thing as a permutation ``perm`` of the slots: column
vertex of slot s is joined to the row vertex of slot perm[s].
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from functools import lru_cache

import numpy as np


def _col(s, n):
    return ("t", s) if s < n else ("b", s)


def _row(s, n):
    return ("b", s) if s < n else ("t", s)


@dataclass(frozen=True)
class WalledBrauerDiagram:
    n: int
    m: int
    perm: tuple

    def __post_init__(self):
        p = tuple(int(x) for x in self.perm)
        if sorted(p) != list(range(self.n + self.m)):
            raise ValueError("perm must be a permutation of the slots")
        object.__setattr__(self, "perm", p)

    @property
    def size(self):
        return self.n + self.m

    @classmethod
    def identity(cls, n, m):
        return cls(n, m, tuple(range(n + m)))

    @classmethod
    def contraction(cls, n, m, i, j):
        """e_{i,j}: cap joining covariant slot i with contravariant slot j
        on both the top and the bottom row (j counted from 0 among V*)."""
        p = list(range(n + m))
        p[i], p[n + j] = n + j, i
        return cls(n, m, tuple(p))

    @property
    def pairs(self) -> tuple:
        """Canonical sorted list of matched vertex pairs."""
        out = []
        for s, t in enumerate(self.perm):
            a, b = _col(s, self.n), _row(t, self.n)
            out.append(tuple(sorted((a, b))))
        return tuple(sorted(out))

    def partner(self) -> dict:
        d = {}
        for a, b in self.pairs:
            d[a] = b
            d[b] = a
        return d

    def horizontal_count(self) -> int:
        """Number of horizontal strands (top-top plus bottom-bottom)."""
        return sum(1 for a, b in self.pairs if a[0] == b[0])

    def is_permutation_diagram(self) -> bool:
        return self.horizontal_count() == 0

    def check_wall(self):
        # every pair joins q=+1 to q=-1, q = sign(v)*eta
        def q(v):
            side, s = v
            return (1 if s < self.n else -1) * (1 if side == "t" else -1)

        for a, b in self.pairs:
            if q(a) != -q(b):
                raise AssertionError(f"wall rule violated by {a}-{b}")


@dataclass(frozen=True)
class BrauerProduct:
    diagram: WalledBrauerDiagram
    loops: int


@lru_cache(maxsize=64)
def _enumerate(n, m):
    return tuple(WalledBrauerDiagram(n, m, p) for p in permutations(range(n + m)))


def enumerate_walled(n: int, m: int) -> list[WalledBrauerDiagram]:
    if n < 0 or m < 0:
        raise ValueError("slot counts must be nonnegative")
    return list(_enumerate(n, m))


def compose(d1: WalledBrauerDiagram, d2: WalledBrauerDiagram) -> BrauerProduct:
    """Stack d1 on top of d2; rho(d1) rho(d2) = N^loops rho(result)."""
    if (d1.n, d1.m) != (d2.n, d2.m):
        raise ValueError("shape mismatch")
    n, m = d1.n, d1.m
    p1, p2 = d1.partner(), d2.partner()
    # vertices: ("T", v) = vertex v of d1, ("B", v) = vertex v of d2;
    # d1 bottom row is glued to d2 top row
    def step(node):
        layer, v = node
        return (layer, (p1 if layer == "T" else p2)[v])

    def glue(node):
        layer, (side, s) = node
        if layer == "T" and side == "b":
            return ("B", ("t", s))
        if layer == "B" and side == "t":
            return ("T", ("b", s))
        return None

    externals = [("T", ("t", s)) for s in range(n + m)] + [("B", ("b", s)) for s in range(n + m)]
    ext_map = {}
    seen = set()
    for start in externals:
        if start in seen:
            continue
        node = start
        seen.add(node)
        while True:
            node = step(node)
            seen.add(node)
            g = glue(node)
            if g is None:
                break
            node = g
            seen.add(node)
        ext_map[start] = node
        ext_map[node] = start
    # closed loops live entirely in the middle row
    loops = 0
    middle = [("T", ("b", s)) for s in range(n + m)]
    for start in middle:
        if start in seen:
            continue
        loops += 1
        node = start
        while node not in seen:
            seen.add(node)
            other = step(node)
            seen.add(other)
            node = glue(other)

    def plain(node):
        return ("t", node[1][1]) if node[0] == "T" else ("b", node[1][1])

    perm = [None] * (n + m)
    for s in range(n + m):
        tgt = plain(ext_map[_ext_node(_col(s, n))])
        side, t = tgt
        perm[s] = t
        assert _row(t, n) == tgt, "composition broke the wall rule"
    return BrauerProduct(WalledBrauerDiagram(n, m, tuple(perm)), loops)


def _ext_node(v):
    return ("T", v) if v[0] == "t" else ("B", v)


def index_pattern(d: WalledBrauerDiagram) -> list[tuple]:
    """Equality constraints between index slots.

    Each constraint is a pair of vertices ("t", s) / ("b", s); the matrix
    entry rho(d)[I, J] is 1 iff I/J agree on every pair.
    """
    return list(d.pairs)


def _flat(idx_top, idx_bot, v):
    side, s = v
    return idx_top[s] if side == "t" else idx_bot[s]


def dense_rho(d: WalledBrauerDiagram, N: int, cap: int = 20000) -> np.ndarray:
    """Dense matrix of rho_N(d) on V^n (x) V*^m (row = top indices)."""
    k = d.size
    if N**k > cap:
        raise ValueError(f"dense realisation capped at N^(n+m) <= {cap}")
    if k == 0:
        return np.ones((1, 1))
    pairs = d.pairs
    # each leg (top slots then bottom slots) takes the value of its strand
    leg_of = {}
    for c, (a, b) in enumerate(pairs):
        leg_of[a] = c
        leg_of[b] = c
    order = [leg_of[("t", s)] for s in range(k)] + [leg_of[("b", s)] for s in range(k)]
    vals = np.indices((N,) * k).reshape(k, -1)
    out = np.zeros((N,) * (2 * k))
    out[tuple(vals[order])] = 1.0
    return out.reshape(N**k, N**k)


def mixed_tensor_rep(U: np.ndarray, n: int, m: int) -> np.ndarray:
    """U^{(x)n} (x) conj(U)^{(x)m} acting on V^n (x) V*^m."""
    out = np.ones((1, 1), dtype=complex)
    for _ in range(n):
        out = np.kron(out, U)
    Ub = U.conj()
    for _ in range(m):
        out = np.kron(out, Ub)
    return out


def trace_cycles(d: WalledBrauerDiagram) -> list[list[tuple]]:
    """Cycles of Tr(rho(d) (A_0 (x) ... (x) A_{k-1})).

    Each cycle is a list of (slot, transposed) so that its contribution is
    Tr(prod A_s or A_s^T) in the listed order.  Cycles are normalised to
    read covariant slots untransposed.
    """
    partner = d.partner()
    seen = set()
    cycles = []
    for s0 in range(d.size):
        if s0 in seen:
            continue
        cyc = []
        # enter slot operator at its bottom vertex (row index) = forward
        node = ("b", s0)
        while True:
            side, s = node
            if s in seen:
                break
            seen.add(s)
            fwd = side == "b"
            cyc.append((s, not fwd))
            exit_v = ("t", s) if fwd else ("b", s)
            node = partner[exit_v]
        if any(s < d.n and tr for s, tr in cyc) or (
            all(s >= d.n for s, _ in cyc) and any(not tr for _, tr in cyc)
        ):
            cyc = [(s, not tr) for s, tr in reversed(cyc)]
        cycles.append(cyc)
    return cycles


def closed_trace(d: WalledBrauerDiagram, mats) -> complex:
    """Tr(rho(d) @ kron(mats)) computed cycle by cycle."""
    total = 1.0 + 0j
    for cyc in trace_cycles(d):
        M = np.eye(mats[0].shape[0], dtype=complex)
        for s, tr in cyc:
            M = M @ (mats[s].T if tr else mats[s])
        total *= np.trace(M)
    return total


def trace_classes(d: WalledBrauerDiagram) -> int:
    """Number of index classes of the closed-up diagram (trace = N^this)."""
    return len(trace_cycles(d))


def algebra_product(x: dict, y: dict, N) -> dict:
    """Product in B_{n,m}(N) of coefficient maps diagram -> scalar."""
    out: dict = {}
    for d1, a in x.items():
        if a == 0:
            continue
        for d2, b in y.items():
            if b == 0:
                continue
            pr = compose(d1, d2)
            c = a * b * (N**pr.loops)
            out[pr.diagram] = out.get(pr.diagram, 0) + c
    return {k: v for k, v in out.items() if v != 0}


def as_fraction_map(x: dict) -> dict:
    return {k: Fraction(v) for k, v in x.items()}
