"""Finite cubical lattices in Z^d, loops, spanning trees and gauge fixing."""
from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field

from .weingarten import cyclic_reduce


@dataclass
class Lattice:
    d: int
    extents: tuple
    vertices: list
    edges: list  # edge id -> (tail vertex, head vertex, axis)
    plaquettes: list  # plaquette id -> (base vertex, i, j)
    boundaries: list  # plaquette id -> [(edge id, sign)] * 4
    vertex_id: dict = field(repr=False, default_factory=dict)
    edge_id: dict = field(repr=False, default_factory=dict)

    def edge_of(self, v, axis) -> int:
        return self.edge_id[(tuple(v), axis)]

    def plaquettes_containing(self, e: int) -> list[int]:
        return [p for p, b in enumerate(self.boundaries) if any(x == e for x, _ in b)]

    def describe(self) -> dict:
        return {
            "d": self.d,
            "extents": list(self.extents),
            "vertices": [list(v) for v in self.vertices],
            "edges": [{"id": f"e{k}", "tail": list(t), "head": list(h), "axis": a} for k, (t, h, a) in enumerate(self.edges)],
            "plaquettes": [
                {"id": f"p{k}", "base": list(v), "axes": [i, j], "boundary": [format_letter(x) for x in self.boundaries[k]]}
                for k, (v, i, j) in enumerate(self.plaquettes)
            ],
        }


def format_letter(x) -> str:
    e, s = x
    return ("+" if s > 0 else "-") + f"e{e}"


def parse_letter(tok) -> tuple:
    if isinstance(tok, (list, tuple)):
        return int(tok[0]), int(tok[1])
    t = str(tok).strip()
    sign = 1
    if t[0] in "+-":
        sign = -1 if t[0] == "-" else 1
        t = t[1:]
    if t.startswith("e"):
        t = t[1:]
    return int(t), sign


def build_lattice(d: int, extents) -> Lattice:
    extents = tuple(int(x) for x in extents)
    if d < 1:
        raise ValueError("need d >= 1")
    if len(extents) != d:
        raise ValueError("one extent per axis")
    if any(x < 0 for x in extents) or sum(1 for x in extents if x >= 1) < 1:
        raise ValueError(f"degenerate extents {extents}")
    verts = list(itertools.product(*[range(x + 1) for x in extents]))
    vid = {v: k for k, v in enumerate(verts)}
    edges, eid = [], {}
    for v in verts:
        for a in range(d):
            w = list(v)
            w[a] += 1
            w = tuple(w)
            if w in vid:
                eid[(v, a)] = len(edges)
                edges.append((v, w, a))
    plaqs, bnds = [], []
    for v in verts:
        for i in range(d):
            for j in range(i + 1, d):
                vi = tuple(v[k] + (k == i) for k in range(d))
                vj = tuple(v[k] + (k == j) for k in range(d))
                vij = tuple(v[k] + (k == i) + (k == j) for k in range(d))
                if vij not in vid:
                    continue
                plaqs.append((v, i, j))
                bnds.append([(eid[(v, i)], 1), (eid[(vi, j)], 1), (eid[(vj, i)], -1), (eid[(v, j)], -1)])
    return Lattice(d, extents, verts, edges, plaqs, bnds, vid, eid)


def edge_ends(lat: Lattice, letter) -> tuple:
    e, s = letter
    t, h, _ = lat.edges[e]
    return (t, h) if s > 0 else (h, t)


@dataclass(frozen=True)
class LoopWord:
    letters: tuple

    def __len__(self):
        return len(self.letters)

    def inverse(self) -> "LoopWord":
        return LoopWord(tuple((e, -s) for e, s in reversed(self.letters)))

    def reduced(self) -> "LoopWord":
        return LoopWord(tuple(cyclic_reduce(list(self.letters))))


def make_loop(lat: Lattice, letters) -> LoopWord:
    letters = tuple(parse_letter(x) for x in letters)
    if not letters:
        return LoopWord(())
    for k, x in enumerate(letters):
        if not 0 <= x[0] < len(lat.edges):
            raise ValueError(f"unknown edge {x}")
        _, h = edge_ends(lat, x)
        t2, _ = edge_ends(lat, letters[(k + 1) % len(letters)])
        if h != t2:
            raise ValueError(f"loop is not closed/connected at position {k}")
    return LoopWord(letters)


def plaquette_loop(lat: Lattice, p: int, inverse=False) -> LoopWord:
    w = LoopWord(tuple(lat.boundaries[p]))
    return w.inverse() if inverse else w


def spanning_tree(lat: Lattice) -> frozenset:
    """BFS tree from the lexicographically least vertex, edges scanned by id."""
    if not lat.vertices:
        raise ValueError("empty lattice")
    inc = {v: [] for v in lat.vertices}
    for k, (t, h, _) in enumerate(lat.edges):
        inc[t].append((k, h))
        inc[h].append((k, t))
    root = min(lat.vertices)
    seen = {root}
    tree = []
    q = deque([root])
    while q:
        v = q.popleft()
        for k, w in sorted(inc[v]):
            if w not in seen:
                seen.add(w)
                tree.append(k)
                q.append(w)
    if len(seen) != len(lat.vertices):
        raise ValueError("lattice is disconnected")
    return frozenset(tree)


def alternative_tree(lat: Lattice) -> frozenset:
    """A second deterministic spanning tree (DFS from the greatest vertex, lowest edge id first)."""
    inc = {v: [] for v in lat.vertices}
    for k, (t, h, _) in enumerate(lat.edges):
        inc[t].append((k, h))
        inc[h].append((k, t))
    root = max(lat.vertices)
    seen = {root}
    tree = []
    stack = [root]
    while stack:
        v = stack[-1]
        nxt = next(((k, w) for k, w in sorted(inc[v]) if w not in seen), None)
        if nxt is None:
            stack.pop()
            continue
        seen.add(nxt[1])
        tree.append(nxt[0])
        stack.append(nxt[1])
    return frozenset(tree)


def gauge_fix_word(word, tree) -> list:
    """Delete tree letters and cyclically reduce; returns [(edge, sign)]."""
    letters = word.letters if isinstance(word, LoopWord) else tuple(word)
    return cyclic_reduce([x for x in letters if x[0] not in tree])


@dataclass
class DualIncidenceGraph:
    plaquettes: list
    nontree_edges: list
    incidences: list  # (p, e)
    tree: frozenset
    defect_support: frozenset


def dual_incidence(lat: Lattice, tree, loops=()) -> DualIncidenceGraph:
    nontree = [e for e in range(len(lat.edges)) if e not in tree]
    inc = []
    for p, b in enumerate(lat.boundaries):
        for e in sorted({x for x, _ in b}):
            if e not in tree:
                inc.append((p, e))
    D = set()
    for L in loops:
        D.update(e for e, _ in gauge_fix_word(L, tree))
    return DualIncidenceGraph(list(range(len(lat.plaquettes))), nontree, inc, frozenset(tree), frozenset(D))


def load_problem(path_or_dict) -> tuple:
    """Read {"d":..,"extents":[..],"loops":[[..],..]} -> (lattice, loops)."""
    if isinstance(path_or_dict, dict):
        data = path_or_dict
    else:
        with open(path_or_dict) as fh:
            data = json.load(fh)
    lat = build_lattice(int(data["d"]), data["extents"])
    loops = [make_loop(lat, L) for L in data.get("loops", [])]
    return lat, loops
