import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ymloops.lattice import (
    LoopWord,
    alternative_tree,
    build_lattice,
    dual_incidence,
    format_letter,
    gauge_fix_word,
    load_problem,
    make_loop,
    parse_letter,
    plaquette_loop,
    spanning_tree,
)

extents2 = st.tuples(st.integers(1, 3), st.integers(1, 3))
extents3 = st.tuples(st.integers(1, 2), st.integers(1, 2), st.integers(1, 2))


def _is_spanning_tree(lat, tree):
    parent = {v: v for v in lat.vertices}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for e in tree:
        t, h, _ = lat.edges[e]
        a, b = find(t), find(h)
        if a == b:
            return False
        parent[a] = b
    return len(tree) == len(lat.vertices) - 1


@given(st.one_of(extents2, extents3))
def test_counts_and_trees(ext):
    lat = build_lattice(len(ext), ext)
    nv = 1
    for x in ext:
        nv *= x + 1
    assert len(lat.vertices) == nv
    ne = sum(ext[a] * nv // (ext[a] + 1) for a in range(len(ext)))
    assert len(lat.edges) == ne
    for tree in (spanning_tree(lat), alternative_tree(lat)):
        assert _is_spanning_tree(lat, tree)
        assert len(lat.edges) - len(tree) == len(lat.edges) - len(lat.vertices) + 1


@given(st.one_of(extents2, extents3))
def test_plaquettes_are_closed_loops(ext):
    lat = build_lattice(len(ext), ext)
    for p in range(len(lat.plaquettes)):
        L = make_loop(lat, lat.boundaries[p])
        assert len(L) == 4
        for e in {a for a, _ in L.letters}:
            assert p in lat.plaquettes_containing(e)


def test_unit_square():
    lat = build_lattice(2, (1, 1))
    tree = spanning_tree(lat)
    g = dual_incidence(lat, tree, [plaquette_loop(lat, 0)])
    assert len(g.plaquettes) == 1 and len(g.nontree_edges) == 1 and len(g.incidences) == 1
    assert g.defect_support == frozenset(g.nontree_edges)
    assert dual_incidence(lat, tree).defect_support == frozenset()


def test_incidences_avoid_tree():
    lat = build_lattice(2, (2, 2))
    tree = spanning_tree(lat)
    for p, e in dual_incidence(lat, tree).incidences:
        assert e not in tree and p in lat.plaquettes_containing(e)


def test_gauge_fix_plaquette():
    lat = build_lattice(2, (1, 1))
    tree = spanning_tree(lat)
    w = gauge_fix_word(plaquette_loop(lat, 0), tree)
    assert len(w) == 1 and w[0][0] not in tree


def test_letters_roundtrip():
    for x in [(3, 1), (0, -1), (12, 1)]:
        assert parse_letter(format_letter(x)) == x
    assert parse_letter("e7") == (7, 1)
    assert parse_letter([4, -1]) == (4, -1)


def test_make_loop_validation():
    lat = build_lattice(2, (1, 1))
    with pytest.raises(ValueError):
        make_loop(lat, ["+e0", "+e0"])
    with pytest.raises(ValueError):
        make_loop(lat, ["+e99"])
    assert make_loop(lat, []) == LoopWord(())


def test_bad_extents():
    with pytest.raises(ValueError):
        build_lattice(2, (1,))
    with pytest.raises(ValueError):
        build_lattice(2, (0, 0))
    with pytest.raises(ValueError):
        build_lattice(0, ())


def test_load_problem(tmp_path):
    data = {"d": 2, "extents": [1, 1], "loops": [["+e0", "+e3", "-e2", "-e1"]]}
    f = tmp_path / "p.json"
    f.write_text(json.dumps(data))
    lat, loops = load_problem(str(f))
    assert loops[0].letters == tuple(lat.boundaries[0])
    assert load_problem(data)[1] == loops


def test_describe_ids():
    d = build_lattice(2, (1, 1)).describe()
    assert [e["id"] for e in d["edges"]] == ["e0", "e1", "e2", "e3"]
    assert d["plaquettes"][0]["boundary"] == ["+e0", "+e3", "-e2", "-e1"]


def test_loop_inverse():
    lat = build_lattice(2, (1, 2))
    L = plaquette_loop(lat, 1)
    assert L.inverse().inverse() == L
    assert plaquette_loop(lat, 1, inverse=True) == L.inverse()
