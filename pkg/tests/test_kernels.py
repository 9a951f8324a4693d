import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ymloops import _kernels_py, kernels


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 30))
    k = draw(st.integers(0, 40))
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), min_size=k, max_size=k))
    return n, np.array(pairs, dtype=np.int64).reshape(-1, 2)


def _components(n, pairs):
    seen, comps = set(), 0
    adj = {v: set() for v in range(n)}
    for a, b in pairs.tolist():
        adj[a].add(b)
        adj[b].add(a)
    for v in range(n):
        if v in seen:
            continue
        comps += 1
        stack = [v]
        while stack:
            x = stack.pop()
            if x not in seen:
                seen.add(x)
                stack.extend(adj[x] - seen)
    return comps


@given(graphs())
def test_count_classes_matches_graph_search(g):
    n, pairs = g
    assert kernels.count_classes(n, pairs) == _kernels_py.count_classes(n, pairs) == _components(n, pairs)


@given(graphs(), st.integers(1, 5), st.integers(0, 10**6))
def test_batch_matches_single(g, S, seed):
    n, base = g
    rng = np.random.default_rng(seed)
    batch = rng.integers(0, n, size=(S, 3, 2))
    got = kernels.count_classes_batch(n, base, batch)
    ref = _kernels_py.count_classes_batch(n, base, batch)
    assert np.array_equal(got, ref)
    for s in range(S):
        assert got[s] == _components(n, np.vstack([base, batch[s]]))


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


def test_pure_python_switch(monkeypatch):
    import importlib

    monkeypatch.setenv("YMLOOPS_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("YMLOOPS_PURE_PYTHON")
        importlib.reload(kernels)


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
def test_compiled_extension_loaded():
    from ymloops import _kernels

    assert kernels.count_classes is _kernels.count_classes
