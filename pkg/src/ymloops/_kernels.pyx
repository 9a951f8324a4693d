# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled union-find class counting for the (tau, sigma) enumeration."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline long _find(long[:] parent, long x) nogil:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def count_classes(long n_nodes, pairs):
    cdef long[:, :] p = np.ascontiguousarray(np.asarray(pairs, dtype=np.int64).reshape(-1, 2))
    cdef long[:] parent = np.arange(n_nodes, dtype=np.int64)
    cdef long comps = n_nodes, i, ra, rb
    for i in range(p.shape[0]):
        ra = _find(parent, p[i, 0])
        rb = _find(parent, p[i, 1])
        if ra != rb:
            parent[ra] = rb
            comps -= 1
    return comps


def count_classes_batch(long n_nodes, base_pairs, batch_pairs):
    cdef long[:, :] base = np.ascontiguousarray(np.asarray(base_pairs, dtype=np.int64).reshape(-1, 2))
    arr = np.asarray(batch_pairs, dtype=np.int64)
    cdef long S = arr.shape[0]
    cdef long[:, :, :] batch = np.ascontiguousarray(arr.reshape(S, -1, 2))
    cdef long[:] parent = np.empty(n_nodes, dtype=np.int64)
    out = np.empty(S, dtype=np.int64)
    cdef long[:] res = out
    cdef long s, i, comps, ra, rb
    with nogil:
        for s in range(S):
            for i in range(n_nodes):
                parent[i] = i
            comps = n_nodes
            for i in range(base.shape[0]):
                ra = _find(parent, base[i, 0])
                rb = _find(parent, base[i, 1])
                if ra != rb:
                    parent[ra] = rb
                    comps -= 1
            for i in range(batch.shape[1]):
                ra = _find(parent, batch[s, i, 0])
                rb = _find(parent, batch[s, i, 1])
                if ra != rb:
                    parent[ra] = rb
                    comps -= 1
            res[s] = comps
    return out
