"""Pure-Python versions of the compiled kernels."""
import numpy as np


def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def count_classes(n_nodes, pairs):
    """Connected components of the graph on n_nodes given by an (k, 2) edge array."""
    parent = list(range(n_nodes))
    comps = n_nodes
    for a, b in pairs:
        ra, rb = _find(parent, int(a)), _find(parent, int(b))
        if ra != rb:
            parent[ra] = rb
            comps -= 1
    return comps


def count_classes_batch(n_nodes, base_pairs, batch_pairs):
    """Component counts of base_pairs united with each row of batch_pairs.

    batch_pairs has shape (S, k, 2); returns an int64 array of length S.
    """
    base = [(int(a), int(b)) for a, b in np.asarray(base_pairs).reshape(-1, 2)]
    batch = np.asarray(batch_pairs).reshape(len(batch_pairs), -1, 2)
    out = np.empty(len(batch), dtype=np.int64)
    for s in range(len(batch)):
        parent = list(range(n_nodes))
        comps = n_nodes
        for a, b in base:
            ra, rb = _find(parent, a), _find(parent, b)
            if ra != rb:
                parent[ra] = rb
                comps -= 1
        for a, b in batch[s].tolist():
            ra, rb = _find(parent, a), _find(parent, b)
            if ra != rb:
                parent[ra] = rb
                comps -= 1
        out[s] = comps
    return out
