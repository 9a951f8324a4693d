"""Unitary Weingarten function, entrywise Haar moments and character-word integrals."""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial, prod

import numpy as np

from .algebra_core import (
    Permutation,
    all_permutations,
    as_partition,
    cycle_type,
    partitions_of,
    sym_character,
)
from .brauer import WalledBrauerDiagram
from .kernels import count_classes_batch
from .unitary_rep import (
    HighestWeight,
    character_coefficients,
    character_operator,
    expand_projector_in_diagrams,
    weyl_dim,
)

ENUM_GUARD = 10**7


@lru_cache(maxsize=None)
def _wg_cached(mu: tuple, N: int) -> Fraction:
    n = sum(mu)
    total = Fraction(0)
    for lam in partitions_of(n, N):
        f = sym_character(lam, (1,) * n)
        s = weyl_dim(HighestWeight(lam, (), N))
        total += Fraction(f * f * sym_character(lam, mu), s)
    return total / (factorial(n) ** 2)


def wg(mu, N: int) -> Fraction:
    """Weingarten function on the class mu (pseudoinverse of the Gram matrix)."""
    mu = as_partition(mu)
    if N < 1:
        raise ValueError("N must be positive")
    if mu.size == 0:
        return Fraction(1)
    return _wg_cached(mu.parts, N)


def wg_perm(p: Permutation, N: int) -> Fraction:
    return wg(cycle_type(p), N)


@dataclass
class WgTable:
    n: int
    N: int
    values: dict = field(default_factory=dict)

    @classmethod
    def build(cls, n: int, N: int) -> "WgTable":
        return cls(n, N, {mu: wg(mu, N) for mu in partitions_of(n)})

    def __call__(self, p: Permutation) -> Fraction:
        return self.values[cycle_type(p)]


def gram_matrix(n: int, N: int) -> list:
    perms = all_permutations(n)
    return [[N ** (s.inverse() * t).num_cycles() for t in perms] for s in perms]


def entrywise_moment(rows, cols, rows_bar, cols_bar, N: int) -> Fraction:
    """E[prod_t U[rows_t, cols_t] * prod_s conj(U)[rows_bar_s, cols_bar_s]] for one Haar U."""
    n = len(rows)
    if len(cols) != n or len(rows_bar) != len(cols_bar):
        raise ValueError("row/column lists must have equal length")
    if len(rows_bar) != n:
        return Fraction(0)
    total = Fraction(0)
    perms = all_permutations(n)
    for a in perms:
        if any(rows[t] != rows_bar[a(t)] for t in range(n)):
            continue
        for b in perms:
            if any(cols[t] != cols_bar[b(t)] for t in range(n)):
                continue
            total += wg_perm(a.inverse() * b, N)
    return total


# ---------------------------------------------------------------- word specs


@dataclass(frozen=True)
class Occurrence:
    word: int
    pos: int
    slot: int
    letter: object
    eps: int  # exponent sign of the letter in the word
    delta: int  # +1 covariant slot, -1 contravariant slot

    @property
    def charge(self) -> int:
        """+1 if the Haar variable enters as U, -1 if as conj(U)."""
        return self.eps * self.delta


def parse_word(text: str) -> list:
    """Parse "x y x^-1 y^-1" (or "x y X Y") into [(letter, eps), ...]."""
    out = []
    for tok in text.split():
        if tok.endswith("^-1"):
            out.append((tok[:-3], -1))
        elif len(tok) == 1 and tok.isupper():
            out.append((tok.lower(), -1))
        else:
            out.append((tok, 1))
    return out


def reduce_word(word) -> list:
    """Free reduction (no cyclic reduction)."""
    out = []
    for a, e in word:
        if out and out[-1][0] == a and out[-1][1] == -e:
            out.pop()
        else:
            out.append((a, e))
    return out


def cyclic_reduce(word) -> list:
    w = reduce_word(word)
    while len(w) >= 2 and w[0][0] == w[-1][0] and w[0][1] == -w[-1][1]:
        w = w[1:-1]
    return w


class WordSpec:
    """Words with rational labels plus the occurrence bookkeeping."""

    def __init__(self, words, labels):
        words = [list(w) for w in words]
        if len(words) != len(labels):
            raise ValueError("one label per word")
        for w in words:
            for i in range(len(w) - 1):
                if w[i][0] == w[i + 1][0] and w[i][1] == -w[i + 1][1]:
                    raise ValueError(f"word {w} is not reduced")
            for a, e in w:
                if e not in (1, -1):
                    raise ValueError("exponents must be +-1")
        self.words = words
        self.labels = list(labels)
        Ns = {lab.N for lab in self.labels}
        if len(Ns) > 1:
            raise ValueError("all labels must share N")
        self.N = Ns.pop() if Ns else 1
        self.occurrences = []
        for i, (w, lab) in enumerate(zip(words, self.labels)):
            r = lab.n + lab.m
            for pos, (a, e) in enumerate(w):
                for u in range(r):
                    self.occurrences.append(Occurrence(i, pos, u, a, e, 1 if u < lab.n else -1))
        # lexicographic (word, position, slot) ordering of S_a^+ and S_a^-
        self.letters = sorted({o.letter for o in self.occurrences}, key=str)
        self.S_plus = {a: [o for o in self.occurrences if o.letter == a and o.charge == 1] for a in self.letters}
        self.S_minus = {a: [o for o in self.occurrences if o.letter == a and o.charge == -1] for a in self.letters}

    @property
    def slot_counts(self):
        return [lab.n + lab.m for lab in self.labels]

    def balanced(self) -> bool:
        return all(len(self.S_plus[a]) == len(self.S_minus[a]) for a in self.letters)

    def p(self, a) -> int:
        return len(self.S_plus[a])

    def empty_words(self):
        return [i for i, w in enumerate(self.words) if not w]

    def __repr__(self):
        return f"WordSpec({self.words}, {self.labels})"


# ------------------------------------------------------- index-node layout


class _Layout:
    """Index variables of the traced product for a given insertion form.

    form="per-letter": a diagram tau_{i,r} sits before every letter.
    form="single": one diagram per word, before its first letter.
    """

    def __init__(self, spec: WordSpec, form: str):
        self.spec = spec
        self.form = form
        self.node = {}
        k = 0
        for i, (w, r) in enumerate(zip(spec.words, spec.slot_counts)):
            L = len(w)
            npos = L if form == "per-letter" else min(L, 1)
            for pos in range(npos):
                for side in ("t", "b"):
                    for u in range(r):
                        self.node[(i, pos, side, u)] = k
                        k += 1
            if form == "single":
                for pos in range(1, L):
                    for u in range(r):
                        self.node[(i, pos, "b", u)] = k
                        k += 1
        self.n_nodes = k

    def diag_positions(self, i):
        L = len(self.spec.words[i])
        return list(range(L)) if self.form == "per-letter" else ([0] if L else [])

    def row_node(self, o: Occurrence):
        # row index of the slot matrix of letter (i, pos) is J_{i,pos}
        return self.node[(o.word, o.pos, "b", o.slot)]

    def col_node(self, o: Occurrence):
        L = len(self.spec.words[o.word])
        nxt = (o.pos + 1) % L
        if self.form == "per-letter" or nxt == 0:
            return self.node[(o.word, nxt, "t", o.slot)]
        return self.node[(o.word, nxt, "b", o.slot)]

    def haar_index(self, o: Occurrence):
        """(row, col) index nodes of the Haar entry carried by occurrence o."""
        R, C = self.row_node(o), self.col_node(o)
        return (R, C) if o.eps == 1 else (C, R)

    def tau_pairs(self, i, pos, d: WalledBrauerDiagram):
        return [
            (self.node[(i, pos, a[0], a[1])], self.node[(i, pos, b[0], b[1])])
            for a, b in d.pairs
        ]


def _word_coefficients(spec: WordSpec, method: str):
    out = []
    for lab in spec.labels:
        full = character_coefficients(lab, method)
        out.append(full)
    return out


def _isotypic(spec: WordSpec, method: str):
    return [expand_projector_in_diagrams(lab, method) if lab.N > 1 else None for lab in spec.labels]


def tau_configurations(spec: WordSpec, layout: _Layout, method: str = "product"):
    """Yield (coefficient, tau-pair list, tau-tuple) with zero coefficients pruned."""
    per_word = []
    qcoef = _word_coefficients(spec, method)
    pcoef = _isotypic(spec, method)
    for i, lab in enumerate(spec.labels):
        positions = layout.diag_positions(i)
        choices = []
        for k, pos in enumerate(positions):
            # first insertion carries the character normalisation, later
            # ones the idempotent projector itself
            coeffs = qcoef[i] if k == 0 or lab.N == 1 else pcoef[i]
            choices.append([(pos, d, c) for d, c in coeffs.items() if c != 0])
        per_word.append(choices)
    flat = [(i, ch) for i, chs in enumerate(per_word) for ch in chs]
    for combo in itertools.product(*[ch for _, ch in flat]):
        coef = 1
        pairs = []
        taus = []
        for (i, _), (pos, d, c) in zip(flat, combo):
            coef = coef * c
            pairs.extend(layout.tau_pairs(i, pos, d))
            taus.append((i, pos, d))
        yield coef, pairs, tuple(taus)


def count_tau(spec: WordSpec, layout: _Layout, method="product") -> int:
    total = 1
    qcoef = _word_coefficients(spec, method)
    pcoef = _isotypic(spec, method)
    for i, lab in enumerate(spec.labels):
        for k, _ in enumerate(layout.diag_positions(i)):
            coeffs = qcoef[i] if k == 0 or lab.N == 1 else pcoef[i]
            total *= sum(1 for c in coeffs.values() if c != 0)
    return total


class SigmaTable:
    """All Weingarten pairings sigma = (alpha_a, beta_a)_a as index-node pairs."""

    def __init__(self, spec: WordSpec, layout: _Layout):
        self.letters = spec.letters
        self.per_letter = []
        for a in spec.letters:
            plus, minus = spec.S_plus[a], spec.S_minus[a]
            p = len(plus)
            hp = [layout.haar_index(o) for o in plus]
            hm = [layout.haar_index(o) for o in minus]
            perms = all_permutations(p)
            opts = []
            for al in perms:
                for be in perms:
                    pairs = [(hp[t][0], hm[al(t)][0]) for t in range(p)]
                    pairs += [(hp[t][1], hm[be(t)][1]) for t in range(p)]
                    opts.append(((al, be), pairs, cycle_type(al.inverse() * be)))
            self.per_letter.append(opts)
        self.size = prod(len(o) for o in self.per_letter)

    def iterate(self):
        for combo in itertools.product(*self.per_letter):
            pairs = []
            classes = []
            perms = []
            for (ab, prs, ct) in combo:
                pairs.extend(prs)
                classes.append(ct)
                perms.append(ab)
            yield tuple(perms), pairs, tuple(classes)

    def arrays(self):
        """Stacked pair arrays and class keys for the whole sigma range."""
        keys = []
        rows = []
        for _, pairs, classes in self.iterate():
            rows.append(pairs)
            keys.append(classes)
        arr = np.asarray(rows, dtype=np.int64).reshape(len(rows), -1, 2) if rows else np.zeros((1, 0, 2), dtype=np.int64)
        if not rows:
            keys = [()]
        return arr, keys


def _wg_product(classes, N):
    out = Fraction(1)
    for ct in classes:
        out *= wg(ct, N)
    return out


def _u1_integral(spec: WordSpec):
    # U(1) characters are monomials z^k: the integrand is a product of
    # powers of independent Haar phases
    charge = {}
    for w, lab in zip(spec.words, spec.labels):
        k = lab.n - lab.m
        for a, e in w:
            charge[a] = charge.get(a, 0) + e * k
    return Fraction(1) if all(v == 0 for v in charge.values()) else Fraction(0)


def character_word_integral(spec: WordSpec, method: str = "auto", form: str = "per-letter",
                            coeff_method: str = "product", guard: int = ENUM_GUARD):
    """Haar integral of prod_i chi_{label_i}(w_i(U)).

    method: "enumerate" (exact double sum over (tau, sigma)), "tensor"
    (the same sum contracted as a dense tensor network, floating point),
    or "auto".  N = 1 uses the closed form of U(1) characters.
    """
    if not spec.balanced():
        return Fraction(0)
    N = spec.N
    # empty words contribute chi(1) = dimension
    if N == 1 and method != "enumerate":
        return _u1_integral(spec)
    if method == "auto":
        method = "enumerate" if _enumeration_cost(spec, form, coeff_method) <= 2e5 else "tensor"
    if method == "tensor":
        return tensor_word_integral(spec)
    if method != "enumerate":
        raise ValueError(f"unknown method {method}")
    return _enumerate_integral(spec, form, coeff_method, guard)


def _enumeration_cost(spec, form, coeff_method):
    layout = _Layout(spec, form)
    ntau = count_tau(spec, layout, coeff_method)
    nsig = prod(factorial(spec.p(a)) ** 2 for a in spec.letters)
    return ntau * nsig


def _dims_factor(spec):
    # words with no letters contribute their dimension
    out = 1
    for i in spec.empty_words():
        out *= weyl_dim(spec.labels[i])
    return out


def _enumerate_integral(spec: WordSpec, form, coeff_method, guard):
    N = spec.N
    layout = _Layout(spec, form)
    ntau = count_tau(spec, layout, coeff_method)
    if ntau > guard:
        raise OverflowError(f"tau enumeration {ntau} exceeds guard {guard}")
    hist = enumerate_histogram(spec, layout, coeff_method)
    total = 0
    for (coef, classes, k), mult in hist.items():
        total += coef * _wg_product(classes, N) * N**k * mult
    return total * _dims_factor(spec)


def enumerate_histogram(spec: WordSpec, layout: _Layout, coeff_method="product") -> dict:
    """Aggregate (tau coefficient, Wg classes, index-class count) -> multiplicity."""
    sig = SigmaTable(spec, layout)
    arr, keys = sig.arrays()
    key_id = {}
    kid = np.empty(len(keys), dtype=np.int64)
    for s, k in enumerate(keys):
        kid[s] = key_id.setdefault(k, len(key_id))
    inv_keys = {v: k for k, v in key_id.items()}
    hist: dict = {}
    for coef, pairs, _ in tau_configurations(spec, layout, coeff_method):
        counts = count_classes_batch(layout.n_nodes, np.asarray(pairs, dtype=np.int64).reshape(-1, 2), arr)
        combo = kid * (layout.n_nodes + 1) + counts
        vals, mult = np.unique(combo, return_counts=True)
        for v, c in zip(vals.tolist(), mult.tolist()):
            key = (coef, inv_keys[v // (layout.n_nodes + 1)], v % (layout.n_nodes + 1))
            hist[key] = hist.get(key, 0) + c
    return hist


def resummed_kernel(spec: WordSpec, sigma_index: int, form="per-letter", coeff_method="product"):
    """sum_tau c(tau) N^{classes(tau, sigma)} for one Weingarten pairing."""
    layout = _Layout(spec, form)
    sig = SigmaTable(spec, layout)
    arr, keys = sig.arrays()
    one = arr[sigma_index:sigma_index + 1]
    total = 0
    for coef, pairs, _ in tau_configurations(spec, layout, coeff_method):
        k = int(count_classes_batch(layout.n_nodes, np.asarray(pairs, dtype=np.int64).reshape(-1, 2), one)[0])
        total += coef * spec.N**k
    return total


# ----------------------------------------------------------- tensor route


def _delta_pattern(N, p, perm_images):
    """0/1 tensor on (x_1..x_p, y_1..y_p) with x_t = y_{perm(t)}, flattened."""
    if p == 0:
        return np.ones(1)
    vals = np.indices((N,) * p).reshape(p, -1)
    out = np.zeros((N,) * (2 * p))
    inv = [0] * p
    for t, s in enumerate(perm_images):
        inv[s] = t
    idx = list(vals) + [vals[inv[s]] for s in range(p)]
    out[tuple(idx)] = 1.0
    return out.reshape(-1)


_ETENSOR: dict = {}
_ELOCK = threading.Lock()


def letter_average_tensor(p: int, N: int) -> np.ndarray:
    """E[U^{(x)p} (x) conj(U)^{(x)p}] as a tensor with legs
    (pos rows, neg rows, pos cols, neg cols), each block of length p."""
    key = (p, N)
    with _ELOCK:
        if key in _ETENSOR:
            return _ETENSOR[key]
    perms = all_permutations(p)
    V = np.stack([_delta_pattern(N, p, a.images) for a in perms])
    G = np.array([[float(wg_perm(a.inverse() * b, N)) for b in perms] for a in perms])
    E = (V.T @ G @ V).reshape((N,) * (4 * p))
    with _ELOCK:
        _ETENSOR[key] = E
    return E


def contract_network(tensors, labels):
    """Contract a closed network where every label occurs exactly twice.

    Greedy pairwise contraction using numpy.einsum on local labels.
    """
    items = []
    for T, lab in zip(tensors, labels):
        items.append(_self_trace(np.asarray(T), list(lab)))
    scalar = 1.0 + 0j
    while len(items) > 1:
        best = None
        for x in range(len(items)):
            for y in range(x + 1, len(items)):
                lx, ly = items[x][1], items[y][1]
                shared = set(lx) & set(ly)
                if not shared and best is not None:
                    continue
                out = [l for l in lx if l not in shared] + [l for l in ly if l not in shared]
                size = np.prod([items[x][0].shape[lx.index(l)] if l in lx else items[y][0].shape[ly.index(l)] for l in out]) if out else 1
                score = (0 if shared else 1, size)
                if best is None or score < best[0]:
                    best = (score, x, y, out)
        _, x, y, out = best
        (A, la), (B, lb) = items[x], items[y]
        letters = {l: chr(97 + k) if k < 26 else chr(65 + k - 26) for k, l in enumerate(dict.fromkeys(la + lb + out))}
        expr = "".join(letters[l] for l in la) + "," + "".join(letters[l] for l in lb) + "->" + "".join(letters[l] for l in out)
        C = np.einsum(expr, A, B)
        items = [it for k, it in enumerate(items) if k not in (x, y)] + [(C, out)]
    if items:
        T, lab = items[0]
        if lab:
            raise ValueError("network is not closed")
        scalar *= complex(T)
    return scalar


def _self_trace(T, lab):
    while True:
        dup = next((l for l in lab if lab.count(l) == 2), None)
        if dup is None:
            return T, lab
        i = lab.index(dup)
        j = lab.index(dup, i + 1)
        T = np.trace(T, axis1=i, axis2=j)
        lab = [l for k, l in enumerate(lab) if k not in (i, j)]


TENSOR_LEG_CAP = 2**22


def tensor_word_integral(spec: WordSpec) -> complex:
    """Dense contraction of the character operators with per-letter Haar averages."""
    if not spec.balanced():
        return 0.0
    N = spec.N
    for a in spec.letters:
        if N ** (4 * spec.p(a)) > TENSOR_LEG_CAP:
            raise OverflowError(f"letter {a}: dense Haar average too large")
    layout = _Layout(spec, "single")
    tensors, labels = [], []
    for i, lab in enumerate(spec.labels):
        if not spec.words[i]:
            continue
        r = lab.n + lab.m
        if r == 0:
            continue
        Q = character_operator(lab).reshape((N,) * (2 * r))
        tensors.append(Q)
        labels.append([layout.node[(i, 0, "t", u)] for u in range(r)] + [layout.node[(i, 0, "b", u)] for u in range(r)])
    for a in spec.letters:
        p = spec.p(a)
        if p == 0:
            continue
        plus = [layout.haar_index(o) for o in spec.S_plus[a]]
        minus = [layout.haar_index(o) for o in spec.S_minus[a]]
        tensors.append(letter_average_tensor(p, N))
        labels.append([x[0] for x in plus] + [x[0] for x in minus] + [x[1] for x in plus] + [x[1] for x in minus])
    val = contract_network(tensors, labels) if tensors else 1.0
    return val * _dims_factor(spec)
