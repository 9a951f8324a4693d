"""Spectral coefficients, topological coefficients and the truncated state sum."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np

from .lattice import Lattice, LoopWord, gauge_fix_word, spanning_tree
from .unitary_rep import HighestWeight, labels_box, weyl_dim
from .weingarten import WordSpec, character_word_integral


class RefusalError(RuntimeError):
    """An engine declined to answer (guard or truncation failure)."""


@dataclass(frozen=True)
class ActionSpec:
    kind: str  # "wilson" or "heat"
    coupling: float

    def __post_init__(self):
        if self.kind not in ("wilson", "heat"):
            raise ValueError(f"unknown action kind {self.kind}")
        if not self.coupling > 0:
            raise ValueError("coupling must be positive")


def casimir(w: HighestWeight) -> int:
    """c2 = sum_i s_i (s_i + N + 1 - 2i) for the signature s (i from 1).

    This is minus the Laplacian eigenvalue on chi_w for the bi-invariant
    metric <X, Y> = Tr(X Y*) on the Lie algebra of U(N).
    """
    s = w.signature
    N = w.N
    return sum(x * (x + N + 1 - 2 * (i + 1)) for i, x in enumerate(s))


def _torus_grid(N, M):
    th = 2 * np.pi * np.arange(M) / M
    grids = np.meshgrid(*([th] * N), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _vandermonde_sq(z):
    N = z.shape[1]
    out = np.ones(z.shape[0])
    for i in range(N):
        for j in range(i + 1, N):
            out *= np.abs(z[:, i] - z[:, j]) ** 2
    return out


def weyl_character_batch(w: HighestWeight, z: np.ndarray) -> np.ndarray:
    """Characters at a batch of eigenvalue tuples z (shape (S, N)), division free."""
    z = np.asarray(z, dtype=complex)
    sig = w.signature
    shift = -min(sig) if min(sig) < 0 else 0
    lam = [x + shift for x in sig if x + shift > 0]
    k = len(lam)
    base = np.prod(z, axis=1) ** (-shift)
    if k == 0:
        return base
    top = lam[0] + k
    h = np.zeros((top + 1, z.shape[0]), dtype=complex)
    h[0] = 1.0
    for i in range(z.shape[1]):
        for d in range(1, top + 1):
            h[d] = h[d] + z[:, i] * h[d - 1]
    M = np.zeros((z.shape[0], k, k), dtype=complex)
    for i in range(k):
        for j in range(k):
            idx = lam[i] - i + j
            if 0 <= idx <= top:
                M[:, i, j] = h[idx]
    return base * np.linalg.det(M)


def _quad_coeff(w: HighestWeight, beta: float, M: int):
    """(coefficient, mean |integrand|); the second sets the roundoff floor."""
    N = w.N
    th = _torus_grid(N, M)
    z = np.exp(1j * th)
    Q = np.exp(beta * np.cos(th).sum(axis=1))
    chi = weyl_character_batch(w, z)
    f = Q * np.conj(chi) * _vandermonde_sq(z) / factorial(N)
    return float(np.mean(f).real), float(np.mean(np.abs(f)))


@lru_cache(maxsize=None)
def _wilson_coeff(key, beta):
    w = HighestWeight(key[0], key[1], key[2])
    grid_cap = {1: 4096, 2: 512, 3: 96, 4: 40}.get(w.N, 24)
    M = 16
    prev, _ = _quad_coeff(w, beta, M)
    while True:
        M *= 2
        if M > grid_cap:
            raise RuntimeError(f"Weyl quadrature did not converge for {w}, beta={beta}")
        cur, scale = _quad_coeff(w, beta, M)
        if abs(cur - prev) <= max(1e-10 * abs(cur), 1e-13 * scale, 1e-16):
            return cur
        prev = cur


def action_coeff(w: HighestWeight, action: ActionSpec, N: int | None = None) -> float:
    """Peter-Weyl coefficient <Q, chi_w> of the plaquette weight."""
    if N is not None and N != w.N:
        raise ValueError("label N mismatch")
    if action.kind == "heat":
        return weyl_dim(w) * float(np.exp(-casimir(w) * action.coupling / 2))
    return _wilson_coeff(w.key(), float(action.coupling))


def _heat_series(action: ActionSpec, z: np.ndarray, N: int, heat_cut: float = 1e-17) -> np.ndarray:
    total = np.zeros(z.shape[0], dtype=complex)
    s = 0
    while True:
        shell = [w for w in labels_box(N, s) if w.n + w.m == s]
        contrib = 0.0
        for w in shell:
            c = action_coeff(w, action)
            total += c * weyl_character_batch(w, z)
            contrib = max(contrib, abs(c) * weyl_dim(w))
        if s > 2 and contrib < heat_cut:
            break
        s += 1
        if s > 60:
            raise RuntimeError("heat kernel character sum did not converge")
    return total.real


def _heat_determinant(t: float, z: np.ndarray, N: int):
    """Heat kernel as det[g_{N-1-a}(z_b)] / Vandermonde(z), with
    g_k(z) = sum_m m^k exp(-t (m - c)^2 / 2) z^m over all integers m.

    Weyl's formula turns sum_lambda d_lambda e^{-t C / 2} chi_lambda into an
    unrestricted sum over shifted weights m = lambda + (N - 1, ..., 0), which
    factorizes letter by letter.  Returns (value, |Vandermonde|).
    """
    c = (N - 1) / 2
    R = int(np.ceil(np.sqrt(90.0 / t))) + N + 2
    m = np.arange(int(np.floor(c)) - R, int(np.ceil(c)) + R + 1)
    gauss = np.exp(-t * (m - c) ** 2 / 2)
    zm = z[:, :, None] ** m[None, None, :]
    G = np.empty((z.shape[0], N, N), dtype=complex)
    for a in range(N):
        G[:, a, :] = (zm * (gauss * m.astype(float) ** (N - 1 - a))).sum(axis=2)
    V = np.ones(z.shape[0], dtype=complex)
    for i in range(N):
        for j in range(i + 1, N):
            V = V * (z[:, i] - z[:, j])
    rho2 = sum(((N + 1) / 2 - i) ** 2 for i in range(1, N + 1))
    D0 = float(np.prod([factorial(k) for k in range(N)]))
    return np.linalg.det(G) / V * np.exp(t * rho2 / 2) / D0, np.abs(V)


def action_value(action: ActionSpec, U: np.ndarray, N: int, method: str = "auto") -> np.ndarray:
    """Pointwise plaquette weight Q(U) for a batch of unitaries (S, N, N).

    The heat kernel uses the determinant form; samples with nearly
    degenerate eigenvalues (or method="series") use the truncated
    character sum instead.
    """
    U = np.asarray(U)
    if action.kind == "wilson":
        return np.exp(action.coupling * np.trace(U, axis1=-2, axis2=-1).real)
    z = np.linalg.eigvals(U)
    if method == "series":
        return _heat_series(action, z, N)
    val, gap = _heat_determinant(action.coupling, z, N)
    out = val.real
    bad = gap < 1e-4
    if bad.any():
        out[bad] = _heat_series(action, z[bad], N)
    return out


def kappa(alpha: dict, action: ActionSpec, N: int) -> float:
    out = 1.0
    for p, w in alpha.items():
        c = action_coeff(w, action)
        if c == 0:
            return 0.0
        out *= c
    return out


# ------------------------------------------------------- topological side


class _WCache:
    """Action-independent cache of topological coefficients."""

    def __init__(self):
        self._lock = threading.Lock()
        self.data: dict = {}
        self.hits = 0
        self.misses = 0

    def get(self, key, build):
        with self._lock:
            if key in self.data:
                self.hits += 1
                return self.data[key]
        val = build()
        with self._lock:
            self.misses += 1
            self.data.setdefault(key, val)
        return val

    def stats(self):
        return {"entries": len(self.data), "hits": self.hits, "misses": self.misses}


W_CACHE = _WCache()


@dataclass
class GaugeFixedProblem:
    lattice: Lattice
    tree: frozenset
    plaquette_words: list
    loop_words: list
    letters: list


def gauge_fixed_problem(lat: Lattice, loops, tree=None) -> GaugeFixedProblem:
    tree = spanning_tree(lat) if tree is None else frozenset(tree)
    pw = [gauge_fix_word(LoopWord(tuple(b)), tree) for b in lat.boundaries]
    lw = [gauge_fix_word(L, tree) for L in loops]
    letters = sorted({e for w in pw + lw for e, _ in w})
    return GaugeFixedProblem(lat, tree, pw, lw, letters)


def _spec_key(words, labels):
    items = sorted((tuple(w), lab.key()) for w, lab in zip(words, labels))
    return tuple(items)


def topological_spec(prob: GaugeFixedProblem, alpha: dict, N: int) -> WordSpec:
    words, labels = [], []
    fund = HighestWeight.fundamental(N)
    for w in prob.loop_words:
        words.append(w)
        labels.append(fund)
    for p, w in enumerate(prob.plaquette_words):
        lab = alpha.get(p)
        if lab is None or lab.is_trivial():
            continue
        words.append(w)
        labels.append(lab)
    return WordSpec(words, labels)


def topological_coeff(lat: Lattice, loops, alpha: dict, N: int, tree=None, method="auto",
                      prob: GaugeFixedProblem | None = None):
    """Haar integral of prod Tr(U_loop) prod chi_{alpha_p}(U_p), after gauge fixing."""
    prob = gauge_fixed_problem(lat, loops, tree) if prob is None else prob
    spec = topological_spec(prob, alpha, N)
    key = (N, method, _spec_key(spec.words, spec.labels))
    return W_CACHE.get(key, lambda: character_word_integral(spec, method=method))


def _charges(word, letters, w: HighestWeight):
    k = w.n - w.m
    v = np.zeros(len(letters), dtype=np.int64)
    pos = {a: i for i, a in enumerate(letters)}
    for a, e in word:
        v[pos[a]] += e * k
    return v


def truncated_labels(N: int, trunc: int, action: ActionSpec | None = None, floor: float = 1e-14):
    labs = labels_box(N, trunc)
    if action is None:
        return labs
    return [w for w in labs if abs(action_coeff(w, action)) >= floor]


def balanced_alphas(prob: GaugeFixedProblem, labels_per_plaquette, with_loops: bool):
    """Label assignments passing the letter balance test, as index tuples."""
    letters = prob.letters
    P = len(prob.plaquette_words)
    base = np.zeros(len(letters), dtype=np.int64)
    if with_loops:
        fund = HighestWeight.fundamental(labels_per_plaquette[0][0].N)
        for w in prob.loop_words:
            base += _charges(w, letters, fund)
    if P == 0:
        return [()] if not base.any() else []
    charge = [np.stack([_charges(prob.plaquette_words[p], letters, w) for w in labels_per_plaquette[p]]) for p in range(P)]
    # combine plaquette by plaquette, keeping index tuples
    combos = np.zeros((1, 0), dtype=np.int64)
    tot = base[None, :]
    for p in range(P):
        n = len(labels_per_plaquette[p])
        combos = np.concatenate([np.repeat(combos, n, axis=0), np.tile(np.arange(n), len(combos))[:, None]], axis=1)
        tot = np.repeat(tot, n, axis=0) + np.tile(charge[p], (len(tot), 1))
        # letters that no later plaquette touches must already balance
        later = set()
        for q in range(p + 1, P):
            later.update(e for e, _ in prob.plaquette_words[q])
        fixed = [i for i, a in enumerate(letters) if a not in later]
        if fixed:
            ok = ~tot[:, fixed].any(axis=1)
            combos, tot = combos[ok], tot[ok]
    ok = ~tot.any(axis=1)
    return [tuple(r) for r in combos[ok].tolist()]


@dataclass
class StateSumResult:
    value: float
    numerator: float
    denominator: float
    shell: float
    numerator_shell: float
    denominator_shell: float
    n_alpha: int
    truncation: int
    cache: dict = field(default_factory=dict)


def state_sum_terms(lat, loops, action, N, trunc, floor=1e-14, tree=None, method="auto", prob=None):
    """Yield (alpha dict, kappa, W-hat, max label size) over the truncated balanced box."""
    prob = gauge_fixed_problem(lat, loops, tree) if prob is None else prob
    labs = truncated_labels(N, trunc, action, floor)
    P = len(lat.plaquettes)
    for combo in balanced_alphas(prob, [labs] * P, with_loops=bool(loops)):
        alpha = {p: labs[i] for p, i in enumerate(combo)}
        k = kappa(alpha, action, N)
        if k == 0:
            continue
        W = topological_coeff(lat, loops, alpha, N, method=method, prob=prob)
        if W == 0:
            continue
        size = max((w.n + w.m for w in alpha.values()), default=0)
        yield alpha, k, W, size


def partition_sum(lat, loops, action, N, trunc, floor=1e-14, tree=None, method="auto"):
    """(sum_alpha kappa W, last-shell part, number of terms)."""
    prob = gauge_fixed_problem(lat, loops, tree)
    total = 0.0
    shell = 0.0
    n = 0
    for alpha, k, W, size in state_sum_terms(lat, loops, action, N, trunc, floor, tree, method, prob):
        term = k * complex(W)
        total += term
        if size == trunc:
            shell += term
        n += 1
    return total, shell, n


def default_truncation(N: int) -> int:
    return 20 if N == 1 else 3


def wilson_expectation_statesum(lat: Lattice, loops, action: ActionSpec, N: int, truncation: int | None = None,
                                floor: float = 1e-14, tree=None, method="auto") -> StateSumResult:
    """Ratio form: truncated sum with loops divided by the same sum without."""
    s = default_truncation(N) if truncation is None else truncation
    den, den_shell, n0 = partition_sum(lat, [], action, N, s, floor, tree, method)
    if abs(den) <= floor or abs(den_shell) >= 0.5 * abs(den):
        raise RefusalError(f"denominator {den:.3e} (shell {abs(den_shell):.3e}) too small for truncation {s}")
    if not loops:
        num, num_shell, n1 = den, den_shell, n0
    else:
        num, num_shell, n1 = partition_sum(lat, loops, action, N, s, floor, tree, method)
    val = num / den
    shell = abs(num_shell) / abs(den) + abs(val) * abs(den_shell) / abs(den)
    return StateSumResult(
        value=complex(val).real if abs(complex(val).imag) < 1e-12 else complex(val),
        numerator=num, denominator=den, shell=float(shell),
        numerator_shell=float(abs(num_shell)), denominator_shell=float(abs(den_shell)),
        n_alpha=n0 + (n1 if loops else 0), truncation=s, cache=W_CACHE.stats(),
    )
