"""Rational representations of U(N): weights, characters, mixed tensor projectors."""
from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np

from .algebra_core import Partition, all_permutations, as_partition, partitions_of, sym_character
from .brauer import (
    WalledBrauerDiagram,
    algebra_product,
    dense_rho,
    enumerate_walled,
)

DENSE_CAP = 20000


@dataclass(frozen=True)
class HighestWeight:
    lambda_plus: Partition
    lambda_minus: Partition
    N: int

    def __post_init__(self):
        object.__setattr__(self, "lambda_plus", as_partition(self.lambda_plus))
        object.__setattr__(self, "lambda_minus", as_partition(self.lambda_minus))
        if len(self.lambda_plus) + len(self.lambda_minus) > self.N:
            raise ValueError(f"weight {self} is not admissible for N={self.N}")

    @classmethod
    def from_signature(cls, sig) -> "HighestWeight":
        sig = [int(x) for x in sig]
        if any(sig[i] < sig[i + 1] for i in range(len(sig) - 1)):
            raise ValueError("signature must be nonincreasing")
        plus = [x for x in sig if x > 0]
        minus = sorted((-x for x in sig if x < 0), reverse=True)
        return cls(Partition(tuple(plus)), Partition(tuple(minus)), len(sig))

    @classmethod
    def trivial(cls, N) -> "HighestWeight":
        return cls(Partition(), Partition(), N)

    @classmethod
    def fundamental(cls, N, dual=False) -> "HighestWeight":
        return cls(Partition(()), Partition((1,)), N) if dual else cls(Partition((1,)), Partition(()), N)

    @property
    def n(self) -> int:
        return self.lambda_plus.size

    @property
    def m(self) -> int:
        return self.lambda_minus.size

    @property
    def signature(self) -> tuple:
        lp, lm = self.lambda_plus.parts, self.lambda_minus.parts
        zeros = self.N - len(lp) - len(lm)
        return tuple(lp) + (0,) * zeros + tuple(-x for x in reversed(lm))

    def dual(self) -> "HighestWeight":
        return HighestWeight(self.lambda_minus, self.lambda_plus, self.N)

    def is_trivial(self) -> bool:
        return self.n == 0 and self.m == 0

    def __repr__(self):
        return f"[{self.lambda_plus},{self.lambda_minus}]_{self.N}"

    def key(self) -> tuple:
        return (self.lambda_plus.parts, self.lambda_minus.parts, self.N)


def labels_box(N: int, s: int) -> list[HighestWeight]:
    """Admissible weights with |lambda+| + |lambda-| <= s, deterministic order."""
    out = []
    for tot in range(s + 1):
        for n in range(tot, -1, -1):
            m = tot - n
            for lp in partitions_of(n, N):
                for lm in partitions_of(m, N - len(lp)):
                    out.append(HighestWeight(lp, lm, N))
    return out


def weyl_dim(w: HighestWeight) -> int:
    s = w.signature
    N = w.N
    num = 1
    den = 1
    for i in range(N):
        for j in range(i + 1, N):
            num *= s[i] - s[j] + j - i
            den *= j - i
    return num // den


def _complete_h(z: np.ndarray, kmax: int) -> np.ndarray:
    # h_k(z_1..z_N) by adding one variable at a time; no division anywhere
    h = np.zeros(kmax + 1, dtype=complex)
    h[0] = 1.0
    for zi in z:
        for k in range(1, kmax + 1):
            h[k] = h[k] + zi * h[k - 1]
    return h


def _schur_jacobi_trudi(lam: tuple, z: np.ndarray) -> complex:
    lam = [x for x in lam if x > 0]
    k = len(lam)
    if k == 0:
        return 1.0 + 0j
    top = lam[0] + k
    h = _complete_h(z, top)
    M = np.zeros((k, k), dtype=complex)
    for i in range(k):
        for j in range(k):
            idx = lam[i] - i + j
            M[i, j] = h[idx] if 0 <= idx <= top else 0.0
    return complex(np.linalg.det(M))


def _bialternant(sig: tuple, z: np.ndarray) -> complex:
    N = len(z)
    num = np.array([[zi ** (sig[j] + N - 1 - j) for j in range(N)] for zi in z])
    den = np.array([[zi ** (N - 1 - j) for j in range(N)] for zi in z])
    return complex(np.linalg.det(num) / np.linalg.det(den))


def weyl_character(w: HighestWeight, eigenphases, method: str = "auto") -> complex:
    """chi_w at a unitary with the given eigenvalues.

    ``method`` is "bialternant" (ratio of determinants), "jacobi-trudi"
    (shifted Schur polynomial, division free) or "auto", which uses the
    determinant ratio when eigenvalues are well separated and the
    division-free form otherwise.
    """
    z = np.asarray(eigenphases, dtype=complex)
    if z.shape != (w.N,):
        raise ValueError(f"need {w.N} eigenvalues, got {z.shape}")
    if np.max(np.abs(np.abs(z) - 1.0)) > 1e-9:
        raise ValueError("eigenvalues must lie on the unit circle")
    sig = w.signature
    if method == "auto":
        gaps = [abs(z[i] - z[j]) for i in range(w.N) for j in range(i + 1, w.N)]
        method = "bialternant" if (not gaps or min(gaps) > 1e-2) else "jacobi-trudi"
    if method == "bialternant":
        return _bialternant(sig, z)
    if method == "jacobi-trudi":
        shift = -min(sig) if sig and min(sig) < 0 else 0
        lam = tuple(x + shift for x in sig)
        return complex(np.prod(z) ** (-shift) * _schur_jacobi_trudi(lam, z))
    raise ValueError(f"unknown method {method}")


def character_of_matrix(w: HighestWeight, U: np.ndarray) -> complex:
    return weyl_character(w, np.linalg.eigvals(U), method="jacobi-trudi")


@dataclass
class MixedTensorOperator:
    n: int
    m: int
    N: int
    entries: np.ndarray
    tolerance: float = 1e-9

    def __post_init__(self):
        d = self.N ** (self.n + self.m)
        if self.entries.shape != (d, d):
            raise ValueError("operator shape inconsistent with (n, m, N)")

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.entries))


def _check_cap(n, m, N, cap=None):
    cap = DENSE_CAP if cap is None else cap
    if N ** (n + m) > cap:
        raise ValueError(f"dense mixed tensor space too large: N^(n+m) = {N ** (n + m)} > {cap}")


def contraction_diagrams(n, m) -> list[WalledBrauerDiagram]:
    return [WalledBrauerDiagram.contraction(n, m, i, j) for i in range(n) for j in range(m)]


def build_A(n: int, m: int, N: int) -> MixedTensorOperator:
    """Sum over (i, j) of coevaluation after contraction of slots i and j."""
    _check_cap(n, m, N)
    dim = N ** (n + m)
    A = np.zeros((dim, dim))
    for d in contraction_diagrams(n, m):
        A += dense_rho(d, N)
    return MixedTensorOperator(n, m, N, A)


def _perm_diagram(n, m, sig, mu) -> WalledBrauerDiagram:
    return WalledBrauerDiagram(n, m, tuple(sig.images) + tuple(n + x for x in mu.images))


def young_idempotent_map(lam: Partition, mu: Partition) -> dict:
    """Central idempotent of S_n x S_m for the irrep lam (x) mu, as diagram -> Fraction."""
    n, m = lam.size, mu.size
    out = {}
    dl = sym_character(lam, (1,) * n) if n else 1
    dm = sym_character(mu, (1,) * m) if m else 1
    from .algebra_core import cycle_type

    pn = all_permutations(n)
    pm = all_permutations(m)
    cn = {s: (sym_character(lam, cycle_type(s)) if n else 1) for s in pn}
    cm = {t: (sym_character(mu, cycle_type(t)) if m else 1) for t in pm}
    for s in pn:
        for t in pm:
            c = Fraction(dl * dm * cn[s] * cm[t], factorial(n) * factorial(m))
            if c:
                out[_perm_diagram(n, m, s, t)] = c
    return out


def _dense_from_map(coeffs: dict, n, m, N) -> np.ndarray:
    dim = N ** (n + m)
    out = np.zeros((dim, dim))
    for d, c in coeffs.items():
        out += float(c) * dense_rho(d, N)
    return out


def goncharov_eigenvalues(w: HighestWeight, tol: float = 1e-7) -> list[int]:
    """Distinct nonzero eigenvalues of A on the (lambda, mu)-isotypic part of T_{n,m}."""
    n, m, N = w.n, w.m, w.N
    Pi = _dense_from_map(young_idempotent_map(w.lambda_plus, w.lambda_minus), n, m, N)
    A = build_A(n, m, N).entries
    # A commutes with Pi; restrict through an orthonormal basis of range(Pi)
    vals, vecs = np.linalg.eigh(Pi)
    basis = vecs[:, vals > 0.5]
    if basis.shape[1] == 0:
        return []
    spec = np.linalg.eigvalsh(basis.T @ A @ basis)
    out = []
    for x in spec:
        if abs(x) < tol:
            continue
        if not any(abs(x - y) < tol for y in out):
            out.append(float(x))
    ints = []
    for x in sorted(out):
        r = round(x)
        if abs(x - r) > 1e-6:
            raise ArithmeticError(f"non-integer contraction eigenvalue {x}")
        ints.append(int(r))
    return ints


class _ProjectorCache:
    def __init__(self):
        self._lock = threading.Lock()
        self._dense: dict = {}
        self._coeffs: dict = {}

    def get(self, table, key, build):
        with self._lock:
            if key in table:
                return table[key]
        val = build()
        with self._lock:
            table.setdefault(key, val)
            return table[key]


_CACHE = _ProjectorCache()


def _trivial_N1(w: HighestWeight) -> bool:
    return w.N == 1


def isotypic_projector(w: HighestWeight, tol: float = 1e-8) -> MixedTensorOperator:
    """P^{[lambda+, lambda-]}_N on T_{n,m}, built by two independent routes."""
    n, m, N = w.n, w.m, w.N
    if _trivial_N1(w):
        # T_{n,m} is one-dimensional and S_n x S_m acts trivially on it
        return MixedTensorOperator(n, m, 1, np.ones((1, 1)))
    _check_cap(n, m, N)

    def build():
        Pi = _dense_from_map(young_idempotent_map(w.lambda_plus, w.lambda_minus), n, m, N)
        A = build_A(n, m, N).entries
        # route 1: orthogonal projector onto the traceless subspace ker(A)
        vals, vecs = np.linalg.eigh(A)
        ker = vecs[:, np.abs(vals) < 1e-7]
        P0 = ker @ ker.T
        P1 = P0 @ Pi
        # route 2: product formula on the isotypic piece
        P2 = Pi.copy()
        for a in goncharov_eigenvalues(w):
            P2 = P2 @ (np.eye(A.shape[0]) - A / a)
        err = np.linalg.norm(P1 - P2)
        if err > tol:
            raise ArithmeticError(f"projector routes disagree for {w}: {err:.3e}")
        return P2

    P = _CACHE.get(_CACHE._dense, w.key(), build)
    return MixedTensorOperator(n, m, N, P)


def expand_projector_in_diagrams(w: HighestWeight, method: str = "product", tol: float = 1e-9) -> dict:
    """Coefficients c(tau) with P = sum_tau c(tau) rho_N(tau).

    "product": exact rationals from the product formula evaluated inside
    the walled Brauer algebra with loop weight N (valid for every N since
    rho_N is an algebra map).  "lstsq": minimum-norm least squares against
    the dense diagram matrices.
    """
    n, m, N = w.n, w.m, w.N
    if _trivial_N1(w):
        return {WalledBrauerDiagram.identity(n, m): Fraction(1)}

    def build():
        if method == "product":
            coeffs = young_idempotent_map(w.lambda_plus, w.lambda_minus)
            A = {d: Fraction(1) for d in contraction_diagrams(n, m)}
            one = WalledBrauerDiagram.identity(n, m)
            for a in goncharov_eigenvalues(w):
                factor = {one: Fraction(1)}
                for d, c in A.items():
                    factor[d] = factor.get(d, 0) - c / a
                coeffs = algebra_product(coeffs, factor, N)
            return coeffs
        if method == "lstsq":
            ds = enumerate_walled(n, m)
            P = isotypic_projector(w).entries
            M = np.stack([dense_rho(d, N).ravel() for d in ds], axis=1)
            sol, *_ = np.linalg.lstsq(M, P.ravel(), rcond=None)
            return {d: float(c) for d, c in zip(ds, sol) if abs(c) > 1e-13}
        raise ValueError(f"unknown method {method}")

    coeffs = _CACHE.get(_CACHE._coeffs, (w.key(), method), build)
    if N ** (n + m) <= DENSE_CAP:
        P = isotypic_projector(w).entries
        res = np.linalg.norm(_dense_from_map(coeffs, n, m, N) - P)
        if res > tol:
            raise ArithmeticError(f"diagram expansion of {w} does not reconstruct P: {res:.3e}")
    return coeffs


def multiplicity(w: HighestWeight) -> int:
    """Dimension of the symmetric-group factor of the isotypic component."""
    f1 = sym_character(w.lambda_plus, (1,) * w.n) if w.n else 1
    f2 = sym_character(w.lambda_minus, (1,) * w.m) if w.m else 1
    return f1 * f2


def character_coefficients(w: HighestWeight, method: str = "product") -> dict:
    """Diagram coefficients of P / multiplicity, whose trace against
    rho(U) is exactly the character chi_w(U)."""
    if w.N == 1:
        return expand_projector_in_diagrams(w, method)
    f = multiplicity(w)
    return {d: c / f for d, c in expand_projector_in_diagrams(w, method).items()}


def character_operator(w: HighestWeight) -> np.ndarray:
    if w.N == 1:
        return np.ones((1, 1))
    return isotypic_projector(w).entries / multiplicity(w)


def projector_character(w: HighestWeight, U: np.ndarray) -> complex:
    """chi_w(U) as a trace over the mixed tensor space."""
    from .brauer import mixed_tensor_rep

    if w.N == 1:
        return complex(U[0, 0] ** w.n * np.conj(U[0, 0]) ** w.m)
    return complex(np.trace(character_operator(w) @ mixed_tensor_rep(U, w.n, w.m)))


def is_stable(w: HighestWeight) -> bool:
    return w.N >= w.n + w.m


def traceless_dimension(n: int, m: int, N: int) -> int:
    A = build_A(n, m, N).entries
    return int(np.sum(np.abs(np.linalg.eigvalsh(A)) < 1e-7))
