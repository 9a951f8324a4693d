"""Loop surgeries, the loop Laplacian, local recoupling at plaquette incidences
and residuals of the coefficientwise and Wilson master loop equations.

Words are tuples of lattice letters (edge, sign).  The active edge e is
read with the lattice orientation: an occurrence (e, +1) is of type A and
(e, -1) of type B.  Every surgery result is cyclically reduced.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .brauer import trace_cycles
from .lattice import Lattice, LoopWord
from .state_sum import (
    ActionSpec,
    _torus_grid,
    _vandermonde_sq,
    topological_coeff,
    weyl_character_batch,
)
from .unitary_rep import (
    HighestWeight,
    character_coefficients,
    character_operator,
    labels_box,
)
from .weingarten import cyclic_reduce

MIN_MC_SAMPLES = 1_000_000


# ------------------------------------------------------------ u(N) basis


def u_basis(N: int) -> np.ndarray:
    """Orthonormal basis of u(N) for <X, Y> = Tr(X Y^*), shape (N^2, N, N)."""
    out = []
    s = 1 / np.sqrt(2)
    for j in range(N):
        for k in range(j + 1, N):
            X = np.zeros((N, N), dtype=complex)
            X[j, k], X[k, j] = s, -s
            out.append(X)
            Y = np.zeros((N, N), dtype=complex)
            Y[j, k] = Y[k, j] = 1j * s
            out.append(Y)
    for j in range(N):
        X = np.zeros((N, N), dtype=complex)
        X[j, j] = 1j
        out.append(X)
    return np.array(out)


def magic_residuals(N: int, rng=None) -> tuple:
    """Max deviations of sum X^2 = -N I, sum X A X = -Tr(A) I and
    sum Tr(XA)Tr(XB) = -Tr(AB) at random complex A, B."""
    rng = np.random.default_rng(0) if rng is None else rng
    X = u_basis(N)
    A = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    B = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    I = np.eye(N)
    r1 = np.abs(np.einsum("aij,ajk->ik", X, X) + N * I).max()
    r2 = np.abs(np.einsum("aij,jk,akl->il", X, A, X) + np.trace(A) * I).max()
    r3 = abs(np.einsum("aij,ji->a", X, A) @ np.einsum("aij,ji->a", X, B) + np.trace(A @ B))
    return float(r1), float(r2), float(r3)


# ------------------------------------------------------------ surgeries


def _inv(word) -> tuple:
    return tuple((a, -s) for a, s in reversed(word))


def _red(word) -> tuple:
    return tuple(cyclic_reduce(list(word)))


def _active(word, e):
    return [(r, 1 if s > 0 else -1) for r, (a, s) in enumerate(word) if a == e]


def _marked(word, r, s) -> tuple:
    """The word M_x with d/dt Tr(word) = s Tr(X M_x) at occurrence r."""
    if s > 0:
        return tuple(word[r:]) + tuple(word[:r])
    return tuple(word[r + 1:]) + tuple(word[:r + 1])


@dataclass(frozen=True)
class SurgeryResult:
    kind: str  # split+, split-, merge+, merge-, deform+, deform-
    family: tuple  # tuple of reduced words
    multiplicity: int
    site: tuple


def surgery_multisets(loops, e: int, lat: Lattice | None = None) -> dict:
    """Splittings and mergers at edge e (ordered pairs of active occurrences),
    and, if a lattice is given, deformations per plaquette containing e."""
    words = tuple(tuple(w.letters if isinstance(w, LoopWord) else w) for w in loops)
    k = len(words)
    out = {"S+": [], "S-": [], "M+": [], "M-": []}
    act = [_active(w, e) for w in words]
    for i, w in enumerate(words):
        rest_before, rest_after = words[:i], words[i + 1:]
        for x, sx in act[i]:
            for y, sy in act[i]:
                if x == y:
                    continue
                # rotate so that occurrence x comes first
                L = len(w)
                rot = tuple(w[x:]) + tuple(w[:x])
                yy = (y - x) % L
                if sx > 0 and sy > 0:
                    P, Q = rot[1:yy], rot[yy + 1:]
                    parts = ((e, 1),) + P, ((e, 1),) + Q
                    kind = "split+"
                elif sx < 0 and sy < 0:
                    P, Q = rot[1:yy], rot[yy + 1:]
                    parts = P + ((e, -1),), Q + ((e, -1),)
                    kind = "split+"
                else:
                    P, Q = rot[1:yy], rot[yy + 1:]
                    parts = P, Q
                    kind = "split-"
                fam = rest_before + (_red(parts[0]), _red(parts[1])) + rest_after
                out["S+" if kind == "split+" else "S-"].append(SurgeryResult(kind, fam, 1, (e, i, x, y)))
        for j in range(k):
            if j == i:
                continue
            for x, sx in act[i]:
                for y, sy in act[j]:
                    merged = _red(_marked(w, x, sx) + _marked(words[j], y, sy))
                    fam = tuple(merged if t == i else words[t] for t in range(k) if t != j)
                    key = "M+" if sx == sy else "M-"
                    out[key].append(SurgeryResult("merge" + key[1], fam, 1, (e, i, x, j, y)))
    if lat is not None:
        out["D+"], out["D-"] = {}, {}
        for p in lat.plaquettes_containing(e):
            H = plaquette_word_at(lat, p, e)
            dp, dm = [], []
            for i, w in enumerate(words):
                for x, sx in act[i]:
                    M = _marked(w, x, sx)
                    same = _red(M + (H if sx > 0 else _inv(H)))
                    opp = _red(M + (_inv(H) if sx > 0 else H))
                    fam_p = words[:i] + (same,) + words[i + 1:]
                    fam_m = words[:i] + (opp,) + words[i + 1:]
                    dp.append(SurgeryResult("deform+", fam_p, 1, (e, i, x, p)))
                    dm.append(SurgeryResult("deform-", fam_m, 1, (e, i, x, p)))
            out["D+"][p], out["D-"][p] = dp, dm
    n0 = len(words)
    for key, delta in (("S+", 1), ("S-", 1), ("M+", -1), ("M-", -1)):
        for r in out[key]:
            assert len(r.family) == n0 + delta
    for key in ("D+", "D-"):
        for lst in out.get(key, {}).values():
            for r in lst:
                assert len(r.family) == n0
    return out


def plaquette_word_at(lat: Lattice, p: int, e: int) -> tuple:
    """Boundary of p oriented so that e is traversed positively, starting at e."""
    b = tuple(lat.boundaries[p])
    for r, (a, s) in enumerate(b):
        if a == e:
            if s < 0:
                b = _inv(b)
                r = len(b) - 1 - r
            return tuple(b[r:]) + tuple(b[:r])
    raise ValueError(f"edge {e} not on plaquette {p}")


def plaquette_orientation(lat: Lattice, p: int, e: int) -> int:
    for a, s in lat.boundaries[p]:
        if a == e:
            return s
    raise ValueError(f"edge {e} not on plaquette {p}")


def multiplicity(loops, e) -> int:
    return sum(len(_active(tuple(w.letters if isinstance(w, LoopWord) else w), e)) for w in loops)


# ----------------------------------------------------- pointwise Laplacian


def _holonomy(word, U: dict, N: int) -> np.ndarray:
    M = np.eye(N, dtype=complex)
    for a, s in word:
        M = M @ (U[a] if s > 0 else U[a].conj().T)
    return M


def family_value(family, U: dict, N: int) -> complex:
    v = 1.0 + 0j
    for w in family:
        v *= np.trace(_holonomy(w, U, N))
    return v


def _series_trace(word, U, N, e, X):
    """Order-2 Taylor coefficients of Tr(word) under U_e -> exp(tX) U_e."""
    I = np.eye(N, dtype=complex)
    acc = [I, np.zeros_like(I), np.zeros_like(I)]
    for a, s in word:
        A = U[a] if s > 0 else U[a].conj().T
        if a != e:
            f = [A, None, None]
        elif s > 0:
            f = [A, X @ A, X @ X @ A / 2]
        else:
            f = [A, -A @ X, A @ X @ X / 2]
        new = [acc[0] @ f[0], acc[1] @ f[0], acc[2] @ f[0]]
        if f[1] is not None:
            new[1] = new[1] + acc[0] @ f[1]
            new[2] = new[2] + acc[1] @ f[1] + acc[0] @ f[2]
        acc = new
    return np.array([np.trace(m) for m in acc])


def _series_mul(a, b):
    return np.array([a[0] * b[0], a[0] * b[1] + a[1] * b[0], a[0] * b[2] + a[1] * b[1] + a[2] * b[0]])


def _family_series(family, U, N, e, X):
    acc = np.array([1.0 + 0j, 0j, 0j])
    for w in family:
        acc = _series_mul(acc, _series_trace(w, U, N, e, X))
    return acc


def laplacian_direct(loops, e, U: dict, N: int) -> complex:
    """sum_a d^2/dt^2 W_L(exp(t X_a) U_e) at t = 0."""
    words = tuple(tuple(w.letters if isinstance(w, LoopWord) else w) for w in loops)
    tot = 0j
    for X in u_basis(N):
        tot += 2 * _family_series(words, U, N, e, X)[2]
    return tot


def laplacian_surgery(loops, e, U: dict, N: int) -> complex:
    words = tuple(tuple(w.letters if isinstance(w, LoopWord) else w) for w in loops)
    ms = surgery_multisets(words, e)
    val = -N * multiplicity(words, e) * family_value(words, U, N)
    for key, sign in (("S-", 1), ("S+", -1), ("M-", 1), ("M+", -1)):
        for r in ms[key]:
            val += sign * r.multiplicity * family_value(r.family, U, N)
    return val


def loop_laplacian_pointwise(loops, e, U: dict, N: int) -> tuple:
    """(direct second derivatives, surgery combination, |difference|)."""
    a = laplacian_direct(loops, e, U, N)
    b = laplacian_surgery(loops, e, U, N)
    return a, b, abs(a - b)


# ------------------------------------------------------------- recoupling


@dataclass(frozen=True)
class RecouplingTerm:
    edge: int
    plaquette: int
    family: tuple
    beta: HighestWeight
    coefficient: Fraction


@lru_cache(maxsize=None)
def power_sum_expansion(js: tuple, N: int) -> tuple:
    """prod_j Tr(H^j) = sum_beta d_beta chi_beta(H); returns ((beta, d_beta), ...)."""
    if not js:
        return ((HighestWeight.trivial(N), 1),)
    charge = sum(js)
    size = sum(abs(j) for j in js)
    cands = [w for w in labels_box(N, size) if w.n - w.m == charge]
    M = 2 * (size + N) + 2
    th = _torus_grid(N, M)
    z = np.exp(1j * th)
    weight = _vandermonde_sq(z) / (M**N * np.prod(range(1, N + 1)))
    f = np.ones(len(z), dtype=complex)
    for j in js:
        f *= (z**j).sum(axis=1)
    out = []
    recon = np.zeros(len(z), dtype=complex)
    for w in cands:
        ch = weyl_character_batch(w, z)
        d = complex(np.sum(f * np.conj(ch) * weight))
        di = round(d.real)
        if abs(d - di) > 1e-8:
            raise AssertionError(f"non-integer character multiplicity {d}")
        if di:
            out.append((w, di))
            recon += di * ch
    if np.abs(recon - f).max() > 1e-8:
        raise AssertionError("character projection residual too large")
    return tuple(out)


def _cycle_powers(d, u):
    """Net power of the cycle through slot u and the powers of the others."""
    k, js = None, []
    for cyc in trace_cycles(d):
        pw = sum(1 if s < d.n else -1 for s, _ in cyc)
        if any(s == u for s, _ in cyc):
            k = pw
        else:
            js.append(pw)
    return k, tuple(sorted(js))


def recoupling_coefficients(e: int, p: int, alpha_p: HighestWeight, loops, lat: Lattice) -> list:
    """Grouped terms b (family, beta) of the mixed term at incidence (e, p).

    sum_a dW_L d chi_{alpha_p}(U_p) = sum b W_family(U) chi_beta(U_p).
    """
    words = tuple(tuple(w.letters if isinstance(w, LoopWord) else w) for w in loops)
    if alpha_p.is_trivial():
        return []
    orient = plaquette_orientation(lat, p, e)
    lab = alpha_p if orient > 0 else alpha_p.dual()
    H = plaquette_word_at(lat, p, e)
    N = lab.N
    coeffs = character_coefficients(lab)
    groups: dict = {}
    for i, w in enumerate(words):
        for x, sx in _active(w, e):
            M = _marked(w, x, sx)
            for u in range(lab.n + lab.m):
                su = 1 if u < lab.n else -1
                for d, c in coeffs.items():
                    if c == 0:
                        continue
                    k, js = _cycle_powers(d, u)
                    Hk = H * k if k >= 0 else _inv(H) * (-k)
                    fam = words[:i] + (_red(M + Hk),) + words[i + 1:]
                    for beta, db in power_sum_expansion(js, N):
                        b = beta if orient > 0 else beta.dual()
                        key = (fam, b.signature)
                        groups[key] = groups.get(key, 0) + Fraction(c) * (-sx * su) * db
    out = []
    for (fam, sig), c in groups.items():
        if c != 0:
            out.append(RecouplingTerm(e, p, fam, HighestWeight.from_signature(sig), c))
    return out


def mixed_term_direct(e, p, alpha_p: HighestWeight, loops, lat: Lattice, U: dict) -> complex:
    """sum_a (d_a W_L)(d_a chi_{alpha_p}(U_p)) by explicit first derivatives."""
    from .brauer import mixed_tensor_rep

    words = tuple(tuple(w.letters if isinstance(w, LoopWord) else w) for w in loops)
    N = alpha_p.N
    b = tuple(lat.boundaries[p])
    Q = character_operator(alpha_p)
    n, m = alpha_p.n, alpha_p.m
    # U_p = A U_e^s B for the (single) occurrence of e in the boundary
    r = next(k for k, (a, _) in enumerate(b) if a == e)
    s = b[r][1]
    A = _holonomy(b[:r], U, N)
    B = _holonomy(b[r + 1:], U, N)
    Ue = U[e] if s > 0 else U[e].conj().T
    rA, rB, rE = (mixed_tensor_rep(Z, n, m) for Z in (A, B, Ue))
    tot = 0j
    for X in u_basis(N):
        dW = _family_series(words, U, N, e, X)[1]
        # derivative of rho(U_e^s) under U_e -> exp(tX) U_e
        dE = X @ Ue if s > 0 else -Ue @ X
        drho = np.zeros_like(rE)
        for u in range(n + m):
            facs = []
            for v in range(n + m):
                base = Ue if v < n else Ue.conj()
                if v == u:
                    base = dE if v < n else dE.conj()
                facs.append(base)
            t = np.ones((1, 1), dtype=complex)
            for f in facs:
                t = np.kron(t, f)
            drho = drho + t
        dchi = np.trace(Q @ rA @ drho @ rB)
        tot += dW * dchi
    return complex(tot)


def mixed_term_recoupled(e, p, alpha_p, loops, lat, U: dict) -> complex:
    from .unitary_rep import character_of_matrix

    N = alpha_p.N
    Up = _holonomy(tuple(lat.boundaries[p]), U, N)
    tot = 0j
    for t in recoupling_coefficients(e, p, alpha_p, loops, lat):
        tot += float(t.coefficient) * family_value(t.family, U, N) * character_of_matrix(t.beta, Up)
    return tot


# ----------------------------------------------------- coefficientwise MLE


@dataclass
class MasterResidual:
    residual: complex
    loop_part: complex
    mixed_part: complex
    references: list  # (family, alpha) pairs the equation touched


def _w(lat, fam, alpha, N, refs, method):
    refs.append((fam, tuple(sorted((p, w.signature) for p, w in alpha.items()))))
    loops = [LoopWord(tuple(w)) for w in fam]
    return complex(topological_coeff(lat, loops, alpha, N, method=method))


def master_equation_residual(lat: Lattice, loops, alpha: dict, e: int, N: int, method="auto") -> MasterResidual:
    """|(L_e W)(alpha) + sum_{p contains e} (B_{e,p} W)(alpha)|."""
    words = tuple(tuple(w.letters if isinstance(w, LoopWord) else w) for w in loops)
    refs: list = []
    if not words:
        return MasterResidual(0j, 0j, 0j, refs)
    ms = surgery_multisets(words, e)
    m = multiplicity(words, e)
    loop = 0j
    if m:
        loop -= N * m * _w(lat, words, alpha, N, refs, method)
    for key, sign in (("S-", 1), ("S+", -1), ("M-", 1), ("M+", -1)):
        for r in ms[key]:
            loop += sign * r.multiplicity * _w(lat, r.family, alpha, N, refs, method)
    mixed = 0j
    for p in lat.plaquettes_containing(e):
        ap = alpha.get(p, HighestWeight.trivial(N))
        for t in recoupling_coefficients(e, p, ap, words, lat):
            a2 = dict(alpha)
            a2[p] = t.beta
            mixed += float(t.coefficient) * _w(lat, t.family, a2, N, refs, method)
    return MasterResidual(loop + mixed, loop, mixed, refs)


# -------------------------------------------------------- Wilson identity


@dataclass
class WilsonResidual:
    residual: float
    stderr: float
    samples: int
    n_terms: int

    def within(self, nsigma=3.0) -> bool:
        return abs(self.residual) <= nsigma * self.stderr


def wilson_master_terms(lat: Lattice, loops) -> list:
    """(coefficient exponent data) for N|L|phi(L) - RHS = 0 as a list of
    (family, kind) with kind in {lhs, D+, D-, S+, S-, M+, M-}."""
    words = tuple(tuple(w.letters if isinstance(w, LoopWord) else w) for w in loops)
    terms = [(words, "lhs")]
    edges = sorted({a for w in words for a, _ in w})
    for e in edges:
        ms = surgery_multisets(words, e, lat)
        for key in ("S+", "S-", "M+", "M-"):
            terms += [(r.family, key) for r in ms[key]]
        for key in ("D+", "D-"):
            for lst in ms[key].values():
                terms += [(r.family, key) for r in lst]
    return terms


def wilson_master_residual(lat: Lattice, loops, beta: float, N: int, samples: int = MIN_MC_SAMPLES,
                           seed: int = 0, floor: int = MIN_MC_SAMPLES) -> WilsonResidual:
    """Monte Carlo residual of
    N|L| phi(L) = beta/2 (D- - D+) + N (S- - S+) + (M- - M+)/N
    with phi(L') = N^{-#L'} E[W_L'], all from one reweighted sample."""
    from .lattice import spanning_tree
    from .montecarlo import mc_lattice_observables

    samples = max(int(samples), int(floor))
    words = tuple(tuple(w.letters if isinstance(w, LoopWord) else w) for w in loops)
    if not words:
        return WilsonResidual(0.0, 0.0, samples, 0)
    terms = wilson_master_terms(lat, words)
    total_len = sum(len(w) for w in words)
    weight = {"lhs": N * total_len, "D-": -beta / 2, "D+": beta / 2, "S-": -N, "S+": N, "M-": -1 / N, "M+": 1 / N}
    fams, coeffs = [], []
    index = {}
    for fam, kind in terms:
        c = weight[kind] * float(N) ** (-len(fam))
        if fam not in index:
            index[fam] = len(fams)
            fams.append(fam)
            coeffs.append(0.0)
        coeffs[index[fam]] += c
    acc = mc_lattice_observables(lat, [[LoopWord(w) for w in f] for f in fams], ActionSpec("wilson", beta), N,
                                 samples, seed, tree=spanning_tree(lat))
    val, err = acc.estimate(np.asarray(coeffs))
    return WilsonResidual(float(val[0].real), float(err[0]), samples, len(terms))
