"""Haar sampling and Monte Carlo oracles with standard errors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Lattice, LoopWord
from .state_sum import ActionSpec, RefusalError, action_value, weyl_character_batch
from .weingarten import WordSpec

CHUNK = 100_000
N_BLOCKS = 100


@dataclass
class McEstimate:
    value: complex
    stderr: float
    samples: int
    seed: int

    def within(self, x, nsigma=3.0, slack=0.0) -> bool:
        return abs(self.value - x) <= nsigma * self.stderr + slack


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based Philox stream `stream` of the given seed."""
    ss = np.random.SeedSequence(seed).spawn(stream + 1)[stream]
    return np.random.Generator(np.random.Philox(ss))


def haar_sample(N: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar unitaries by QR of a complex Ginibre matrix with phase correction."""
    shape = (N, N) if size is None else (size, N, N)
    Z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return Q * ph[..., None, :]


def word_product(word, mats: dict, N: int, size: int) -> np.ndarray:
    """Batched holonomy of a word [(letter, eps)] given per-letter batches."""
    out = np.broadcast_to(np.eye(N, dtype=complex), (size, N, N)).copy()
    for a, e in word:
        M = mats[a]
        out = out @ (M if e > 0 else np.conj(np.swapaxes(M, -1, -2)))
    return out


def _chunks(samples):
    done = 0
    while done < samples:
        k = min(CHUNK, samples - done)
        yield done, k
        done += k


def mc_word_moment(spec: WordSpec, samples: int, seed: int) -> McEstimate:
    """Sample mean of prod_i chi_i(w_i(U)) over independent Haar letters."""
    N = spec.N
    letters = sorted({a for w in spec.words for a, _ in w}, key=str)
    s1 = 0j
    s2 = 0.0
    for c, (start, k) in enumerate(_chunks(samples)):
        rng = make_rng(seed, c)
        mats = {a: haar_sample(N, rng, k) for a in letters}
        val = np.ones(k, dtype=complex)
        for w, lab in zip(spec.words, spec.labels):
            if lab.is_trivial():
                continue
            z = np.linalg.eigvals(word_product(w, mats, N, k))
            val *= weyl_character_batch(lab, z)
        s1 += val.sum()
        s2 += float((np.abs(val) ** 2).sum())
    mean = s1 / samples
    var = max(s2 / samples - abs(mean) ** 2, 0.0)
    return McEstimate(complex(mean), float(np.sqrt(var / samples)), samples, seed)


def sample_lattice(lat: Lattice, N: int, rng, k: int, tree=frozenset()) -> dict:
    """Edge variables; tree edges (if given) are set to the identity."""
    out = {}
    eye = np.broadcast_to(np.eye(N, dtype=complex), (k, N, N))
    for e in range(len(lat.edges)):
        out[e] = eye if e in tree else haar_sample(N, rng, k)
    return out


def loop_trace(loop, mats, N, k):
    letters = loop.letters if isinstance(loop, LoopWord) else loop
    return np.trace(word_product(letters, mats, N, k), axis1=-2, axis2=-1)


class ReweightedAccumulator:
    """Block sums for ratio estimators E_Q[f] = E[f w] / E[w] with jackknife errors."""

    def __init__(self, n_obs, samples, blocks=N_BLOCKS):
        self.samples = samples
        self.blocks = blocks
        self.w = np.zeros(blocks)
        self.fw = np.zeros((n_obs, blocks), dtype=complex)
        self.w2 = 0.0

    def add(self, start, weights, values):
        idx = (np.arange(start, start + len(weights)) * self.blocks) // self.samples
        self.w += np.bincount(idx, weights, minlength=self.blocks)
        self.w2 += float((weights**2).sum())
        for j, v in enumerate(values):
            prod = v * weights
            self.fw[j] += np.bincount(idx, prod.real, minlength=self.blocks) + 1j * np.bincount(idx, prod.imag, minlength=self.blocks)

    def ess(self):
        W = self.w.sum()
        return W * W / self.w2 if self.w2 > 0 else 0.0

    def estimate(self, coeffs=None):
        """Ratio estimate of sum_j coeffs_j E_Q[f_j] with jackknife stderr."""
        fw = self.fw if coeffs is None else (np.asarray(coeffs)[:, None] * self.fw).sum(axis=0, keepdims=True)
        W = self.w.sum()
        A = fw.sum(axis=1)
        val = A / W
        loo = (A[:, None] - fw) / (W - self.w)[None, :]
        B = self.blocks
        err = np.sqrt((B - 1) / B * (np.abs(loo - loo.mean(axis=1, keepdims=True)) ** 2).sum(axis=1))
        return val, err


def _check_ess(acc, samples):
    ess = acc.ess()
    if ess < 0.01 * samples:
        raise RefusalError(f"effective sample size collapsed: {ess:.1f} of {samples}")


def mc_lattice_observables(lat: Lattice, families, action: ActionSpec, N: int, samples: int, seed: int,
                           tree=frozenset()) -> ReweightedAccumulator:
    """Accumulate prod_l Tr(U_l) for each loop family under the reweighted measure."""
    acc = ReweightedAccumulator(len(families), samples)
    for c, (start, k) in enumerate(_chunks(samples)):
        rng = make_rng(seed, c)
        mats = sample_lattice(lat, N, rng, k, tree)
        logw = np.zeros(k)
        weights = np.ones(k)
        for b in lat.boundaries:
            Up = word_product(b, mats, N, k)
            if action.kind == "wilson":
                logw += action.coupling * np.trace(Up, axis1=-2, axis2=-1).real
            else:
                weights = weights * action_value(action, Up, N)
        weights = weights * np.exp(logw)
        traces = {}
        vals = []
        for fam in families:
            v = np.ones(k, dtype=complex)
            for loop in fam:
                key = loop.letters if isinstance(loop, LoopWord) else tuple(loop)
                if key not in traces:
                    traces[key] = loop_trace(key, mats, N, k)
                v = v * traces[key]
            vals.append(v)
        acc.add(start, weights, vals)
    _check_ess(acc, samples)
    return acc


def mc_lattice_expectation(lat: Lattice, loops, action: ActionSpec, N: int, samples: int, seed: int,
                           tree=frozenset()) -> McEstimate:
    """Reweighted Haar estimate of E[prod Tr(U_loop)] under the lattice measure."""
    if not loops:
        return McEstimate(1.0 + 0j, 0.0, samples, seed)
    acc = mc_lattice_observables(lat, [list(loops)], action, N, samples, seed, tree)
    val, err = acc.estimate()
    return McEstimate(complex(val[0]), float(err[0]), samples, seed)


def _random_step(N, rng, k, step):
    """Batch of exp(i H) with H Hermitian Gaussian; symmetric under H -> -H."""
    H = (rng.standard_normal((k, N, N)) + 1j * rng.standard_normal((k, N, N))) * step
    H = (H + np.conj(np.swapaxes(H, -1, -2))) / 2
    ev, vec = np.linalg.eigh(H)
    return (vec * np.exp(1j * ev)[:, None, :]) @ np.conj(np.swapaxes(vec, -1, -2))


def metropolis_observables(lat: Lattice, families, action: ActionSpec, N: int, chains: int, sweeps: int,
                           seed: int, burn: int = 100, step: float = 0.5):
    """Independent single-link Metropolis chains run in lockstep.

    Returns (values, stderr) per family; errors come from the spread of the
    per-chain means, so autocorrelation inside a chain is accounted for.
    """
    rng = make_rng(seed, 0)
    E = len(lat.edges)
    mats = {e: haar_sample(N, rng, chains) for e in range(E)}
    plaq_of = {e: [p for p, b in enumerate(lat.boundaries) if any(x == e for x, _ in b)] for e in range(E)}

    def weight(p):
        return action_value(action, word_product(lat.boundaries[p], mats, N, chains), N)

    w = {p: weight(p) for p in range(len(lat.boundaries))}
    sums = np.zeros((len(families), chains), dtype=complex)
    for sweep in range(burn + sweeps):
        for e in range(E):
            old = mats[e]
            mats[e] = _random_step(N, rng, chains, step) @ old
            new = {p: weight(p) for p in plaq_of[e]}
            ratio = np.ones(chains)
            for p in plaq_of[e]:
                ratio = ratio * new[p] / w[p]
            acc = rng.random(chains) < ratio
            mats[e] = np.where(acc[:, None, None], mats[e], old)
            for p in plaq_of[e]:
                w[p] = np.where(acc, new[p], w[p])
        if sweep >= burn:
            traces = {}
            for j, fam in enumerate(families):
                v = np.ones(chains, dtype=complex)
                for loop in fam:
                    key = loop.letters if isinstance(loop, LoopWord) else tuple(loop)
                    if key not in traces:
                        traces[key] = loop_trace(key, mats, N, chains)
                    v = v * traces[key]
                sums[j] += v
    means = sums / sweeps
    val = means.mean(axis=1)
    err = means.std(axis=1, ddof=1) / np.sqrt(chains)
    return val, err


def lattice_family_estimates(lat: Lattice, families, action: ActionSpec, N: int, samples: int, seed: int,
                             tree=frozenset(), chains: int = 2000, sweeps: int = 200, min_ess: float = 0.1):
    """Reweighted Haar estimates, or Metropolis chains when the weights are too
    peaked for the ratio estimator (effective sample fraction below min_ess).

    Returns (values, stderr, method) with method "reweighted" or "metropolis".
    """
    try:
        acc = mc_lattice_observables(lat, families, action, N, samples, seed, tree)
        if acc.ess() >= min_ess * samples:
            return (*acc.estimate(), "reweighted")
    except RefusalError:
        pass
    return (*metropolis_observables(lat, families, action, N, chains, sweeps, seed), "metropolis")


def metropolis_expectation(lat: Lattice, loops, action: ActionSpec, N: int, sweeps: int, seed: int,
                           step: float = 0.5, burn: int = 200) -> McEstimate:
    """Single-link Metropolis chain; error bars from the integrated autocorrelation time."""
    rng = make_rng(seed, 0)
    mats = {e: haar_sample(N, rng) for e in range(len(lat.edges))}
    plaq_of = {e: [p for p, b in enumerate(lat.boundaries) if any(x == e for x, _ in b)] for e in mats}

    def plaq_weight(p):
        U = np.eye(N, dtype=complex)
        for e, s in lat.boundaries[p]:
            U = U @ (mats[e] if s > 0 else mats[e].conj().T)
        return float(action_value(action, U[None], N)[0])

    def observable():
        v = 1.0 + 0j
        for L in loops:
            U = np.eye(N, dtype=complex)
            for e, s in L.letters:
                U = U @ (mats[e] if s > 0 else mats[e].conj().T)
            v *= np.trace(U)
        return v

    series = []
    for sweep in range(burn + sweeps):
        for e in mats:
            old = mats[e]
            w_old = np.prod([plaq_weight(p) for p in plaq_of[e]])
            H = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) * step
            H = (H - H.conj().T) / 2
            ev, vec = np.linalg.eigh(-1j * H)
            R = (vec * np.exp(1j * ev)) @ vec.conj().T
            mats[e] = R @ old
            w_new = np.prod([plaq_weight(p) for p in plaq_of[e]])
            if rng.random() * w_old > w_new:
                mats[e] = old
        if sweep >= burn:
            series.append(observable())
    x = np.asarray(series)
    mean = x.mean()
    d = x - mean
    var = float(np.mean(np.abs(d) ** 2))
    tau = 0.5
    for t in range(1, len(x) // 2):
        c = float(np.mean((d[:-t] * np.conj(d[t:])).real)) / var if var > 0 else 0.0
        if c <= 0:
            break
        tau += c
    return McEstimate(complex(mean), float(np.sqrt(2 * tau * var / len(x))), len(x), seed)
