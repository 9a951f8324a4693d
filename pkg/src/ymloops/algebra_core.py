"""Partitions, permutations and symmetric group characters."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations as _perms
from math import factorial
from typing import Iterable, Sequence


@dataclass(frozen=True, order=True)
class Partition:
    parts: tuple = ()

    def __post_init__(self):
        p = tuple(int(x) for x in self.parts)
        if any(x <= 0 for x in p):
            raise ValueError(f"partition parts must be positive: {p}")
        if any(p[i] < p[i + 1] for i in range(len(p) - 1)):
            raise ValueError(f"partition parts must be nonincreasing: {p}")
        object.__setattr__(self, "parts", p)

    @property
    def size(self) -> int:
        return sum(self.parts)

    def __len__(self):
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __getitem__(self, i):
        return self.parts[i]

    def __repr__(self):
        return "(" + ",".join(map(str, self.parts)) + ")" if self.parts else "()"

    def multiplicities(self) -> dict:
        out: dict = {}
        for x in self.parts:
            out[x] = out.get(x, 0) + 1
        return out

    def class_size(self) -> int:
        """Number of permutations of cycle type self."""
        z = 1
        for k, m in self.multiplicities().items():
            z *= k**m * factorial(m)
        return factorial(self.size) // z


def as_partition(x) -> Partition:
    if isinstance(x, Partition):
        return x
    return Partition(tuple(sorted((int(v) for v in x), reverse=True)))


def partitions_of(n: int, max_length: int | None = None) -> list[Partition]:
    """All partitions of n in reverse lexicographic order."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    cap = n if max_length is None else max_length
    out = []

    def rec(rem, largest, acc):
        if rem == 0:
            out.append(Partition(tuple(acc)))
            return
        if len(acc) >= cap:
            return
        for k in range(min(rem, largest), 0, -1):
            acc.append(k)
            rec(rem - k, k, acc)
            acc.pop()

    rec(n, n, [])
    return out


@dataclass(frozen=True)
class Permutation:
    """Bijection of {0..n-1} stored as an image tuple."""

    images: tuple

    def __post_init__(self):
        im = tuple(int(x) for x in self.images)
        if sorted(im) != list(range(len(im))):
            raise ValueError(f"not a permutation: {im}")
        object.__setattr__(self, "images", im)

    @property
    def n(self) -> int:
        return len(self.images)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def from_cycles(cls, n: int, cycles: Iterable[Sequence[int]]) -> "Permutation":
        im = list(range(n))
        for c in cycles:
            for a, b in zip(c, list(c[1:]) + [c[0]]):
                im[a] = b
        return cls(tuple(im))

    def __call__(self, i: int) -> int:
        return self.images[i]

    def __mul__(self, other: "Permutation") -> "Permutation":
        # (self * other)(i) = self(other(i))
        return Permutation(tuple(self.images[j] for j in other.images))

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, j in enumerate(self.images):
            inv[j] = i
        return Permutation(tuple(inv))

    def cycles(self) -> list[tuple]:
        seen = [False] * self.n
        out = []
        for s in range(self.n):
            if seen[s]:
                continue
            c = []
            i = s
            while not seen[i]:
                seen[i] = True
                c.append(i)
                i = self.images[i]
            out.append(tuple(c))
        return out

    def num_cycles(self) -> int:
        return len(self.cycles())

    def sign(self) -> int:
        return -1 if (self.n - self.num_cycles()) % 2 else 1


def cycle_type(p: Permutation) -> Partition:
    return as_partition(len(c) for c in p.cycles())


def all_permutations(n: int) -> list[Permutation]:
    return [Permutation(im) for im in _perms(range(n))]


def _beta_set(lam: tuple) -> tuple:
    k = len(lam)
    return tuple(lam[i] + (k - 1 - i) for i in range(k))


@lru_cache(maxsize=None)
def _mn(beta: frozenset, mu: tuple) -> int:
    # Murnaghan-Nakayama on beta-sets: removing a rim hook of length r
    # moves one bead from b to b - r; the sign counts beads jumped over.
    if not mu:
        return 1
    r, rest = mu[0], mu[1:]
    total = 0
    for b in beta:
        t = b - r
        if t < 0 or t in beta:
            continue
        jumped = sum(1 for c in beta if t < c < b)
        nb = frozenset((beta - {b}) | {t})
        total += (-1) ** jumped * _mn(nb, rest)
    return total


def sym_character(lam, mu) -> int:
    """Irreducible character chi^lam at a permutation of cycle type mu."""
    lam = as_partition(lam)
    mu = as_partition(mu)
    if lam.size != mu.size:
        raise ValueError(f"size mismatch: |{lam}| != |{mu}|")
    return _mn(frozenset(_beta_set(lam.parts)), mu.parts)


def sym_dim(lam) -> int:
    lam = as_partition(lam)
    return sym_character(lam, Partition((1,) * lam.size))
