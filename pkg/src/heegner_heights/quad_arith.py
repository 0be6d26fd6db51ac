"""Discriminants that are unit squares mod 4N, Kronecker characters, and r_d(n)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .sieve import squarefree_mask


@dataclass(frozen=True)
class ResidueClassSet:
    modulus: int
    residues: frozenset[int]

    @property
    def gamma(self) -> int:
        return len(self.residues)

    def __contains__(self, d: int) -> bool:
        return d % self.modulus in self.residues


@dataclass(frozen=True)
class DiscriminantRecord:
    d: int
    u: int

    def __post_init__(self):
        if self.d >= 0 or self.d % 4 != 1:
            raise ValueError(f"{self.d} is not a negative discriminant = 1 mod 4")
        if self.u != (3 if self.d == -3 else 1):
            raise ValueError(f"wrong unit count {self.u} for d={self.d}")

    @property
    def abs_d(self) -> int:
        return -self.d

    @classmethod
    def of(cls, d: int) -> "DiscriminantRecord":
        return cls(d, 3 if d == -3 else 1)


def residue_classes(N: int) -> ResidueClassSet:
    """{nu^2 mod 4N : gcd(nu, 4N) = 1}."""
    mod = 4 * N
    squares = frozenset(nu * nu % mod for nu in range(1, mod) if math.gcd(nu, mod) == 1)
    return ResidueClassSet(mod, squares)


def enumerate_D(N: int, Y: float, include_d3: bool = True) -> list[DiscriminantRecord]:
    """Members d of the family with |d| <= Y, by increasing |d|."""
    limit = int(math.floor(Y))
    if limit < 3:
        return []
    classes = residue_classes(N)
    sqfree = squarefree_mask(limit)
    out = []
    for a in range(3, limit + 1, 4):
        # a = |d| with d = -a = 1 mod 4
        if sqfree[a] and (-a) % classes.modulus in classes.residues:
            if a == 3 and not include_d3:
                continue
            out.append(DiscriminantRecord.of(-a))
    return out


_TAB2 = (0, 1, 0, -1, 0, -1, 0, 1)


def kronecker(a: int, b: int) -> int:
    """Kronecker symbol (a/b)."""
    if b == 0:
        return 1 if abs(a) == 1 else 0
    if a % 2 == 0 and b % 2 == 0:
        return 0
    v = 0
    while b % 2 == 0:
        v += 1
        b //= 2
    k = 1 if v % 2 == 0 else _TAB2[a & 7]
    if b < 0:
        b = -b
        if a < 0:
            k = -k
    while True:
        if a == 0:
            return k if b == 1 else 0
        v = 0
        while a % 2 == 0:
            v += 1
            a //= 2
        if v % 2 == 1:
            k *= _TAB2[b & 7]
        if a & b & 2:
            k = -k
        r = abs(a)
        a = b % r
        b = r


@njit(cache=True, nogil=True)
def _jacobi(a, n):
    # n odd positive
    a %= n
    result = 1
    while a != 0:
        while a % 2 == 0:
            a //= 2
            r = n % 8
            if r == 3 or r == 5:
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


@njit(cache=True, nogil=True)
def _chi_table(absd):
    out = np.empty(absd, dtype=np.int8)
    for r in range(absd):
        out[r] = _jacobi(r, absd)
    return out


def chi_table(d: int) -> np.ndarray:
    """chi_d(r) for 0 <= r < |d|; valid for fundamental d = 1 mod 4.

    For such d the Kronecker symbol (d/m) equals the Jacobi symbol (m/|d|),
    so chi_d has period |d|.
    """
    if d % 4 != 1:
        raise ValueError("period table needs d = 1 mod 4")
    return _chi_table(abs(d))


def r_d(rec: DiscriminantRecord, n: int) -> int:
    """#{(u, v) in (N* x Z) u ({0} x N) : u^2 + |d| v^2 = 4n}."""
    if n < 1:
        raise ValueError("n must be positive")
    absd = rec.abs_d
    target = 4 * n
    count = 0
    v = 0
    while absd * v * v <= target:
        rest = target - absd * v * v
        u = math.isqrt(rest)
        if u * u == rest:
            if u > 0:
                count += 1 if v == 0 else 2
            elif v > 0:
                count += 1
        v += 1
    return count


def r_d_batch(rec: DiscriminantRecord, X: int) -> dict[int, int]:
    """Sparse n -> r_d(n) for n <= X from one sweep of the lattice."""
    absd = rec.abs_d
    limit = 4 * X
    out: dict[int, int] = {}
    v = 0
    while absd * v * v <= limit:
        base = absd * v * v
        # u^2 + |d| v^2 = 0 mod 4 with |d| = 3 mod 4 forces u = v mod 2
        u = v % 2
        while base + u * u <= limit:
            if u > 0 or v > 0:
                n = (base + u * u) // 4
                weight = 2 if (u > 0 and v > 0) else 1
                if n >= 1:
                    out[n] = out.get(n, 0) + weight
            u += 2
        v += 1
    return dict(sorted(out.items()))


def class_number(d: int) -> int:
    """Number of reduced primitive forms of discriminant d < 0."""
    if d >= 0 or d % 4 not in (0, 1):
        raise ValueError(f"{d} is not a negative discriminant")
    h = 0
    a = 1
    while 3 * a * a <= -d:
        for b in range(-a + 1, a + 1):
            if (b - d) % 2:
                continue
            num = b * b - d
            if num % (4 * a):
                continue
            c = num // (4 * a)
            if c < a or (b < 0 and a == c):
                continue
            if math.gcd(math.gcd(a, b), c) == 1:
                h += 1
        a += 1
    return h
