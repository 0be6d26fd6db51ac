"""Rational elliptic curves of squarefree conductor: a_n and periods."""

from __future__ import annotations

import cmath
import hashlib
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .pointcount import ap_good_batch
from .sieve import primes_upto, smallest_prime_factor
from .specfun import prime_factors

logger = logging.getLogger(__name__)

NAIVE_LIMIT = 1000
MAX_TABLE = 10**7


class ModelNotMinimalError(ValueError):
    pass


class NumericalFailure(ArithmeticError):
    pass


@dataclass(frozen=True)
class CurveRecord:
    label: str
    a1: int
    a2: int
    a3: int
    a4: int
    a6: int
    N: int
    analytic_rank: int
    omega: int
    manin_c: int = 1
    modular_degree: int | None = None
    omega_volume: float | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"{self.label}: conductor must be positive")
        if any(e > 1 for e in _factor(self.N).values()):
            raise ValueError(f"{self.label}: conductor {self.N} is not squarefree")
        if self.omega not in (1, -1):
            raise ValueError(f"{self.label}: omega must be +1 or -1")
        if self.analytic_rank < 0:
            raise ValueError(f"{self.label}: negative rank")
        if (self.omega == 1) != (self.analytic_rank % 2 == 0):
            raise ValueError(f"{self.label}: sign {self.omega} contradicts rank parity")
        if self.discriminant == 0:
            raise ValueError(f"{self.label}: singular Weierstrass model")
        if self.manin_c < 1:
            raise ValueError(f"{self.label}: Manin constant must be positive")

    @property
    def ainvs(self) -> tuple[int, int, int, int, int]:
        return (self.a1, self.a2, self.a3, self.a4, self.a6)

    @property
    def b_invariants(self) -> tuple[int, int, int, int]:
        a1, a2, a3, a4, a6 = self.ainvs
        b2 = a1 * a1 + 4 * a2
        b4 = 2 * a4 + a1 * a3
        b6 = a3 * a3 + 4 * a6
        b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4
        return b2, b4, b6, b8

    @property
    def c4(self) -> int:
        b2, b4, _, _ = self.b_invariants
        return b2 * b2 - 24 * b4

    @property
    def c6(self) -> int:
        b2, b4, b6, _ = self.b_invariants
        return -b2**3 + 36 * b2 * b4 - 216 * b6

    @property
    def discriminant(self) -> int:
        b2, b4, b6, b8 = self.b_invariants
        return -b2 * b2 * b8 - 8 * b4**3 - 27 * b6 * b6 + 9 * b2 * b4 * b6

    @property
    def bad_primes(self) -> list[int]:
        return prime_factors(self.N)


@dataclass(frozen=True)
class CoefficientTable:
    """a_1 .. a_X, stored with a leading zero so that ``coeffs[n] == a_n``."""

    bound: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.coeffs.setflags(write=False)

    @property
    def values(self) -> np.ndarray:
        return self.coeffs[1:]

    def __getitem__(self, n: int) -> int:
        if not 1 <= n <= self.bound:
            raise IndexError(n)
        return int(self.coeffs[n])

    def __len__(self) -> int:
        return self.bound


def _factor(n: int) -> dict[int, int]:
    out: dict[int, int] = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


# --- curve config file ----------------------------------------------------

def parse_curve_line(line: str) -> CurveRecord | None:
    """``label a1 a2 a3 a4 a6 N rank omega [volume=..] [degree=..] [manin=..]``"""
    line = line.strip()
    if not line or line.startswith("#"):
        return None
    parts = line.split()
    if len(parts) < 9:
        raise ValueError(f"curve line needs at least 9 fields: {line!r}")
    label = parts[0]
    a1, a2, a3, a4, a6, N, rank, omega = (int(x) for x in parts[1:9])
    extras: dict = {}
    for item in parts[9:]:
        key, _, value = item.partition("=")
        if key == "volume":
            extras["omega_volume"] = float(value)
        elif key == "degree":
            extras["modular_degree"] = int(value)
        elif key == "manin":
            extras["manin_c"] = int(value)
        else:
            raise ValueError(f"unknown curve option {item!r}")
    return CurveRecord(label, a1, a2, a3, a4, a6, N, rank, omega, **extras)


def load_curves(path: str | os.PathLike | None = None) -> dict[str, CurveRecord]:
    """Read a curve config file; the bundled fixture set by default."""
    if path is None:
        path = Path(__file__).parent / "data" / "curves.txt"
    curves: dict[str, CurveRecord] = {}
    with open(path) as fh:
        for line in fh:
            rec = parse_curve_line(line)
            if rec is not None:
                curves[rec.label] = rec
    return curves


# --- a_p ------------------------------------------------------------------

def _count_points_grid(curve: CurveRecord, p: int) -> int:
    """#E(F_p), singular points included, by testing every (x, y)."""
    a1, a2, a3, a4, a6 = (c % p for c in curve.ainvs)
    x = np.arange(p, dtype=np.int64)[:, None]
    y = np.arange(p, dtype=np.int64)[None, :]
    lhs = (y * y + a1 * x * y + a3 * y) % p
    rhs = (x * x % p * x + a2 * x * x + a4 * x + a6) % p
    return int(np.count_nonzero(lhs == rhs)) + 1


def _count_points_exhaustive(curve: CurveRecord, p: int) -> int:
    if p < 64:
        return _count_points_grid(curve, p)
    # (2y + a1 x + a3)^2 = 4x^3 + b2 x^2 + 2 b4 x + b6, and y -> 2y + a1 x + a3
    # is a bijection of F_p for odd p
    b2, b4, b6, _ = (c % p for c in curve.b_invariants)
    x = np.arange(p, dtype=np.int64)
    f = (4 * (x * x % p) * x + b2 * x * x + 2 * b4 * x + b6) % p
    roots = np.bincount(x * x % p, minlength=p)
    return int(roots[f].sum()) + 1


def _count_points_charsum(curve: CurveRecord, p: int) -> int:
    """#E(F_p) from quadratic-character values of the cubic (second method)."""
    if p == 2:
        a1, a2, a3, a4, a6 = (c % 2 for c in curve.ainvs)
        total = 1
        for x in range(2):
            lin = (a1 * x + a3) % 2
            r = (x + a2 * x + a4 * x + a6) % 2
            # y^2 + lin y = r: y^2 + y is always even
            total += (2 if r == 0 else 0) if lin else 1
        return total
    b2, b4, b6, _ = curve.b_invariants
    total = p + 1
    for x in range(p):
        f = (4 * x**3 + b2 * x * x + 2 * b4 * x + b6) % p
        if f:
            total += 1 if pow(f, (p - 1) // 2, p) == 1 else -1
    return total


def ap_charsum(curve: CurveRecord, p: int) -> int:
    return p + 1 - _count_points_charsum(curve, p)


def _node(curve: CurveRecord, p: int) -> tuple[int, int]:
    a1, a2, a3, a4, a6 = curve.ainvs
    for x in range(p):
        for y in range(p):
            F = (y * y + a1 * x * y + a3 * y - x**3 - a2 * x * x - a4 * x - a6) % p
            Fx = (a1 * y - 3 * x * x - 2 * a2 * x - a4) % p
            Fy = (2 * y + a1 * x + a3) % p
            if F == 0 and Fx == 0 and Fy == 0:
                return x, y
    raise NumericalFailure(f"no singular point found mod {p}")


def _split_multiplicative(curve: CurveRecord, p: int) -> bool:
    """Are the tangent slopes at the node rational over F_p?"""
    x0, _ = _node(curve, p)
    # quadratic part at the node: Y^2 + a1 X Y - (3 x0 + a2) X^2
    a1 = curve.a1 % p
    c = (3 * x0 + curve.a2) % p
    return any((t * t + a1 * t - c) % p == 0 for t in range(p))


def _check_prime(curve: CurveRecord, p: int) -> None:
    if curve.N % p != 0 and curve.discriminant % p == 0:
        raise ModelNotMinimalError(
            f"{curve.label}: {p} divides the discriminant but not the conductor")


def ap(curve: CurveRecord, p: int) -> int:
    """Trace of Frobenius at p (or +-1 at multiplicative primes)."""
    _check_prime(curve, p)
    if curve.N % p == 0:
        return 1 if _split_multiplicative(curve, p) else -1
    if p < NAIVE_LIMIT:
        return p + 1 - _count_points_exhaustive(curve, p)
    return int(ap_good_batch(np.array([p], dtype=np.int64), curve.c4, curve.c6)[0])


_AP_MEMO: dict[CurveRecord, tuple[int, np.ndarray, np.ndarray]] = {}


def ap_array(curve: CurveRecord, pmax: int) -> tuple[np.ndarray, np.ndarray]:
    """All primes p <= pmax with their a_p (read-only arrays, memoised)."""
    held = _AP_MEMO.get(curve)
    if held is not None and held[0] >= pmax:
        k = int(np.searchsorted(held[1], pmax, side="right"))
        return held[1][:k], held[2][:k]
    primes, aps = _ap_array(curve, pmax)
    primes.setflags(write=False)
    aps.setflags(write=False)
    _AP_MEMO[curve] = (pmax, primes, aps)
    return primes, aps


def _ap_array(curve: CurveRecord, pmax: int) -> tuple[np.ndarray, np.ndarray]:
    primes = primes_upto(pmax)
    aps = np.empty_like(primes)
    small = primes < NAIVE_LIMIT
    for i in np.flatnonzero(small):
        aps[i] = ap(curve, int(primes[i]))
    big = np.flatnonzero(~small)
    if big.size:
        for p in curve.bad_primes:
            if p >= NAIVE_LIMIT:
                raise NotImplementedError("bad primes above the naive limit")
        disc = curve.discriminant
        for p in primes[big]:
            if disc % int(p) == 0:
                _check_prime(curve, int(p))
        aps[big] = ap_good_batch(primes[big], curve.c4, curve.c6)
    return primes, aps


# --- a_n ------------------------------------------------------------------

@njit(cache=True)
def _extend(spf, ap_full, bad_mask, X):
    a = np.zeros(X + 1, dtype=np.int64)
    if X >= 1:
        a[1] = 1
    for n in range(2, X + 1):
        p = spf[n]
        r = n
        while r % p == 0:
            r //= p
        if r > 1:
            a[n] = a[n // r] * a[r]
        elif n == p:
            a[n] = ap_full[p]
        elif bad_mask[p]:
            a[n] = a[n // p] * ap_full[p]
        else:
            q = n // p
            a[n] = ap_full[p] * a[q] - p * a[q // p]
    return a


def _cache_dir() -> Path | None:
    root = os.environ.get("HEEGNER_CACHE")
    if root == "":
        return None
    path = Path(root) if root else Path.home() / ".cache" / "heegner_heights"
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError:
        return None
    return path


def _cache_key(curve: CurveRecord, X: int) -> str:
    digest = hashlib.sha1(repr((curve.ainvs, curve.N)).encode()).hexdigest()[:10]
    return f"{curve.label}_{X}_{digest}.npy"


def an_table(curve: CurveRecord, X: int, use_cache: bool = True) -> CoefficientTable:
    """Hecke-multiplicative extension of a_p to a_1 .. a_X."""
    if X < 1:
        raise ValueError("X must be at least 1")
    if X > MAX_TABLE:
        raise ValueError(f"coefficient tables are capped at {MAX_TABLE}")
    cache = _cache_dir() if use_cache else None
    if cache is not None:
        target = cache / _cache_key(curve, X)
        if target.exists():
            return CoefficientTable(X, np.load(target))
    primes, aps = ap_array(curve, X)
    ap_full = np.zeros(X + 1, dtype=np.int64)
    ap_full[primes] = aps
    bad = np.zeros(X + 1, dtype=np.bool_)
    for p in curve.bad_primes:
        if p <= X:
            bad[p] = True
    coeffs = _extend(smallest_prime_factor(X), ap_full, bad, X)
    if cache is not None:
        tmp = target.with_suffix(f".{os.getpid()}.tmp.npy")
        np.save(tmp, coeffs)
        os.replace(tmp, target)
    return CoefficientTable(X, coeffs)


@njit(cache=True)
def _square_coeffs(spf, ap_full, bad_mask, K):
    """a_{n^2} for 1 <= n <= K."""
    out = np.zeros(K + 1, dtype=np.float64)
    out[1] = 1.0
    for n in range(2, K + 1):
        p = spf[n]
        r = n
        e = 0
        while r % p == 0:
            r //= p
            e += 1
        # a_{p^(2e)}
        ap = ap_full[p]
        if bad_mask[p]:
            local = float(ap) ** (2 * e)
        else:
            prev, cur = 1.0, float(ap)
            for _ in range(2 * e - 1):
                prev, cur = cur, ap * cur - p * prev
            local = cur
        out[n] = local * out[r]
    return out


def square_index_coeffs(curve: CurveRecord, K: int) -> np.ndarray:
    """Array whose n-th entry is a_{n^2}, for n <= K, as floats."""
    primes, aps = ap_array(curve, K)
    ap_full = np.zeros(K + 1, dtype=np.int64)
    ap_full[primes] = aps
    bad = np.zeros(K + 1, dtype=np.bool_)
    for p in curve.bad_primes:
        if p <= K:
            bad[p] = True
    return _square_coeffs(smallest_prime_factor(K), ap_full, bad, K)


# --- periods --------------------------------------------------------------

def _agm(a: complex, b: complex, tol: float = 1e-15, max_iter: int = 60) -> complex:
    for _ in range(max_iter):
        if abs(a - b) <= tol * abs(a):
            return a
        a, b = (a + b) / 2, cmath.sqrt(a * b)
        # keep the "right" square root: the one closer to the new mean
        if abs(a - b) > abs(a + b):
            b = -b
    raise NumericalFailure("AGM did not converge")


def cubic_roots(curve: CurveRecord) -> np.ndarray:
    """Roots of 4x^3 + b2 x^2 + 2 b4 x + b6, polished by Newton steps."""
    b2, b4, b6, _ = curve.b_invariants
    coeffs = [4.0, float(b2), 2.0 * b4, float(b6)]
    roots = np.roots(coeffs).astype(complex)
    poly = np.poly1d(coeffs)
    dpoly = poly.deriv()
    for i, r in enumerate(roots):
        for _ in range(3):
            d = dpoly(r)
            if d == 0:
                break
            r = r - poly(r) / d
        roots[i] = r
    return roots


def period_lattice(curve: CurveRecord) -> tuple[complex, complex]:
    """Basis (w1, w2) of the period lattice of the Neron differential, w1 real."""
    roots = cubic_roots(curve)
    b2, b4, _, _ = curve.b_invariants
    if curve.discriminant > 0:
        e3, e2, e1 = sorted(r.real for r in roots)
        w1 = math.pi / _agm(math.sqrt(e1 - e3), math.sqrt(e1 - e2)).real
        w2 = 1j * math.pi / _agm(math.sqrt(e1 - e3), math.sqrt(e2 - e3)).real
        return complex(w1), w2
    e1 = min(roots, key=lambda r: abs(r.imag)).real
    a = 3 * e1 + b2 / 4
    b = math.sqrt(3 * e1 * e1 + b2 * e1 / 2 + b4 / 2)
    w1 = 2 * math.pi / _agm(2 * math.sqrt(b), math.sqrt(2 * b + a)).real
    w2 = -w1 / 2 + 1j * math.pi / _agm(2 * math.sqrt(b), math.sqrt(2 * b - a)).real
    return complex(w1), w2


def complex_volume(curve: CurveRecord) -> float:
    """Omega_{E,N}: twice the area of a fundamental parallelogram.

    With this normalisation L(Sym^2 E, 2) / (pi Omega) = deg / (N c^2).
    """
    if curve.omega_volume is not None:
        return curve.omega_volume
    w1, w2 = period_lattice(curve)
    vol = 2.0 * abs((w1 * w2.conjugate()).imag)
    if not (vol > 0 and math.isfinite(vol)):
        raise NumericalFailure(f"{curve.label}: bad period lattice")
    return vol
