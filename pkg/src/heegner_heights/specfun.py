"""Kernel functions for the approximate functional equations.

``V(X) = int_0^inf exp(-u - X/u) du/u = 2 K_0(2 sqrt(X))`` smooths the
Rankin-Selberg sums, ``W_value(x) = exp(-x)`` and ``W_deriv(x) = E_1(x)``
smooth central values and central derivatives of degree-two L-functions.

The scalar kernels are numba-compiled so that the per-discriminant double
sums in :mod:`heegner_heights.lvalues` can call them in a tight loop.  Slow
quadrature versions (``*_quad``) exist only to check the fast ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, vectorize

EULER_GAMMA = 0.577215664901532860606512090082
PI = 3.14159265358979323846264338328

# Switch between the power series and Steed's continued fraction for K_0,
# measured on the Bessel argument z = 2 sqrt(X).
K0_SWITCH = 2.0
_EPS = 1e-16


@dataclass(frozen=True)
class WeightFunctionConfig:
    target_rel_error: float = 1e-12
    small_large_switch: float = K0_SWITCH

    def __post_init__(self):
        if not 0.0 < self.target_rel_error < 1e-6:
            raise ValueError("target_rel_error must lie in (0, 1e-6)")
        if self.small_large_switch <= 0:
            raise ValueError("small_large_switch must be positive")


@njit(cache=True, nogil=True)
def k0_series(z):
    """K_0(z) from the ascending series; accurate for z up to about 4."""
    q = 0.25 * z * z
    term = 1.0
    i0 = 1.0
    tail = 0.0
    harmonic = 0.0
    k = 0
    while True:
        k += 1
        term *= q / (k * k)
        harmonic += 1.0 / k
        i0 += term
        tail += term * harmonic
        if term * harmonic < _EPS * abs(tail) and term < _EPS * i0:
            break
    return -(math.log(0.5 * z) + EULER_GAMMA) * i0 + tail


@njit(cache=True, nogil=True)
def k0_cf(z):
    """K_0(z) by Steed's continued fraction; converges for z >= 1."""
    b = 2.0 * (1.0 + z)
    d = 1.0 / b
    h = d
    delh = d
    q1 = 0.0
    q2 = 1.0
    a1 = 0.25
    q = a1
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 2000):
        a -= 2.0 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels) < _EPS * abs(s):
            break
    return math.sqrt(PI / (2.0 * z)) * math.exp(-z) / s


@njit(cache=True, nogil=True)
def k0_scalar(z, switch=K0_SWITCH):
    if z <= switch:
        return k0_series(z)
    return k0_cf(z)


@njit(cache=True, nogil=True)
def v_scalar(x):
    return 2.0 * k0_scalar(2.0 * math.sqrt(x))


@njit(cache=True, nogil=True)
def e1_scalar(x):
    """Exponential integral E_1(x) for x > 0."""
    if x <= 1.0:
        # E_1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
        total = 0.0
        term = 1.0
        k = 0
        while True:
            k += 1
            term *= -x / k
            contrib = term / k
            total += contrib
            if abs(contrib) < _EPS * abs(total) or k > 200:
                break
        return -EULER_GAMMA - math.log(x) - total
    # modified Lentz evaluation of the continued fraction
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x)


@vectorize(["float64(float64, float64)"], cache=True)
def _v_ufunc(x, switch):
    return 2.0 * k0_scalar(2.0 * math.sqrt(x), switch)


@vectorize(["float64(float64)"], cache=True)
def _e1_ufunc(x):
    return e1_scalar(x)


def _check_positive(x, name):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError(f"{name} requires strictly positive arguments")
    return arr


def V(x, config: WeightFunctionConfig | None = None):
    """Twice K_0(2 sqrt(x)); accepts scalars or arrays."""
    arr = _check_positive(x, "V")
    switch = (config or WeightFunctionConfig()).small_large_switch
    out = _v_ufunc(arr, switch)
    return float(out) if np.ndim(out) == 0 else out


def W_value(x):
    arr = _check_positive(x, "W_value")
    out = np.exp(-arr)
    return float(out) if np.ndim(out) == 0 else out


def W_deriv(x):
    arr = _check_positive(x, "W_deriv")
    out = _e1_ufunc(arr)
    return float(out) if np.ndim(out) == 0 else out


# Bernoulli numbers B_2 .. B_20 for Euler-Maclaurin.
_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6,
              -3617 / 510, 43867 / 798, -174611 / 330)


def zeta(s: float, cutoff: int = 12) -> float:
    """Riemann zeta for real s > 1 by Euler-Maclaurin summation."""
    if s <= 1:
        raise ValueError("zeta needs s > 1")
    head = math.fsum(n ** -s for n in range(1, cutoff))
    m = float(cutoff)
    terms = [head, m ** (1 - s) / (s - 1), 0.5 * m ** -s]
    # rising factorial s (s+1) ... (s+2k-2) times m^(-s-2k+1) / (2k)!
    rising = s
    fact = 2.0
    for k, b2k in enumerate(_BERNOULLI, start=1):
        terms.append(b2k / fact * rising * m ** (-s - 2 * k + 1))
        rising *= (s + 2 * k - 1) * (s + 2 * k)
        fact *= (2 * k + 1) * (2 * k + 2)
    return math.fsum(terms)


def prime_factors(n: int) -> list[int]:
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def zeta_N(N: int, s: float) -> float:
    """zeta(s) with the Euler factors at primes dividing N removed."""
    value = zeta(s)
    for p in prime_factors(N):
        value *= 1.0 - p ** -s
    return value


# --- slow reference paths -------------------------------------------------

def V_quad(x: float) -> float:
    from scipy.integrate import quad

    # u = e^t turns du/u into dt; the integrand peaks at t = log(x)/2
    centre = 0.5 * math.log(x)
    def f(t):
        if abs(t - centre) > 50:
            return 0.0
        return math.exp(-math.exp(t) - x * math.exp(-t))
    left, _ = quad(f, -np.inf, centre, epsabs=0, epsrel=1e-13, limit=200)
    right, _ = quad(f, centre, np.inf, epsabs=0, epsrel=1e-13, limit=200)
    return left + right


def W_deriv_quad(x: float) -> float:
    from scipy.integrate import quad

    val, _ = quad(lambda t: math.exp(-t) / t, x, np.inf, epsabs=0, epsrel=1e-13, limit=200)
    return val
