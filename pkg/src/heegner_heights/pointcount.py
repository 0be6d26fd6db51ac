"""Fast a_p for large primes of good reduction.

Works on the short model y^2 = x^3 + A x + B (A = -27 c4, B = -54 c6), which
is isomorphic to the curve over F_p for p >= 5.  Each random abscissa x0
with c = f(x0) != 0 gives the point (c x0, c^2) on
y^2 = x^3 + A c^2 x + B c^3, which is the curve itself when c is a square
and its quadratic twist otherwise.  Orders found by baby-step giant-step in
the Hasse interval constrain #E through #E + #E' = 2p + 2.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _inv(a, p):
    t, newt, r, newr = 0, 1, p, a % p
    while newr != 0:
        q = r // newr
        t, newt = newt, t - q * newt
        r, newr = newr, r - q * newr
    if t < 0:
        t += p
    return t


@njit(cache=True, nogil=True)
def _powmod(b, e, p):
    result = 1
    b %= p
    while e > 0:
        if e & 1:
            result = result * b % p
        b = b * b % p
        e >>= 1
    return result


@njit(cache=True, nogil=True)
def _isqrt(n):
    r = int(np.sqrt(float(n)))
    while r * r > n:
        r -= 1
    while (r + 1) * (r + 1) <= n:
        r += 1
    return r


@njit(cache=True, nogil=True)
def _add(x1, y1, z1, x2, y2, z2, a, p):
    if z1 == 0:
        return x2, y2, z2
    if z2 == 0:
        return x1, y1, z1
    if x1 == x2:
        if (y1 + y2) % p == 0:
            return 0, 0, 0
        lam = (3 * x1 % p * x1 + a) % p * _inv(2 * y1 % p, p) % p
    else:
        lam = (y2 - y1) % p * _inv((x2 - x1) % p, p) % p
    x3 = (lam * lam - x1 - x2) % p
    y3 = (lam * ((x1 - x3) % p) - y1) % p
    return x3, y3, 1


@njit(cache=True, nogil=True)
def _mul(k, x, y, z, a, p):
    rx, ry, rz = 0, 0, 0
    while k > 0:
        if k & 1:
            rx, ry, rz = _add(rx, ry, rz, x, y, z, a, p)
        x, y, z = _add(x, y, z, x, y, z, a, p)
        k >>= 1
    return rx, ry, rz


@njit(cache=True, nogil=True)
def _annihilator(x, y, a, p, lo, hi):
    """Some M > 0 with [M]P = O, searched through [lo, hi]."""
    m = _isqrt(hi - lo) + 1
    bx = np.empty(m, dtype=np.int64)
    by = np.empty(m, dtype=np.int64)
    qx, qy, qz = x, y, 1
    for j in range(1, m + 1):
        if qz == 0:
            return j
        bx[j - 1] = qx
        by[j - 1] = qy
        qx, qy, qz = _add(qx, qy, qz, x, y, 1, a, p)
    order = np.argsort(bx)
    sx = bx[order]
    rx, ry, rz = _mul(m, x, y, 1, a, p)
    gx, gy, gz = _mul(lo, x, y, 1, a, p)
    for i in range(m + 2):
        if gz == 0:
            return lo + i * m
        k = np.searchsorted(sx, gx)
        if k < m and sx[k] == gx:
            j = order[k] + 1
            if by[order[k]] == gy:
                return lo + i * m - j
            return lo + i * m + j
        gx, gy, gz = _add(gx, gy, gz, rx, ry, rz, a, p)
    return -1


@njit(cache=True, nogil=True)
def _exact_order(M, x, y, a, p):
    n = M
    q = 2
    rest = M
    while q * q <= rest:
        if rest % q == 0:
            while rest % q == 0:
                rest //= q
            while n % q == 0:
                tx, ty, tz = _mul(n // q, x, y, 1, a, p)
                if tz != 0:
                    break
                n //= q
        q += 1
    if rest > 1 and n % rest == 0:
        tx, ty, tz = _mul(n // rest, x, y, 1, a, p)
        if tz == 0:
            n //= rest
    return n


@njit(cache=True, nogil=True)
def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


@njit(cache=True, nogil=True)
def count_short_naive(a, b, p):
    """#E(F_p) for y^2 = x^3 + a x + b by a character sum, O(p log p)."""
    total = p + 1
    half = (p - 1) // 2
    for x in range(p):
        f = (x * x % p * x + a * x + b) % p
        if f != 0:
            if _powmod(f, half, p) == 1:
                total += 1
            else:
                total -= 1
    return total


@njit(cache=True, nogil=True)
def count_short_bsgs(a, b, p, seed):
    s = _isqrt(4 * p)
    lo = p + 1 - s
    hi = p + 1 + s
    l_curve = 1
    l_twist = 1
    state = (seed * 6364136223846793005 + 1442695040888963407) & 0x7FFFFFFFFFFFFFFF
    half = (p - 1) // 2
    for _ in range(80):
        state = (state * 6364136223846793005 + 1442695040888963407) & 0x7FFFFFFFFFFFFFFF
        x0 = (state >> 17) % p
        c = (x0 * x0 % p * x0 + a * x0 + b) % p
        if c == 0:
            continue
        c2 = c * c % p
        ac = a * c2 % p
        px = c * x0 % p
        py = c2
        M = _annihilator(px, py, ac, p, lo, hi)
        if M <= 0:
            continue
        order = _exact_order(M, px, py, ac, p)
        if _powmod(c, half, p) == 1:
            l_curve = l_curve // _gcd(l_curve, order) * order
        else:
            l_twist = l_twist // _gcd(l_twist, order) * order
        count = 0
        found = 0
        start = (lo + l_curve - 1) // l_curve * l_curve
        for cand in range(start, hi + 1, l_curve):
            if (2 * p + 2 - cand) % l_twist == 0:
                count += 1
                found = cand
                if count > 1:
                    break
        if count == 1:
            return found
    return count_short_naive(a, b, p)


@njit(cache=True, nogil=True)
def ap_good_batch(primes, c4, c6):
    """a_p = p + 1 - #E(F_p) for an array of primes p >= 5 of good reduction."""
    out = np.empty(primes.shape[0], dtype=np.int64)
    for i in range(primes.shape[0]):
        p = primes[i]
        a = (-27 * (c4 % p)) % p
        b = (-54 * (c6 % p)) % p
        out[i] = p + 1 - count_short_bsgs(a, b, p, p)
    return out
