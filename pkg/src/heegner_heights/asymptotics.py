"""Euler products, symmetric-square values and the moment constants.

The symmetric square enters only through D(s) = sum a_{n^2} n^{-s}, which
equals L(Sym^2 E, s) / zeta^{(N)}(2s - 2).  D is evaluated by exponentially
smoothed partial sums.  Two things keep the smoothing bias small:

* the coefficients are first convolved with prod_{p|N} (1 - p^2 (p^2)^{-s}),
  which removes the poles of 1/zeta^{(N)} on Re(s) = 1 coming from the
  missing bad-prime factors (they would leave an oscillating O(1/M) term);
* one Richardson step in M cancels the remaining real pole of Gamma at -1.

What is left is governed by the zeros of zeta and is below 1e-7 relative
for M of a few thousand on the fixture curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .curve_model import CurveRecord, ap, ap_array, complex_volume, square_index_coeffs
from .lvalues import UnsupportedSign, engine
from .quad_arith import residue_classes
from .sieve import primes_upto
from .specfun import EULER_GAMMA, PI, prime_factors, zeta_N

DEFAULT_PMAX = 10**6
DEFAULT_M = 4000
SMOOTH_SPAN = 20  # terms kept: n <= SMOOTH_SPAN * M
DIFF_STEP = 1e-3


class AccuracyError(ArithmeticError):
    """A smoothed series failed its convergence test."""


# --- smoothed square-index series --------------------------------------------

def smoothed_square_sum(sq_coeffs: np.ndarray, M: float, sigma: float = 2.0) -> float:
    """sum_{1 <= n <= 20M} c_n n^{-sigma} e^{-n/M} for c_n = sq_coeffs[n]."""
    top = min(int(SMOOTH_SPAN * M), sq_coeffs.shape[0] - 1)
    if top < 1:
        return 0.0
    n = np.arange(1, top + 1, dtype=float)
    terms = sq_coeffs[1:top + 1] * np.exp(-sigma * np.log(n) - n / M)
    return math.fsum(terms)


def complete_bad_primes(sq_coeffs: np.ndarray, bad_primes) -> np.ndarray:
    """Dirichlet convolution with prod_{p in bad} (1 - p^2 (p^2)^{-s})."""
    out = np.asarray(sq_coeffs, dtype=float).copy()
    K = out.shape[0] - 1
    for p in bad_primes:
        q = p * p
        if q > K:
            continue
        shifted = out.copy()
        shifted[q::q] -= q * out[1:K // q + 1]
        out = shifted
    return out


def _bad_factor(bad_primes, sigma: float) -> float:
    return math.prod(1.0 - p ** (2.0 - 2.0 * sigma) for p in bad_primes)


class SquareSeries:
    """D(sigma) for sigma near 2, from one coefficient array."""

    def __init__(self, sq_coeffs: np.ndarray, bad_primes: tuple[int, ...]):
        self.bad_primes = tuple(bad_primes)
        self.raw_coeffs = np.asarray(sq_coeffs, dtype=float)
        self.completed = complete_bad_primes(self.raw_coeffs, self.bad_primes)

    @classmethod
    def for_curve(cls, curve: CurveRecord, M: float) -> "SquareSeries":
        return cls(_square_coeffs_cached(curve, int(SMOOTH_SPAN * 2 * M)), curve.bad_primes)

    @property
    def capacity(self) -> float:
        """Largest M whose doubled scale is covered by the coefficients."""
        return (self.raw_coeffs.shape[0] - 1) / (2 * SMOOTH_SPAN)

    def extrapolated(self, M: float, sigma: float = 2.0) -> float:
        if M > self.capacity + 1e-9:
            raise ValueError(f"coefficients only reach M = {self.capacity}")
        low = smoothed_square_sum(self.completed, M, sigma)
        high = smoothed_square_sum(self.completed, 2 * M, sigma)
        return (2.0 * high - low) / _bad_factor(self.bad_primes, sigma)


_SQ_MEMO: dict[CurveRecord, np.ndarray] = {}


def _square_coeffs_cached(curve: CurveRecord, K: int) -> np.ndarray:
    held = _SQ_MEMO.get(curve)
    if held is None or held.shape[0] - 1 < K:
        held = square_index_coeffs(curve, K)
        held.setflags(write=False)
        _SQ_MEMO[curve] = held
    return held[:K + 1]


@dataclass(frozen=True)
class Sigma2Estimate:
    """sum a_{n^2}/n^2 at smoothing scale M.

    ``raw`` and ``raw_doubled`` are the plain smoothed sums at M and 2M;
    ``value`` is the bias-corrected estimate and ``rel_change`` its change
    when M doubles.
    """
    M: float
    raw: float
    raw_doubled: float
    value: float
    rel_change: float


def sigma2(curve: CurveRecord | None = None, M: float = DEFAULT_M, *,
           series: SquareSeries | None = None, tol: float = 1e-4,
           max_M: float = 1e7) -> Sigma2Estimate:
    """Smoothed sum a_{n^2}/n^2, doubling M until the estimate settles.

    Either a curve or a prepared ``SquareSeries`` (e.g. a synthetic one)
    must be given.
    """
    if M < 1000:
        raise ValueError("smoothing scale must be at least 1000")
    if series is None:
        if curve is None:
            raise TypeError("need a curve or a series")
        series = SquareSeries.for_curve(curve, 2 * M)
    while True:
        if 2 * M > series.capacity:
            if curve is None or 4 * M > max_M:
                raise AccuracyError(f"sigma2 not converged up to M = {M:g}")
            series = SquareSeries.for_curve(curve, 2 * M)
        first = series.extrapolated(M)
        second = series.extrapolated(2 * M)
        change = abs(second - first) / max(abs(second), 1e-300)
        if change < tol:
            return Sigma2Estimate(M, smoothed_square_sum(series.raw_coeffs, M),
                                  smoothed_square_sum(series.raw_coeffs, 2 * M),
                                  second, change)
        M *= 2


# --- Euler products ------------------------------------------------------------

def _log_tail(g: Callable[[np.ndarray], np.ndarray], pmax: float) -> float:
    """sum_{p > pmax} g(p) ~ int_pmax^inf g(t) dt / log t."""
    x = np.linspace(0.0, 60.0, 6001)
    t = pmax * np.exp(x)
    y = g(t) * t / np.log(t)
    return float(np.trapezoid(y, x)) if hasattr(np, "trapezoid") else float(np.trapz(y, x))


def _good_odd(primes: np.ndarray, N: int) -> np.ndarray:
    return (primes != 2) & (N % primes != 0)


def p_local(a: np.ndarray, p: np.ndarray, s: float) -> np.ndarray:
    """Local factor of P(s) at p, given a = a_p."""
    p = p.astype(float)
    ap2 = a.astype(float) ** 2
    num = 1.0 + p ** (2.0 - 4.0 * s) - (ap2 - 2.0 * p) * p ** (-2.0 * s)
    return 1.0 / (1.0 + 1.0 / p) + num / ((1.0 + p) * (1.0 + p ** (1.0 - 2.0 * s)))


def euler_P(curve: CurveRecord, s: float = 1.0, pmax: int = DEFAULT_PMAX) -> float:
    """P(s) over p not dividing 2N, with the Sato-Tate mean tail beyond pmax."""
    if not 0.9 <= s <= 1.1:
        raise ValueError("P(s) is only evaluated for s in [0.9, 1.1]")
    primes, aps = ap_array(curve, pmax)
    keep = _good_odd(primes, curve.N)
    logs = np.log(p_local(aps[keep], primes[keep], s))
    # a_p^2 has mean p, so the mean local factor is 1 + p^{2-4s}/((p+1)(1+p^{1-2s}))
    tail = _log_tail(lambda t: t ** (2.0 - 4.0 * s) / ((t + 1.0) * (1.0 + t ** (1.0 - 2.0 * s))), pmax)
    return math.exp(math.fsum(logs) + tail)


def _ptilde_log(N: int, s: float, pmax: int) -> float:
    primes = np.asarray(primes_upto(pmax), dtype=float)
    primes = primes[_good_odd(primes.astype(np.int64), N)]
    terms = np.log1p(1.0 / ((1.0 + 1.0 / primes) * (primes ** (4.0 * s - 2.0) - 1.0)))
    tail = _log_tail(lambda t: 1.0 / ((1.0 + 1.0 / t) * (t ** (4.0 * s - 2.0) - 1.0)), pmax)
    return math.fsum(terms) + tail


def euler_Ptilde(N: int, s: float = 1.0, pmax: int = DEFAULT_PMAX) -> float:
    """prod_{p not dividing 2N} (1 + (1 + 1/p)^{-1} (p^{4s-2} - 1)^{-1})."""
    if s <= 0.75:
        raise ValueError("the product diverges for s <= 3/4")
    return math.exp(_ptilde_log(N, s, pmax))


def euler_Q(N: int, pmax: int = DEFAULT_PMAX) -> float:
    """Q(N), including the factor 4/3 for odd N."""
    return euler_Ptilde(N, 1.0, pmax) * (4.0 / 3.0 if N % 2 else 1.0)


def local_LE(curve: CurveRecord) -> float:
    """prod_{p|N} (1 - a_p/p)^{-1} (1 - p^{-2})^{-1} (1 - a_{p^2}/p^2), a_{p^2} = 1."""
    # with a_{p^2} = 1 the last two factors cancel
    return math.prod(1.0 / (1.0 - ap(curve, p) / p) for p in curve.bad_primes)


def c_N(N: int) -> float:
    gamma = residue_classes(N).gamma
    primes = {2} | set(prime_factors(N))
    return 3.0 * gamma / (PI ** 2 * N) * math.prod(1.0 / (1.0 - p ** -2.0) for p in primes)


# --- test functions ------------------------------------------------------------

def _smooth_step(x: np.ndarray) -> np.ndarray:
    # C-infinity step: 0 for x <= 0, 1 for x >= 1
    def h(z):
        return np.where(z > 0, np.exp(-1.0 / np.where(z > 0, z, 1.0)), 0.0)
    return h(x) / (h(x) + h(1.0 - x))


@dataclass(frozen=True)
class MomentConfig:
    """Test function F weighting |d|/Y in the first moments.

    ``sharp_halfpow`` is F(t) = 3/2 sqrt(t) on [0, 1]; ``smooth_bump`` rounds
    its edge off over ``width`` so that F is smooth with compact support.
    """
    test_function: str = "sharp_halfpow"
    width: float = 0.05

    def __post_init__(self):
        if self.test_function not in ("sharp_halfpow", "smooth_bump"):
            raise ValueError(f"unknown test function {self.test_function!r}")
        if self.test_function == "smooth_bump" and not 0 < self.width < 1:
            raise ValueError("bump width must lie in (0, 1)")
        if not self.integral_F > 0:
            raise ValueError("test function must have positive mean")

    def F(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= 1)
        base = np.where(inside, 1.5 * np.sqrt(np.clip(t, 0.0, 1.0)), 0.0)
        if self.test_function == "smooth_bump":
            base = base * _smooth_step((1.0 - t) / self.width)
        return base

    def _quad(self, g) -> float:
        # t = x^2 absorbs the square-root behaviour at 0
        x, w = np.polynomial.legendre.leggauss(400)
        if self.test_function == "sharp_halfpow":
            pieces = [(0.0, 1.0)]
        else:
            pieces = [(0.0, math.sqrt(1.0 - self.width)), (math.sqrt(1.0 - self.width), 1.0)]
        total = 0.0
        for a, b in pieces:
            xs = 0.5 * (b - a) * x + 0.5 * (b + a)
            total += 0.5 * (b - a) * float(np.sum(w * g(xs)))
        return total

    @property
    def integral_F(self) -> float:
        if self.test_function == "sharp_halfpow":
            return 1.0
        return self._quad(lambda x: self.F(x * x) * 2.0 * x)

    @property
    def weighted_log_integral(self) -> float:
        """int F(t) log t dt."""
        if self.test_function == "sharp_halfpow":
            return -2.0 / 3.0
        return self._quad(lambda x: self.F(x * x) * 2.0 * np.log(np.maximum(x, 1e-300)) * 2.0 * x)


# --- constants -------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantBundle:
    label: str
    N: int
    rank: int
    omega_volume: float
    L_E1: float            # L(E, 1)
    L_E1prime: float       # L'(E, 1), NaN for rank 0
    gamma4N: int
    c_N: float
    P1: float
    Q_N: float
    L_E: float
    sigma2: float
    sym2_at_2: float
    L1: float
    L1prime: float
    Ltilde1: float
    Ltilde1prime: float
    alpha_N: float
    beta_N: float
    alpha_tilde: float
    beta_tilde: float
    C_Tr0: float
    C_Tr1: float
    C_P: float
    C_Pprime: float
    gamma_E: float
    smoothing_M: float

    @property
    def C_Tr(self) -> float:
        """The trace constant matching the rank."""
        return self.C_Tr0 if self.rank == 0 else self.C_Tr1


def richardson_derivative(f: Callable[[float], float], x: float, h: float = DIFF_STEP) -> float:
    """Central difference at h and h/2 combined to cancel the h^2 term."""
    d1 = (f(x + h) - f(x - h)) / (2.0 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4.0 * d2 - d1) / 3.0


class ConstantCalculator:
    """Assembles L(s), L~(s) and the constants for one curve."""

    def __init__(self, curve: CurveRecord, pmax: int = DEFAULT_PMAX, M: float = DEFAULT_M,
                 tol: float = 1e-6):
        if curve.analytic_rank >= 2:
            raise UnsupportedSign(f"{curve.label}: analytic rank >= 2 is out of scope")
        self.curve = curve
        self.pmax = pmax
        self.series = SquareSeries.for_curve(curve, 2 * M)
        self.sigma = sigma2(curve, M, series=self.series, tol=tol)
        if self.sigma.M * 2 > self.series.capacity:
            self.series = SquareSeries.for_curve(curve, 2 * self.sigma.M)
        self.M = self.sigma.M * 2
        self._bad_ap = {p: ap(curve, p) for p in curve.bad_primes}

    def D(self, sigma: float) -> float:
        return self.series.extrapolated(self.M, sigma)

    def L(self, s: float) -> float:
        bad = math.prod((1.0 - p ** (-2.0 * s)) / (1.0 - a * p ** -s) for p, a in self._bad_ap.items())
        return self.D(2.0 * s) * bad * euler_P(self.curve, s, self.pmax)

    def Ltilde(self, s: float) -> float:
        N = self.curve.N
        odd = 4.0 / 3.0 if N % 2 else 1.0
        return (self.D(2.0 * s) * zeta_N(N, 4.0 * s - 2.0) / zeta_N(N, 2.0 * s)
                * euler_Ptilde(N, s, self.pmax) * odd)

    def bundle(self, moment: MomentConfig | None = None) -> ConstantBundle:
        moment = moment or MomentConfig()
        curve = self.curve
        N = curve.N
        eng = engine(curve)
        omega = complex_volume(curve)
        L_E1 = eng.L_value_at_1
        L_E1prime = eng.L_deriv_at_1 if curve.analytic_rank == 1 else math.nan
        gamma4N = residue_classes(N).gamma
        cn = c_N(N)
        P1 = euler_P(curve, 1.0, self.pmax)
        Q = euler_Q(N, self.pmax)
        LE = local_LE(curve)
        s2 = self.sigma.value
        sym2 = zeta_N(N, 2.0) * s2
        L1 = self.L(1.0)
        L1p = richardson_derivative(self.L, 1.0)
        Lt1 = self.Ltilde(1.0)
        Lt1p = richardson_derivative(self.Ltilde, 1.0)
        intF = moment.integral_F
        logF = moment.weighted_log_integral
        alpha = cn * L1 * intF
        beta = cn * (intF * (L1p + L1 * (math.log(math.sqrt(N) / (2 * PI)) - EULER_GAMMA)) + L1 * logF)
        alpha_t = cn * Lt1 * intF
        beta_t = cn * (intF * (Lt1p + Lt1 * (math.log(N / (4 * PI ** 2)) - 2 * EULER_GAMMA))
                       + Lt1 * logF)
        bad_sq = math.prod(1.0 / (1.0 - p ** -2.0) for p in curve.bad_primes)
        C_P = (2.0 / PI) * cn * Q * sym2 / (PI * omega) * bad_sq
        C_Pp = (C_P * (math.log(N / (4 * PI ** 2)) - 2.0 / 3.0 - 2 * EULER_GAMMA)
                + cn / (3.0 * omega) * Lt1p)
        tr_common = (2.0 / PI) * cn * P1 * sym2 / (PI * omega) * LE
        C_Tr0 = tr_common * L_E1
        C_Tr1 = tr_common * L_E1prime
        gE = gamma_E(curve) if curve.analytic_rank == 0 else math.nan
        return ConstantBundle(curve.label, N, curve.analytic_rank, omega, L_E1, L_E1prime,
                              gamma4N, cn, P1, Q, LE, s2, sym2, L1, L1p, Lt1, Lt1p,
                              alpha, beta, alpha_t, beta_t, C_Tr0, C_Tr1, C_P, C_Pp, gE,
                              self.M)


def constants(curve: CurveRecord, pmax: int = DEFAULT_PMAX,
              moment: MomentConfig | None = None) -> ConstantBundle:
    return ConstantCalculator(curve, pmax).bundle(moment)


def gamma_E(curve: CurveRecord) -> float:
    """L(E,1)^{-1} prod_{p|N} (1 + a_p/p)^{-1}; rank 0 only."""
    if curve.analytic_rank != 0:
        raise UnsupportedSign(f"{curve.label}: gamma_E needs L(E,1) != 0")
    prod = math.prod(1.0 + ap(curve, p) / p for p in curve.bad_primes)
    return 1.0 / (engine(curve).L_value_at_1 * prod)


def C_P_from_degree(N: int, degree: int, manin: int = 1, pmax: int = DEFAULT_PMAX) -> float:
    """C_P with L(Sym^2 E, 2)/(pi Omega) replaced by deg/(N c^2).

    For odd N this is (8/(pi^3 c^2)) Q(N) prod_{p|N}(1-p^-2)^-2 gamma(4N) deg / N^2.
    """
    bad_sq = math.prod(1.0 / (1.0 - p ** -2.0) for p in prime_factors(N))
    return (2.0 / PI) * c_N(N) * euler_Q(N, pmax) * degree / (N * manin ** 2) * bad_sq


def predicted_trace_sum(bundle: ConstantBundle, Y: float, full: bool = True) -> float:
    """Main terms of sum_{|d| <= Y} h(Tr_d)."""
    y32 = Y ** 1.5
    if bundle.rank == 1:
        return bundle.C_Tr1 * y32
    C = bundle.C_Tr0
    out = C * y32 * math.log(Y)
    if full:
        second = (bundle.L_E1 * bundle.c_N / (3.0 * bundle.omega_volume)
                  * (bundle.L1prime - bundle.L1 * (2.0 / 3.0 + math.log(2 * PI) + EULER_GAMMA)))
        out += (C / 2.0 * math.log(bundle.N) + second) * y32
    return out


def predicted_point_sum(bundle: ConstantBundle, Y: float, full: bool = True) -> float:
    """C_P Y^{3/2} log Y (+ C_P' Y^{3/2})."""
    y32 = Y ** 1.5
    out = bundle.C_P * y32 * math.log(Y)
    if full:
        out += bundle.C_Pprime * y32
    return out
