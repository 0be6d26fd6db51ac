"""Central values/derivatives and Gross-Zagier heights.

All series are evaluated with exponentially decaying kernels and
Neumaier-compensated accumulation in a fixed order, so a given
(curve, discriminant, truncation) always produces the same bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit

from .curve_model import CoefficientTable, CurveRecord, an_table, complex_volume
from .quad_arith import DiscriminantRecord, chi_table
from .specfun import e1_scalar, v_scalar

TWO_PI = 2.0 * math.pi
FOUR_PI2 = 4.0 * math.pi * math.pi


class UnsupportedSign(ValueError):
    """The requested quantity vanishes identically or is never needed."""


@dataclass(frozen=True)
class HeightRecord:
    d: int
    u: int
    L_twist_value: float
    L_twist_deriv: float
    Lprime_rankin: float
    Lprime_over_K: float
    height_point: float
    height_trace: float

    @property
    def abs_d(self) -> int:
        return -self.d

    @property
    def pairing_sum(self) -> float:
        """Sum of <P, P^sigma> over non-trivial sigma."""
        return self.height_trace - self.height_point


def t_cut(eps_trunc: float) -> float:
    """Largest kernel argument kept in the Rankin-Selberg double sum."""
    return (math.log(1.0 / eps_trunc) / 2.0 + 6.0) ** 2


def series_length(c: float, eps: float) -> int:
    """Smallest T with 2 exp(-c(T+1)) / (1 - exp(-c)) <= eps.

    |a_n|/n <= d(n)/sqrt(n) <= 2, so this bounds the tail of
    sum a_n chi(n)/n w(c n) for w = exp or E_1 (once c T >= 1).
    """
    T = math.log(2.0 / (eps * -math.expm1(-c))) / c - 1.0
    return max(1, int(math.ceil(T)))


@njit(cache=True, nogil=True)
def _twist_sum(an, chi, modulus, c, T, deriv):
    s = 0.0
    comp = 0.0
    for n in range(1, T + 1):
        a = an[n]
        if a == 0:
            continue
        ch = chi[n % modulus]
        if ch == 0:
            continue
        x = c * n
        w = e1_scalar(x) if deriv else math.exp(-x)
        term = a * ch * w / n
        t = s + term
        if abs(s) >= abs(term):
            comp += (s - t) + term
        else:
            comp += (term - t) + s
        s = t
    return 2.0 * (s + comp)


@njit(cache=True, nogil=True)
def _rankin_sum(an, absd, mweights, X, tcut):
    k = 39.47841760435743 / X  # 4 pi^2 / X
    nmax = int(tcut / k)
    limit4 = 4 * nmax
    s = 0.0
    comp = 0.0
    v = 0
    while absd * v * v <= limit4:
        base = absd * v * v
        u = v % 2
        while base + u * u <= limit4:
            if u > 0 or v > 0:
                n = (base + u * u) // 4
                a = an[n]
                if a != 0:
                    t1 = k * n
                    inner = 0.0
                    m = 1
                    while True:
                        t = t1 * m * m
                        if t > tcut:
                            break
                        mw = mweights[m]
                        if mw != 0.0:
                            inner += mw * v_scalar(t)
                        m += 1
                    weight = 2.0 if (u > 0 and v > 0) else 1.0
                    term = a * weight * inner / n
                    t2 = s + term
                    if abs(s) >= abs(term):
                        comp += (s - t2) + term
                    else:
                        comp += (term - t2) + s
                    s = t2
            u += 2
        v += 1
    return s + comp


_TABLES: dict[tuple, CoefficientTable] = {}


def coefficients(curve: CurveRecord, X: int) -> CoefficientTable:
    """A coefficient table covering a_1 .. a_X, reusing a larger one if held."""
    key = (curve.label, curve.ainvs)
    held = _TABLES.get(key)
    if held is None or held.bound < X:
        held = an_table(curve, max(X, 64))
        _TABLES[key] = held
    return held


class HeightEngine:
    """Per-curve evaluator of every L-quantity attached to a discriminant.

    One immutable coefficient table serves all discriminants, so instances
    can be shared between worker threads (the kernels release the GIL).
    """

    def __init__(self, curve: CurveRecord, eps_trunc: float = 1e-9,
                 trunc_scale: float = 1.0, table: CoefficientTable | None = None):
        if curve.analytic_rank >= 2:
            raise UnsupportedSign(f"{curve.label}: analytic rank >= 2 is out of scope")
        self.curve = curve
        self.eps_trunc = eps_trunc
        self.trunc_scale = trunc_scale
        self.tcut = t_cut(eps_trunc) * trunc_scale
        self._table = table
        self._m_coprime_cache: np.ndarray | None = None

    # -- table handling ----------------------------------------------------
    def table_for(self, X: int) -> CoefficientTable:
        if self._table is not None and self._table.bound >= X:
            return self._table
        self._table = coefficients(self.curve, X)
        return self._table

    def rankin_bound(self, X: float) -> int:
        return int(self.tcut * X / FOUR_PI2)

    def twist_length(self, absd: int) -> int:
        c = TWO_PI / (absd * math.sqrt(self.curve.N))
        return int(math.ceil(series_length(c, self.eps_trunc) * self.trunc_scale))

    def needed_bound(self, max_absd: int) -> int:
        N = self.curve.N
        return max(self.rankin_bound(max_absd * N), self.twist_length(max_absd))

    def prepare(self, max_absd: int) -> None:
        self.table_for(self.needed_bound(max_absd))

    # -- untwisted ---------------------------------------------------------
    @cached_property
    def volume(self) -> float:
        return complex_volume(self.curve)

    def _series(self, absd: int, chi: np.ndarray, deriv: bool) -> float:
        T = self.twist_length(absd)
        table = self.table_for(T)
        c = TWO_PI / (absd * math.sqrt(self.curve.N))
        return _twist_sum(table.coeffs, chi, chi.shape[0], c, T, deriv)

    @cached_property
    def L_value_at_1(self) -> float:
        if self.curve.omega == -1:
            return 0.0
        return self._series(1, np.ones(1, dtype=np.int8), False)

    @cached_property
    def L_deriv_at_1(self) -> float:
        if self.curve.omega == 1:
            raise UnsupportedSign(f"{self.curve.label}: L'(E,1) is only computed for sign -1")
        return self._series(1, np.ones(1, dtype=np.int8), True)

    # -- twisted -----------------------------------------------------------
    def L_twist_value(self, rec: DiscriminantRecord, chi: np.ndarray | None = None) -> float:
        # the twist has sign -omega
        if self.curve.omega == 1:
            return 0.0
        chi = chi_table(rec.d) if chi is None else chi
        return self._series(rec.abs_d, chi, False)

    def L_twist_deriv(self, rec: DiscriminantRecord, chi: np.ndarray | None = None) -> float:
        if self.curve.omega == -1:
            raise UnsupportedSign("twist has sign +1; its central derivative is not used")
        chi = chi_table(rec.d) if chi is None else chi
        return self._series(rec.abs_d, chi, True)

    def L_over_K_deriv(self, rec: DiscriminantRecord, chi: np.ndarray | None = None) -> float:
        if self.curve.analytic_rank == 0:
            return self.L_value_at_1 * self.L_twist_deriv(rec, chi)
        return self.L_deriv_at_1 * self.L_twist_value(rec, chi)

    # -- Rankin-Selberg ----------------------------------------------------
    def _m_weights(self, chi: np.ndarray, mmax: int) -> np.ndarray:
        m = np.arange(mmax + 1)
        weights = np.zeros(mmax + 1)
        weights[1:] = chi[m[1:] % chi.shape[0]] / m[1:]
        weights[np.gcd(m, self.curve.N) != 1] = 0.0
        return weights

    def A_d(self, rec: DiscriminantRecord, X: float, chi: np.ndarray | None = None) -> float:
        if X <= 0:
            raise ValueError("X must be positive")
        chi = chi_table(rec.d) if chi is None else chi
        table = self.table_for(max(self.rankin_bound(X), 1))
        mmax = int(math.sqrt(self.tcut * X / FOUR_PI2)) + 1
        weights = self._m_weights(chi, mmax)
        return _rankin_sum(table.coeffs, rec.abs_d, weights, float(X), self.tcut)

    def Lprime_rankin(self, rec: DiscriminantRecord, chi: np.ndarray | None = None) -> float:
        # r_d counts lattice points up to sign, i.e. u generators per principal
        # ideal; the series needs one term per ideal
        return 2.0 * self.A_d(rec, rec.abs_d * self.curve.N, chi) / rec.u

    # -- heights -----------------------------------------------------------
    def gz_factor(self, rec: DiscriminantRecord) -> float:
        return rec.u ** 2 * math.sqrt(rec.abs_d) / (2.0 * self.volume)

    def heights(self, rec: DiscriminantRecord) -> HeightRecord:
        chi = chi_table(rec.d)
        rank = self.curve.analytic_rank
        if rank == 0:
            tw_val = 0.0
            tw_der = self.L_twist_deriv(rec, chi)
            over_k = self.L_value_at_1 * tw_der
        else:
            tw_val = self.L_twist_value(rec, chi)
            tw_der = math.nan
            over_k = self.L_deriv_at_1 * tw_val
        rankin = self.Lprime_rankin(rec, chi)
        g = self.gz_factor(rec)
        return HeightRecord(rec.d, rec.u, tw_val, tw_der, rankin, over_k,
                            g * rankin, g * over_k)


_ENGINES: dict[tuple, HeightEngine] = {}


def engine(curve: CurveRecord, eps_trunc: float = 1e-9) -> HeightEngine:
    key = (curve, eps_trunc)
    if key not in _ENGINES:
        _ENGINES[key] = HeightEngine(curve, eps_trunc)
    return _ENGINES[key]


def L_value_at_1(curve: CurveRecord) -> float:
    return engine(curve).L_value_at_1


def L_deriv_at_1(curve: CurveRecord) -> float:
    return engine(curve).L_deriv_at_1


def L_twist_value(curve: CurveRecord, rec: DiscriminantRecord) -> float:
    return engine(curve).L_twist_value(rec)


def L_twist_deriv(curve: CurveRecord, rec: DiscriminantRecord) -> float:
    return engine(curve).L_twist_deriv(rec)


def L_over_K_deriv(curve: CurveRecord, rec: DiscriminantRecord) -> float:
    return engine(curve).L_over_K_deriv(rec)


def A_d(curve: CurveRecord, rec: DiscriminantRecord, X: float) -> float:
    return engine(curve).A_d(rec, X)


def Lprime_rankin(curve: CurveRecord, rec: DiscriminantRecord) -> float:
    return engine(curve).Lprime_rankin(rec)


def heights(curve: CurveRecord, rec: DiscriminantRecord) -> HeightRecord:
    return engine(curve).heights(rec)
