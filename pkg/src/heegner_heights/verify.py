"""Fast invariant checks, run by ``heegner-heights verify``."""

from __future__ import annotations

import math
import random
from typing import Callable

import numpy as np

from .asymptotics import sigma2
from .curve_model import CurveRecord, an_table, ap, ap_charsum, complex_volume
from .harness import compute_heights
from .lvalues import HeightEngine
from .quad_arith import DiscriminantRecord, chi_table, enumerate_D, kronecker, r_d, r_d_batch
from .specfun import PI, V, V_quad, W_deriv, W_deriv_quad, zeta_N


def _divisor_count(X: int) -> np.ndarray:
    d = np.zeros(X + 1, dtype=np.int64)
    for k in range(1, X + 1):
        d[k::k] += 1
    return d


def check_coefficients(curve: CurveRecord, X: int = 20000, pairs: int = 500) -> str | None:
    a = an_table(curve, X).coeffs
    dn = _divisor_count(X)
    n = np.arange(1, X + 1)
    if np.any(np.abs(a[1:]) > dn[1:] * np.sqrt(n) + 1e-9):
        return "Deligne bound violated"
    rng = random.Random(1)
    tested = 0
    while tested < pairs:
        m, k = rng.randint(2, 200), rng.randint(2, X // 200)
        if math.gcd(m, k) != 1 or m * k > X:
            continue
        tested += 1
        if a[m * k] != a[m] * a[k]:
            return f"a_{m * k} != a_{m} a_{k}"
    for p in (2, 3, 5, 7, 11, 13, 101, 199):
        if curve.N % p and ap(curve, p) != ap_charsum(curve, p):
            return f"two point counts disagree at p={p}"
    return None


def check_characters(curve: CurveRecord) -> str | None:
    rng = random.Random(2)
    for rec in enumerate_D(curve.N, 400):
        chi = chi_table(rec.d)
        if kronecker(rec.d, curve.N) != 1:
            return f"chi_{rec.d}(N) != 1"
        for _ in range(200):
            m1, m2 = rng.randint(1, 5000), rng.randint(1, 5000)
            if chi[m1 * m2 % rec.abs_d] != chi[m1 % rec.abs_d] * chi[m2 % rec.abs_d]:
                return f"chi_{rec.d} not multiplicative"
            if chi[m1 % rec.abs_d] != kronecker(rec.d, m1):
                return f"chi_{rec.d}({m1}) disagrees with the Kronecker symbol"
    return None


def check_r_d() -> str | None:
    for d in (-3, -7, -11, -19):
        rec = DiscriminantRecord.of(d)
        batch = r_d_batch(rec, 3000)
        for n in range(1, 3001):
            if batch.get(n, 0) != r_d(rec, n):
                return f"r_{d}({n}) batch/pointwise mismatch"
    return None


def check_kernels() -> str | None:
    for x in (0.01, 0.3, 1.0, 3.7, 10.0, 100.0, 400.0):
        ref = V_quad(x)
        if abs(V(x) - ref) > 1e-10 * ref:
            return f"V({x}) off quadrature"
    for x in (0.05, 1.0, 2.5, 20.0):
        ref = W_deriv_quad(x)
        if abs(W_deriv(x) - ref) > 1e-10 * ref:
            return f"E1({x}) off quadrature"
    if abs(zeta_N(2, 2.0) - math.pi ** 2 / 8) > 1e-12:
        return "zeta^{(2)}(2) != pi^2/8"
    return None


def check_heights(curve: CurveRecord, ymax: float = 600) -> str | None:
    recs = enumerate_D(curve.N, ymax)
    runs = [compute_heights(HeightEngine(curve), recs, workers=w) for w in (1, 4)]
    if runs[0] != runs[1]:
        return "results depend on the worker count"
    for r in runs[0]:
        if r.height_point < -1e-8 or r.height_trace < -1e-8:
            return f"negative height at d={r.d}"
    eng = HeightEngine(curve)
    for rec in recs[:5]:
        X0 = rec.abs_d * curve.N
        vals = [eng.A_d(rec, X) + eng.A_d(rec, X0 * X0 / X) for X in (0.5 * X0, X0, 2 * X0)]
        if max(vals) - min(vals) > 1e-6 * abs(vals[1]):
            return f"functional equation fails at d={rec.d}"
    return None


def check_degree(curve: CurveRecord) -> str | None:
    if curve.modular_degree is None:
        return None
    lhs = zeta_N(curve.N, 2.0) * sigma2(curve).value
    rhs = PI * complex_volume(curve) * curve.modular_degree / (curve.N * curve.manin_c ** 2)
    if abs(lhs / rhs - 1) > 5e-3:
        return f"degree identity off by {lhs / rhs - 1:.2e}"
    return None


def run_all(curves: dict[str, CurveRecord], labels=None, echo: Callable[[str], None] = print) -> bool:
    chosen = [curves[k] for k in (labels or [k for k in ("11a", "26A", "37A", "37B") if k in curves])]
    checks: list[tuple[str, Callable[[], str | None]]] = [
        ("kernels vs quadrature", check_kernels),
        ("r_d batch vs pointwise", check_r_d),
    ]
    for c in chosen:
        checks += [
            (f"{c.label}: coefficients", lambda c=c: check_coefficients(c)),
            (f"{c.label}: characters on the family", lambda c=c: check_characters(c)),
            (f"{c.label}: heights", lambda c=c: check_heights(c)),
            (f"{c.label}: degree identity", lambda c=c: check_degree(c)),
        ]
    ok = True
    for name, fn in checks:
        problem = fn()
        ok &= problem is None
        echo(f"{'PASS' if problem is None else 'FAIL'}  {name}" + (f": {problem}" if problem else ""))
    return ok
