import math

import pytest
from hypothesis import given, settings, strategies as st

from heegner_heights.quad_arith import (
    DiscriminantRecord, chi_table, class_number, enumerate_D, kronecker, r_d, r_d_batch,
    residue_classes,
)


def factor(n):
    out, p = [], 2
    while p * p <= n:
        while n % p == 0:
            out.append(p)
            n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def kronecker_oracle(a, b):
    """Kronecker symbol from Euler's criterion at each prime factor of b > 0."""
    result = 1
    for p in factor(b):
        if p == 2:
            result *= 0 if a % 2 == 0 else (1 if a % 8 in (1, 7) else -1)
        else:
            r = pow(a % p, (p - 1) // 2, p)
            result *= 0 if r == 0 else (1 if r == 1 else -1)
    return result


def squarefree(n):
    return all(n % (p * p) for p in range(2, int(math.isqrt(n)) + 1))


def test_kronecker_examples():
    assert kronecker(-7, 2) == 1
    assert kronecker(-3, 2) == -1
    assert kronecker(-4, 3) == -1
    assert kronecker(5, 1) == 1
    assert kronecker(-7, 7) == 0


@given(st.integers(-3000, 3000), st.integers(1, 3000))
@settings(max_examples=1500, deadline=None)
def test_kronecker_against_euler_criterion(a, b):
    assert kronecker(a, b) == kronecker_oracle(a, b)


@given(st.sampled_from([d for d in range(-3, -600, -4) if squarefree(-d)]),
       st.integers(1, 10 ** 5), st.integers(1, 10 ** 5))
@settings(max_examples=2000, deadline=None)
def test_character_table(d, m, n):
    chi = chi_table(d)
    q = -d
    assert chi[m * n % q] == chi[m % q] * chi[n % q]
    assert chi[m % q] == kronecker(d, m)


def test_character_is_odd():
    for d in (-3, -7, -11, -15, -23, -35, -143):
        chi = chi_table(d)
        assert chi[-d - 1] == -1


def test_residue_classes():
    assert residue_classes(1).residues == frozenset({1})
    s = residue_classes(11)
    assert s.modulus == 44 and s.residues == frozenset({1, 5, 9, 25, 37})
    assert s.gamma == 5
    assert -7 in s and -19 in s and -15 not in s


@pytest.mark.parametrize("N", [11, 26, 37, 58, 91])
def test_enumerate_D_by_brute_force(N):
    mod = 4 * N
    squares = {nu * nu % mod for nu in range(mod) if math.gcd(nu, mod) == 1}
    expect = [d for d in range(-3, -3001, -1)
              if d % 4 == 1 and squarefree(-d) and d % mod in squares]
    got = [r.d for r in enumerate_D(N, 3000)]
    assert got == expect
    assert all(kronecker(d, N) == 1 for d in got)


def test_enumerate_D_small_and_d3():
    assert enumerate_D(11, 2.9) == []
    with_3 = enumerate_D(11, 100)
    assert with_3[0] == DiscriminantRecord(-7, 1)
    # -3 is a square mod 4*37 = 148, with three units
    assert enumerate_D(37, 10)[0] == DiscriminantRecord(-3, 3)
    assert [r.d for r in enumerate_D(37, 10, include_d3=False)] == [-7]


def test_discriminant_record_validation():
    with pytest.raises(ValueError):
        DiscriminantRecord(-8, 1)
    with pytest.raises(ValueError):
        DiscriminantRecord(-3, 1)
    assert DiscriminantRecord.of(-3).u == 3


def test_r_d_examples():
    # u^2 + 7 v^2 = 4n
    rec = DiscriminantRecord.of(-7)
    assert r_d(rec, 1) == 1          # (2, 0)
    assert r_d(rec, 2) == 2          # (1, +-1)
    assert r_d(rec, 4) == 3          # (4, 0), (3, +-1)... and (0, ...) none
    assert r_d(rec, 7) == 1          # (0, 2)
    assert r_d(DiscriminantRecord.of(-3), 1) == 3   # (2,0), (1,+-1)


def brute_r_d(absd, n):
    top = math.isqrt(4 * n)
    return sum(1 for u in range(0, top + 1) for v in range(-top, top + 1)
               if u * u + absd * v * v == 4 * n and (u > 0 or v > 0))


@pytest.mark.parametrize("d", [-3, -7, -11, -15, -19, -23, -35, -143])
def test_r_d_batch_pointwise_brute(d):
    rec = DiscriminantRecord.of(d)
    batch = r_d_batch(rec, 2000)
    for n in range(1, 2001):
        pw = r_d(rec, n)
        assert batch.get(n, 0) == pw
        if n <= 300:
            assert pw == brute_r_d(-d, n)


def test_r_d_summed_over_family_is_bounded():
    # for non-square n the solutions with v != 0 over all d number at most 4 sqrt(n)
    fam = enumerate_D(1, 4 * 600)
    for n in range(2, 600):
        if math.isqrt(n) ** 2 == n:
            continue
        total = sum(r_d(rec, n) for rec in fam if rec.abs_d <= 4 * n)
        assert total <= 4 * math.sqrt(n)


@pytest.mark.parametrize("d, h", [(-3, 1), (-7, 1), (-23, 3), (-47, 5), (-71, 7),
                                  (-163, 1), (-15, 2), (-4, 1), (-20, 2)])
def test_class_number_examples(d, h):
    assert class_number(d) == h


def test_class_number_formula():
    # h(d) = -(1/|d|) sum_{a<|d|} chi(a) a for fundamental d < -4
    for d in [d for d in range(-7, -2000, -4) if squarefree(-d)]:
        chi = chi_table(d)
        assert class_number(d) == -sum(int(chi[a]) * a for a in range(1, -d)) // -d


def test_class_number_domain():
    with pytest.raises(ValueError):
        class_number(5)
    with pytest.raises(ValueError):
        class_number(-6)
