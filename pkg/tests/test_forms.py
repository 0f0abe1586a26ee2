import math
from fractions import Fraction

import numpy as np
import pytest

from selberg_lab import arith, forms
from selberg_lab.errors import InvalidArgument, ResourceLimit

# tau(n), n = 1..10, from the classical table of Ramanujan's function
TAU = [1, -24, 252, -1472, 4830, -6048, -16744, 84480, -113643, -115920]


def naive_series(limit):
    """q prod (1-q^m)^24 by repeated multiplication with Python ints."""
    c = [0] * limit
    c[0] = 1
    for m in range(1, limit):
        for _ in range(24):
            for i in range(limit - 1, m - 1, -1):
                c[i] -= c[i - m]
    return [0] + c


def test_tau_matches_table_and_naive_product():
    raw = forms.tau_series(60)
    assert raw[1:11] == TAU
    assert raw == naive_series(60)


def test_delta_examples():
    t = forms.delta_coefficients(100)
    assert t[1] == 1
    assert t[2] == pytest.approx(-0.5303300859, abs=1e-9)
    assert t[3] == pytest.approx(252 / 3**5.5, rel=1e-14)
    assert t[3] == pytest.approx(0.5987330, abs=1e-5)


def test_weight16_matches_independent_product():
    limit = 40
    tau = naive_series(limit)
    e4 = [1] + [240 * sum(d**3 for d in range(1, n + 1) if n % d == 0) for n in range(1, limit + 1)]
    prod = [sum(e4[i] * tau[n - i] for i in range(n + 1)) for n in range(limit + 1)]
    assert forms.weight16_series(limit) == prod
    t = forms.weight16_coefficients(limit)
    assert t[1] == 1
    assert t[2] == pytest.approx(prod[2] / 2**7.5, rel=1e-15)


def test_hecke_relation_prime_squares():
    t = forms.delta_coefficients(10000)
    for p in arith.sieve_primes(100).primes_upto(100):
        p = int(p)
        assert t.raw[p * p] == t.raw[p] ** 2 - p**11


def test_sym2_examples():
    d = forms.delta_coefficients(10000)
    s = forms.sym_square_lift(d, 1000)
    assert s[1] == 1
    assert s[2] == pytest.approx(-0.71875, abs=1e-12)
    assert s[2] == pytest.approx(d[4], abs=1e-12)
    assert s[6] == pytest.approx(s[2] * s[3], abs=1e-12)
    exact = (Fraction(24**2, 2**11) - 1) * (Fraction(252**2, 3**11) - 1)
    assert s[6] == pytest.approx(float(exact), rel=1e-13)
    assert s[6] == pytest.approx(0.4610930, abs=1e-5)


def test_sym2_prime_values_two_ways():
    d = forms.delta_coefficients(10000)
    s = forms.sym_square_lift(d, 10000)
    for p in arith.sieve_primes(100).primes_upto(100):
        p = int(p)
        assert s[p] == pytest.approx(d[p] ** 2 - 1, abs=1e-12)
        assert s[p] == pytest.approx(d[p * p], abs=1e-12)


def test_sym2_needs_degree_two():
    s = forms.sym_square_lift(forms.delta_coefficients(100))
    with pytest.raises(InvalidArgument):
        forms.sym_square_lift(s)
    with pytest.raises(InvalidArgument):
        forms.sym_square_lift(forms.delta_coefficients(100), 200)


def test_satake_deterministic():
    d1, t1 = forms.satake_random_form(42, 2, 2000)
    d2, t2 = forms.satake_random_form(42, 2, 2000)
    assert t1.values.tobytes() == t2.values.tobytes()
    assert t1[1] == 1
    _, t3 = forms.satake_random_form(42, 3, 2000)
    assert t3[1] == 1
    assert forms.check_table(t1) == []
    assert forms.check_table(t3) == []
    with pytest.raises(InvalidArgument):
        forms.satake_random_form(1, 4, 100)


def test_sato_tate_inverse_cdf():
    u = np.linspace(0.01, 0.99, 50)
    th = forms.sato_tate_angles(u)
    assert np.allclose((2 * th - np.sin(2 * th)) / (2 * math.pi), u, atol=1e-12)


def test_check_table_examples():
    assert forms.check_table(forms.delta_coefficients(10000), exact=True) == []
    t = forms.delta_coefficients(50)
    v = t.values.copy()
    v[1] = 2
    kinds = {x.kind for x in forms.check_table(forms.CoefficientTable("x", 50, v))}
    assert "normalization" in kinds
    v = t.values.copy()
    v[6] += 0.5
    kinds = {x.kind for x in forms.check_table(forms.CoefficientTable("x", 50, v))}
    assert "multiplicativity" in kinds


def test_registry_and_caps(tmp_path):
    assert forms.describe("delta").arch_params == (5.5, 6.5)
    assert forms.describe("sym2_delta").degree == 3
    with pytest.raises(InvalidArgument):
        forms.describe("nope")
    with pytest.raises(ResourceLimit):
        forms.build_table("delta", forms.TABLE_CAP + 1)
    a = forms.coefficients("delta", 500, tmp_path)
    b = forms.coefficients("delta", 500, tmp_path)
    assert a.digest() == b.digest()
    assert forms.prime_coefficients_differ(forms.build_table("delta", 1000), forms.build_table("weight16", 1000))


def test_descriptor_dual_closure():
    desc = forms.FormDescriptor("x", 2, (1 + 2j, 1 - 2j), True)
    assert desc.shifts_closed_under_dual()
    assert not forms.FormDescriptor("y", 2, (1 + 2j, 3.0), False).shifts_closed_under_dual()
    with pytest.raises(InvalidArgument):
        forms.FormDescriptor("z", 2, (1.0,))
