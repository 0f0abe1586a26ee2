import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selberg_lab import forms, lfunc
from selberg_lab.errors import DomainError, InvalidArgument, TableTooShort


def test_log_gamma_examples():
    assert abs(lfunc.log_gamma_complex(1)) < 1e-15
    assert lfunc.log_gamma_complex(0.5) == pytest.approx(0.5723649429, abs=1e-10)
    assert lfunc.log_gamma_complex(5) == pytest.approx(math.log(24), abs=1e-14)
    with pytest.raises(DomainError):
        lfunc.log_gamma_complex(-2)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 50), st.floats(-1e4, 1e4))
def test_log_gamma_vs_mpmath(x, y):
    ref = complex(mpmath.loggamma(mpmath.mpc(x, y)))
    got = lfunc.log_gamma_complex(complex(x, y))
    assert abs(got - ref) <= 1e-12 * max(1.0, abs(ref))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.25, 10), st.floats(60, 2e5), st.floats(-2, 2), st.floats(-50, 50))
def test_log_gamma_ratio_vs_mpmath(x, y, a, b):
    z, w = complex(x, y), complex(a, b)
    mpmath.mp.dps = 40
    ref = complex(mpmath.loggamma(mpmath.mpc(z + w)) - mpmath.loggamma(mpmath.mpc(z)))
    mpmath.mp.dps = 15
    got = lfunc.log_gamma_ratio(z, w)
    # compare modulo 2 pi i (branch of the difference)
    d = got - ref
    d = complex(d.real, (d.imag + math.pi) % (2 * math.pi) - math.pi)
    assert abs(d) <= 1e-11 * max(1.0, abs(w) * math.log(abs(z)))


def test_gamma_factor_examples():
    zero = forms.FormDescriptor("zero", 3, (0.0, 0.0, 0.0))
    assert abs(lfunc.gamma_factor(zero, 1.0)) < 1e-14
    val = lfunc.gamma_factor(forms.describe("delta"), 1.7)
    assert abs(val.imag) < 1e-15
    with pytest.raises(DomainError):
        lfunc.gamma_factor(zero, -2.0)


def test_stirling_ratio():
    desc = forms.describe("sym2_delta")
    lhs, rhs = lfunc.stirling_ratio_check(desc, 0.5, 1e4)
    assert lhs == 0
    lhs, rhs = lfunc.stirling_ratio_check(desc, 0.6, 1e4)
    # oracle: direct high-precision log-gamma
    ref = 0.0
    for mu in desc.arch_params:
        a = mpmath.loggamma(mpmath.mpc(0.6 + mu, 1e4) / 2) - mpmath.loggamma(mpmath.mpc(0.5 + mu, 1e4) / 2)
        ref += float(a.real) - 0.05 * math.log(math.pi)
    assert lhs == pytest.approx(abs(ref), rel=1e-10)
    assert rhs == pytest.approx(0.1 * math.log(1e4))
    with pytest.raises(InvalidArgument):
        lfunc.stirling_ratio_check(desc, 0.6, 10)


def test_v_smoothing_examples():
    desc = forms.describe("delta")
    s = complex(0.5, 50)
    assert abs(lfunc.v_smoothing(desc, s, 1e-4) - 1) <= 0.05
    assert abs(lfunc.v_smoothing(desc, s, 1e3)) <= 1e-3
    v = lfunc.v_smoothing(desc, 0.75, np.array([0.1, 1.0, 3.0]))
    assert np.all(np.abs(v.imag) <= 1e-10)


def test_dirichlet_eval_basics(delta_small):
    assert lfunc.dirichlet_eval(delta_small, 0.5 + 3j, 1) == 1
    with pytest.raises(TableTooShort):
        lfunc.dirichlet_eval(delta_small, 2.0, delta_small.limit + 1)


def test_afe_matches_series_at_two():
    form = forms.load_form("delta", 10**6)
    direct = lfunc.dirichlet_eval(form, 2.0, 10**6)
    val = lfunc.afe_eval(form, 2.0)
    assert abs(val.L - direct) <= 1e-6 * abs(direct)


def test_afe_trivial_table_reduction():
    desc = forms.describe("delta")
    vals = np.zeros(101)
    vals[1] = 1
    form = forms.Form(desc, forms.CoefficientTable("trivial", 100, vals))
    cfg = lfunc.EvalConfig()
    s = complex(0.5, 40)
    k1 = lfunc.SmoothingKernel(desc, s, cfg)
    k2 = lfunc.SmoothingKernel(desc.dual(), 1 - s, cfg, tilt=-k1.tilt)
    ratio = np.exp(lfunc.gamma_factor(desc, 1 - s) - lfunc.gamma_factor(desc, s))
    expect = k1(np.array([1.0]))[0] + ratio * k2(np.array([1.0]))[0]
    assert abs(lfunc.afe_eval(form, s).L - expect) <= 1e-12 * max(1, abs(expect))


def test_afe_table_too_short(delta_small):
    with pytest.raises(TableTooShort) as err:
        lfunc.afe_eval(delta_small.with_table(delta_small.table.truncate(50)), complex(0.5, 500))
    assert err.value.required > 50


@pytest.mark.parametrize("t", [10.0, 137.5, 999.0])
def test_functional_equation_critical_line(delta_small, sym2_small, t):
    assert lfunc.functional_equation_residual(delta_small, complex(0.5, t)) <= 1e-4
    assert lfunc.functional_equation_residual(sym2_small, complex(0.5, t)) <= 1e-4


def test_functional_equation_off_line(delta_small):
    assert lfunc.functional_equation_residual(delta_small, complex(0.6, 100)) <= 1e-3


def test_value_independent_of_smoothing(delta_small):
    s = complex(0.5, 321.0)
    a = lfunc.afe_eval(delta_small, s).L
    b = lfunc.afe_eval(delta_small, s, lfunc.EvalConfig(kappa=1 / 32)).L
    assert abs(a - b) <= 1e-9 * abs(a)


def test_damped_integral_matches_afe(delta_small):
    s = complex(0.5, 50)
    rhs, err, method = lfunc.damped_integral_abs_sq(delta_small, s)
    lhs = abs(lfunc.afe_eval(delta_small, s).L) ** 2
    assert abs(lhs - rhs) <= 1e-3 * lhs
    assert rhs >= 0
