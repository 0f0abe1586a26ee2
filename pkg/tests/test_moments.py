import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selberg_lab import arith, dirpoly, moments, stats
from selberg_lab.errors import InvalidArgument


def test_inner_integral_examples():
    assert moments.inner_t_integral(7, 7, 1e5) == 1e5
    m, n, T = 3, 5, 123.0
    r = math.log(m / n)
    t = np.linspace(T, 2 * T, 200001)
    f = np.exp(1j * r * t)
    numeric = np.sum((f[1:] + f[:-1]) / 2) * (t[1] - t[0])
    assert abs(moments.inner_t_integral(m, n, T) - numeric) < 1e-6


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 10**4), st.integers(1, 10**4), st.floats(100, 1e6))
def test_inner_integral_conjugate_symmetry(m, n, T):
    a = moments.inner_t_integral(m, n, T)
    b = moments.inner_t_integral(n, m, T)
    assert abs(a - np.conj(b)) <= 1e-9 * max(1.0, abs(a))
    assert abs(a) <= T + 1e-9 * T


def test_bruteforce_matches_quadrature_small(delta_small):
    T, X = 1e4, 30
    for k, l in [(0, 0), (1, 0), (1, 1), (2, 1), (2, 2)]:
        a = moments.bruteforce_mixed_moment(delta_small, k, l, T, X, 0.5).value
        b = moments.quadrature_mixed_moment(delta_small, k, l, T, X, 0.5).value
        assert abs(a - b) <= 1e-6 * max(abs(a), abs(b))
    assert moments.quadrature_mixed_moment(delta_small, 0, 0, T, X, 0.5).value == pytest.approx(T)


def test_moment_conjugate_symmetry(delta_small):
    a = moments.bruteforce_mixed_moment(delta_small, 2, 1, 1e5, 50, 0.5).value
    b = moments.bruteforce_mixed_moment(delta_small, 1, 2, 1e5, 50, 0.5).value
    assert abs(a - np.conj(b)) <= 1e-9 * abs(a)


def test_first_moment_bound(delta_small):
    X, sigma0 = 50, 0.5
    primes = arith.sieve_primes(50).primes_upto(50)
    val = moments.bruteforce_mixed_moment(delta_small, 1, 0, 1e5, X, sigma0).value
    gap = min(math.log(p) for p in primes)  # log-gap between p and 1
    assert abs(val) <= 2 * np.sum(primes ** (-sigma0)) / gap


def test_gaussian_prediction():
    assert moments.gaussian_moment_prediction(2, 0.7) == pytest.approx(0.7)
    assert moments.gaussian_moment_prediction(4, 1.0) == pytest.approx(3.0)
    with pytest.raises(InvalidArgument):
        moments.gaussian_moment_prediction(3, 1.0)


def test_joint_reduces_to_scaled_single(delta_small, weight16_small):
    a1 = 1.7
    j = moments.joint_bruteforce_moment(delta_small, weight16_small, a1, 0.0, 2, 1, 1e5, 50, 0.5).value
    s = moments.bruteforce_mixed_moment(delta_small, 2, 1, 1e5, 50, 0.5).value
    assert abs(j - a1**3 * s) <= 1e-12 * abs(j)
    r = moments.joint_bruteforce_moment(delta_small, weight16_small, 1.0, 1.0, 1, 1, 1e5, 50, 0.5)
    primes = arith.sieve_primes(50).primes_upto(50)
    direct = sum((delta_small.table[int(p)] + weight16_small.table[int(p)]) ** 2 / p for p in primes)
    assert r.detail["S"] == pytest.approx(direct, rel=1e-13)


def test_real_part_moment_second_is_one(delta_small):
    out = moments.real_part_moment(delta_small, 2, 1e8, 50, 0.5)
    assert out["normalized"] == pytest.approx(1.0, abs=0.05)


def _override(X, Y=None):
    return dirpoly.schedule(1e5, {"X": X, "Y": Y if Y is not None else X, "K1": 20, "K2": 10, "sigma0": 0.6})


def test_exp_residual_empty_schedule(delta_small):
    plan = stats.SamplePlan(1e3, 10, seed=3)
    rep = moments.prop3_residual_stats(delta_small, _override(1.5), plan)
    assert rep.metrics["median_residual"] == 0
    rep = moments.mollifier_consistency(delta_small, _override(1.5), plan)
    assert rep.metrics["mean_sq_diff_1"] == 0 and rep.metrics["mean_sq_diff_2"] == 0


def test_exp_residual_conjugation(delta_small):
    sched = _override(200, 20)
    s = 0.6 + 1j * np.array([1234.5, 4321.0])
    def resid(z):
        M = dirpoly.mollifier(delta_small, z, sched).value
        P = dirpoly.p_series(delta_small, z, sched).value
        return np.abs(M * np.exp(P) - 1)
    assert np.allclose(resid(s), resid(np.conj(s)), rtol=1e-12)


def test_lm_mean_square_report_shape(delta_small):
    plan = stats.SamplePlan(1e3, 12, seed=5)
    rep = moments.prop4_mean_square(delta_small, _override(100, 10), plan)
    assert rep.sample_count == 12
    assert set(rep.samples) == {"t", "value", "excluded"}
    assert rep.metrics["mean_square"] >= 0


def test_zero_window_integral(delta_small):
    t = 1000.0
    assert moments.prop1_window_check(delta_small, 0.5, t)[0] == 0
    lo, _ = moments.prop1_window_check(delta_small, 0.5 + 0.5 / math.log(t), t, epsabs=1e-3, grid=17)
    hi, rhs = moments.prop1_window_check(delta_small, 0.5 + 1 / math.log(t), t, epsabs=1e-3, grid=17)
    assert 0 < lo <= hi
    assert rhs == pytest.approx(1.0)
    with pytest.raises(InvalidArgument):
        moments.prop1_window_check(delta_small, 1.3, t)
