import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selberg_lab import arith, dirpoly
from selberg_lab.errors import InvalidArgument, ScheduleInfeasible

SMALL = {"X": 50, "Y": 10, "sigma0": 0.5, "K1": 5, "K2": 2}


def test_schedule_asymptotic_example():
    s = dirpoly.schedule(1e19)
    assert math.log(1e19) == pytest.approx(43.75, abs=0.01)
    assert s.W == pytest.approx(3.12, abs=0.01)
    assert s.sigma0 == pytest.approx(0.5714, abs=1e-4)
    assert s.Y == pytest.approx(21.4, abs=0.1)
    assert s.X == pytest.approx(5.7e10, rel=0.02)
    assert not s.overridden


def test_schedule_infeasible_and_override():
    with pytest.raises(ScheduleInfeasible):
        dirpoly.schedule(1e6)
    s = dirpoly.schedule(1e5, SMALL)
    assert s.overridden and s.X == 50 and s.k1 == 5
    with pytest.raises(InvalidArgument):
        dirpoly.schedule(1e5, {"Z": 1})
    with pytest.raises(ScheduleInfeasible):
        dirpoly.schedule(1e5, {**SMALL, "K2": 9})


def test_p_series_primes_only(delta_small):
    empty = dirpoly.schedule(1e5, {**SMALL, "X": 1.5, "Y": 1.5})
    assert dirpoly.p_series(delta_small, 0.5 + 10j, empty, "primes_only").value == 0
    sched = dirpoly.schedule(1e5, SMALL)
    v = dirpoly.p_series(delta_small, sched.sigma0, sched, "primes_only").value
    assert abs(v.imag) < 1e-15
    primes = arith.sieve_primes(50).primes_upto(50)
    s = 0.5 + 77j
    direct = sum(delta_small.table[int(p)] * p ** (-s) for p in primes)
    assert abs(dirpoly.p_series(delta_small, s, sched, "primes_only").value - direct) < 1e-13


def test_p_series_full_is_log_of_euler_product(delta_small):
    # for a Y-only schedule with X large the full series approximates log L; check a single
    # local factor instead: c(p^k) = (a^k + b^k)/k with a + b = lambda(p), ab = 1
    sched = dirpoly.schedule(1e5, {"X": 40, "Y": 40, "sigma0": 0.5, "K1": 5, "K2": 2})
    n, c = dirpoly.series_terms(delta_small, sched, "full")
    lam2 = delta_small.table[2]
    a, b = np.roots([1, -lam2, 1])
    for k in range(1, 6):
        i = int(np.flatnonzero(n == 2**k)[0])
        assert c[i] == pytest.approx(((a**k + b**k) / k).real, abs=1e-13)


def test_p_series_split(delta_small):
    sched = dirpoly.schedule(1e5, SMALL)
    s = 0.6 + 123j
    full = dirpoly.p_series(delta_small, s, sched, "full").value
    low = dirpoly.p_series(delta_small, s, sched, "low").value
    high = dirpoly.p_series(delta_small, s, sched, "high").value
    assert abs(full - low - high) < 1e-13


def test_a_predicate_examples():
    sched = dirpoly.schedule(1e5, {"X": 50, "Y": 10, "sigma0": 0.5, "K1": 3, "K2": 2})
    for v in ("a", "a1", "a2"):
        assert dirpoly.a_predicate(1, sched, v) == 1
    assert dirpoly.a_predicate(8, sched, "a1") == 1
    assert dirpoly.a_predicate(16, sched, "a1") == 0
    assert dirpoly.a_predicate(53, sched) == 0
    assert dirpoly.a_predicate(2 * 59, sched) == 0


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 10**5))
def test_a_factorizes(n):
    sched = dirpoly.schedule(1e5, {"X": 50, "Y": 10, "sigma0": 0.5, "K1": 3, "K2": 2})
    smooth = math.prod(p**e for p, e in arith.factorize(n) if p <= sched.Y)
    rough = n // smooth
    assert dirpoly.a_predicate(n, sched) == dirpoly.a_predicate(smooth, sched, "a1") * dirpoly.a_predicate(
        rough, sched, "a2"
    )


def test_mollifier_trivial_and_oracle(delta_small):
    empty = dirpoly.schedule(1e5, {**SMALL, "X": 1.5, "Y": 1.5})
    assert dirpoly.mollifier(delta_small, 0.5 + 5j, empty).value == 1
    sched = dirpoly.schedule(1e5, {"X": 60, "Y": 12, "sigma0": 0.55, "K1": 2, "K2": 1})
    s = np.array([0.55 + 10j, 0.55 + 1e4j, 0.7 - 33j])
    for variant in ("M", "M1", "M2"):
        fast = dirpoly.mollifier(delta_small, s, sched, variant)
        slow = dirpoly.mollifier_bruteforce(delta_small, s, sched, variant)
        assert np.allclose(fast.value, slow.value, rtol=1e-12, atol=1e-12)
        assert fast.term_count == len(dirpoly.mollifier_support(sched, variant))


def test_mollifier_support_predicate():
    sched = dirpoly.schedule(1e5, {"X": 40, "Y": 8, "sigma0": 0.55, "K1": 2, "K2": 1})
    support = set(dirpoly.mollifier_support(sched))
    top = max(support)
    expect = {n for n in range(1, top + 1) if arith.mobius(n) != 0 and dirpoly.a_predicate(n, sched)}
    assert support == expect


def test_script_m_examples(delta_small):
    sched = dirpoly.schedule(1e5, {"X": 50, "Y": 10, "sigma0": 0.5, "K1": 40, "K2": 40})
    assert dirpoly.script_m(delta_small, 0.5, sched, 1, P=np.array(0j)).value == 1
    z = np.array([0.3 - 0.9j, -1.0, 0.5j])
    out = dirpoly.script_m(delta_small, 0.5, sched, 2, P=z).value
    assert np.allclose(out, np.exp(-z), rtol=0, atol=1e-12)


def test_truncated_exp_examples():
    err, bound = dirpoly.truncated_exp_check(1, 0)
    assert err == 0
    err, bound = dirpoly.truncated_exp_check(1, -1)
    assert err <= bound
    err, bound = dirpoly.truncated_exp_check(5, 5j)
    assert err <= bound
    assert dirpoly.tail_majorant(5, 5) <= mpmath.exp(-495)
    with pytest.raises(InvalidArgument):
        dirpoly.truncated_exp_check(1, 2)
