"""Dirichlet polynomials: parameter schedule, the prime series P, mollifiers and truncated exponentials."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import mpmath
import numpy as np

from . import arith
from .errors import InvalidArgument, ScheduleInfeasible, TableTooShort
from .forms import Form

ENUMERATION_CAP = 10**7
SCHEDULE_KEYS = ("W", "X", "Y", "sigma0", "K1", "K2")


@dataclass(frozen=True)
class ParameterSchedule:
    T: float
    W: float
    X: float
    Y: float
    sigma0: float
    K1: float
    K2: float
    overridden: bool = False

    @property
    def k1(self) -> int:
        return int(math.floor(self.K1))

    @property
    def k2(self) -> int:
        return int(math.floor(self.K2))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PolyValue:
    s: complex | np.ndarray
    value: complex | np.ndarray
    term_count: int


def _asymptotic(T: float) -> dict:
    L = math.log(T)
    LL = math.log(L)
    LLL = math.log(LL)
    W = LLL**4

    def power(e):
        try:
            return T**e
        except OverflowError:
            return math.inf

    return {
        "W": W,
        "X": power(1 / LLL**2),
        "Y": power(1 / LL**2),
        "sigma0": 0.5 + W / L,
        "K1": 100 * LL,
        "K2": 100 * LLL,
    }


def schedule(T: float, overrides: dict | None = None) -> ParameterSchedule:
    """Parameter schedule at height T; keys missing from ``overrides`` take their asymptotic values.

    Overridden schedules are checked against relaxed invariants (sigma0 = 1/2 and
    X < 2 are allowed, the latter giving empty prime sums).
    """
    if not T > math.e**math.e:
        raise InvalidArgument("schedule needs T > e^e")
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(SCHEDULE_KEYS)
    if unknown:
        raise InvalidArgument(f"unknown schedule keys: {sorted(unknown)}")
    vals = _asymptotic(T)
    if not overrides:
        if not vals["W"] >= 3:
            raise ScheduleInfeasible(
                f"asymptotic schedule at T={T:g} has W={vals['W']:.3g} < 3; supply overrides "
                "(X, Y, sigma0, K1, K2)"
            )
        sched = ParameterSchedule(T, **vals, overridden=False)
        _check(sched, strict=True)
        return sched
    vals.update({k: float(v) for k, v in overrides.items()})
    if "sigma0" in overrides and "W" not in overrides:
        vals["W"] = (vals["sigma0"] - 0.5) * math.log(T)
    missing = [k for k in SCHEDULE_KEYS if not math.isfinite(vals[k])]
    if missing:
        raise ScheduleInfeasible(f"asymptotic defaults at T={T:g} are not finite; override {missing}")
    sched = ParameterSchedule(T, **vals, overridden=True)
    _check(sched, strict=False)
    return sched


def _check(s: ParameterSchedule, strict: bool) -> None:
    problems = []
    if strict:
        if not 2 < s.Y <= s.X < s.T:
            problems.append("need 2 < Y <= X < T")
        if not 0.5 < s.sigma0 < 1:
            problems.append("need 1/2 < sigma0 < 1")
    else:
        if s.X >= 2 and not (s.Y <= s.X < s.T):
            problems.append("need Y <= X < T")
        if not 0.5 <= s.sigma0 < 1:
            problems.append("need 1/2 <= sigma0 < 1")
        if s.K1 < 0 or s.K2 < 0:
            problems.append("need K1, K2 >= 0")
    if s.K2 > s.K1:
        problems.append("need K2 <= K1")
    if problems:
        raise ScheduleInfeasible("; ".join(problems))


# ---------------------------------------------------------------------------
# the prime series

def _log_euler_coeffs(local: np.ndarray) -> np.ndarray:
    """Coefficients b_k of log(sum_k a_k x^k) with a_0 = 1 (rows = primes, columns = k)."""
    a = local
    b = np.zeros_like(a)
    for k in range(1, a.shape[1]):
        acc = k * a[:, k]
        for j in range(1, k):
            acc = acc - j * b[:, j] * a[:, k - j]
        b[:, k] = acc / k
    return b


def prime_power_terms(form: Form, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    """(n, c(n)) for prime powers lo < n <= hi, where c(n) = Lambda_f(n)/log n.

    c(p^k) is the x^k coefficient of log of the local factor sum_j lambda(p^j) x^j,
    which equals the Satake power sum (alpha_1^k + ... + alpha_d^k)/k.
    """
    hi = math.floor(hi)
    if hi > form.table.limit:
        raise TableTooShort(hi, form.table.limit)
    if hi < 2:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=form.table.values.dtype)
    primes = arith.sieve_primes(max(hi, 2)).primes_upto(hi)
    kmax = int(math.floor(math.log(hi) / math.log(2)))
    vals = form.table.values
    local = np.zeros((len(primes), kmax + 1), dtype=vals.dtype)
    local[:, 0] = 1
    pk = primes.astype(np.int64).copy()
    for k in range(1, kmax + 1):
        ok = pk <= hi
        local[ok, k] = vals[pk[ok]]
        pk = np.minimum(pk, hi + 1) * primes
    b = _log_euler_coeffs(local)
    ns, cs = [], []
    pk = primes.astype(np.int64).copy()
    for k in range(1, kmax + 1):
        ok = (pk <= hi) & (pk > lo)
        ns.append(pk[ok])
        cs.append(b[ok, k])
        pk = np.minimum(pk, hi + 1) * primes
    n = np.concatenate(ns)
    c = np.concatenate(cs)
    order = np.argsort(n, kind="stable")
    return n[order], c[order]


def series_terms(form: Form, sched: ParameterSchedule, variant: str) -> tuple[np.ndarray, np.ndarray]:
    """(n, coefficient) pairs making up p_series(variant)."""
    X, Y = sched.X, sched.Y
    if variant == "primes_only":
        if X < 2:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        if math.floor(X) > form.table.limit:
            raise TableTooShort(math.floor(X), form.table.limit)
        p = arith.sieve_primes(max(2, int(X))).primes_upto(X)
        return p, form.table.values[p]
    if variant in ("low", "high") and not math.isfinite(Y):
        raise InvalidArgument("variant low/high needs Y")
    bounds = {"full": (1, X), "low": (1, min(Y, X)), "high": (Y, X)}
    if variant not in bounds:
        raise InvalidArgument(f"unknown p_series variant {variant!r}")
    lo, hi = bounds[variant]
    return prime_power_terms(form, lo, hi)


def _eval_terms(n: np.ndarray, c: np.ndarray, s) -> np.ndarray:
    s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
    if n.size == 0:
        return np.zeros(s_arr.shape, dtype=complex)
    logn = np.log(n.astype(float))
    out = np.empty(s_arr.shape, dtype=complex)
    flat = s_arr.ravel()
    res = out.ravel()
    chunk = max(1, 4_000_000 // n.size)
    for i in range(0, flat.size, chunk):
        res[i : i + chunk] = np.exp(-np.outer(flat[i : i + chunk], logn)) @ c
    return out


def p_series(form: Form, s, sched: ParameterSchedule, variant: str = "full") -> PolyValue:
    n, c = series_terms(form, sched, variant)
    val = _eval_terms(n, c, s)
    nz = int(np.count_nonzero(c))
    return PolyValue(s, val if np.ndim(s) else complex(val[0]), nz)


# ---------------------------------------------------------------------------
# support predicates and mollifiers

def _counts(n: int, sched: ParameterSchedule, table=None) -> tuple[int, int, bool]:
    """(# prime factors <= Y, # prime factors in (Y, X], any factor > X), with multiplicity."""
    small = large = 0
    beyond = False
    for p, e in arith.factorize(n, table):
        if p <= sched.Y:
            small += e
        elif p <= sched.X:
            large += e
        else:
            beyond = True
    return small, large, beyond


def a_predicate(n: int, sched: ParameterSchedule, variant: str = "a", table=None) -> int:
    """Support indicator: a1 checks p <= Y with at most K1 factors, a2 checks Y < p <= X
    with at most K2 factors; a(n) = a1(smooth part) * a2(rough part)."""
    if n < 1:
        raise InvalidArgument("a_predicate needs n >= 1")
    small, large, beyond = _counts(n, sched, table)
    ok1 = small <= sched.K1
    ok2 = large <= sched.K2
    if variant == "a":
        return int(ok1 and ok2 and not beyond)
    if variant == "a1":
        return int(ok1 and large == 0 and not beyond)
    if variant == "a2":
        return int(ok2 and small == 0 and not beyond)
    raise InvalidArgument(f"unknown a-variant {variant!r}")


def mollifier_primes(sched: ParameterSchedule, variant: str) -> tuple[np.ndarray, int]:
    """Admissible primes and the maximal number of distinct factors for a mollifier variant."""
    if sched.X < 2:
        return np.zeros(0, dtype=np.int64), 0
    table = arith.sieve_primes(max(2, int(sched.X)))
    if variant == "M1":
        return table.primes_upto(min(sched.Y, sched.X)), sched.k1
    if variant == "M2":
        return table.primes_between(sched.Y, sched.X), sched.k2
    raise InvalidArgument(f"unknown mollifier factor {variant!r}")


def _elementary_alternating(x: np.ndarray, kmax: int) -> np.ndarray:
    """sum_{k <= kmax} (-1)^k e_k(x_1, ..., x_m) along the last axis of x (shape (..., m))."""
    e = np.zeros(x.shape[:-1] + (kmax + 1,), dtype=complex)
    e[..., 0] = 1
    for j in range(x.shape[-1]):
        xj = x[..., j : j + 1]
        # e_k <- e_k + x_j e_{k-1}, k descending
        e[..., 1:] = e[..., 1:] + xj * e[..., :-1]
    signs = (-1.0) ** np.arange(kmax + 1)
    return e @ signs


def _support_count(m: int, kmax: int) -> int:
    return sum(math.comb(m, k) for k in range(min(m, kmax) + 1))


def mollifier(form: Form, s, sched: ParameterSchedule, variant: str = "M") -> PolyValue:
    """sum mu(n) a(n) lambda(n) n^-s, via elementary symmetric polynomials.

    mu restricts the support to squarefree n, on which lambda is a product over
    the prime factors, so the variant M1 equals sum_{k <= K1} (-1)^k e_k(lambda(p) p^-s)
    over p <= Y (similarly M2 over Y < p <= X) and M = M1 M2.
    """
    if variant == "M":
        a = mollifier(form, s, sched, "M1")
        b = mollifier(form, s, sched, "M2")
        return PolyValue(s, a.value * b.value, a.term_count * b.term_count)
    primes, kmax = mollifier_primes(sched, variant)
    if primes.size and primes[-1] > form.table.limit:
        raise TableTooShort(int(primes[-1]), form.table.limit)
    s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
    if primes.size == 0:
        val = np.ones(s_arr.shape, dtype=complex)
        return PolyValue(s, val if np.ndim(s) else complex(val[0]), 1)
    lam = form.table.values[primes]
    x = lam * np.exp(-np.multiply.outer(s_arr, np.log(primes.astype(float))))
    val = _elementary_alternating(x, kmax)
    count = _support_count(int(np.count_nonzero(lam)), kmax)
    return PolyValue(s, val if np.ndim(s) else complex(val[0]), count)


def mollifier_support(sched: ParameterSchedule, variant: str = "M", cap: int = ENUMERATION_CAP) -> list[int]:
    """Squarefree n with a_variant(n) = 1, by depth-first products over admissible primes."""
    if variant == "M":
        groups = [mollifier_primes(sched, "M1"), mollifier_primes(sched, "M2")]
    else:
        groups = [mollifier_primes(sched, variant)]
    total = 1
    for primes, kmax in groups:
        total *= _support_count(len(primes), kmax)
    arith.check_cap(total, cap, "mollifier support")
    out = [1]
    for primes, kmax in groups:
        part = []

        def walk(start, n, depth, primes=primes, kmax=kmax, part=part):
            part.append(n)
            if depth == kmax:
                return
            for i in range(start, len(primes)):
                walk(i + 1, n * int(primes[i]), depth + 1)

        walk(0, 1, 0)
        out = [a * b for a in out for b in part]
    return sorted(out)


def mollifier_bruteforce(form: Form, s, sched: ParameterSchedule, variant: str = "M",
                         cap: int = ENUMERATION_CAP) -> PolyValue:
    """Term-by-term sum over the enumerated support (oracle for small supports)."""
    support = mollifier_support(sched, variant, cap)
    if support[-1] > form.table.limit:
        raise TableTooShort(support[-1], form.table.limit)
    n = np.array(support, dtype=np.int64)
    mu = np.array([arith.mobius(int(k)) for k in support], dtype=float)
    c = mu * form.table.values[n]
    keep = c != 0
    val = _eval_terms(n[keep], c[keep], s)
    return PolyValue(s, val if np.ndim(s) else complex(val[0]), int(keep.sum()))


def script_m(form: Form, s, sched: ParameterSchedule, variant: int = 1, P: np.ndarray | None = None) -> PolyValue:
    """Truncated exponential sum_{k <= K_v} (-P_v)^k / k! of the low (v=1) or high (v=2) series."""
    if variant not in (1, 2):
        raise InvalidArgument("script_m variant must be 1 or 2")
    if P is None:
        pv = p_series(form, s, sched, "low" if variant == 1 else "high")
        P = pv.value
    K = sched.k1 if variant == 1 else sched.k2
    P = np.asarray(P, dtype=complex)
    term = np.ones_like(P)
    acc = np.ones_like(P)
    for k in range(1, K + 1):
        term = term * (-P) / k
        acc = acc + term
    return PolyValue(s, acc if np.ndim(acc) else complex(acc), K + 1)


def truncated_exp_check(K: float, z: complex, tol: float = 1e-12) -> tuple[mpmath.mpf, mpmath.mpf]:
    """|e^z - sum_{j <= 100K} z^j/j!| against e^{-99K}(1 + tol), both as mpmath reals.

    Precision is set so that the cancellation down to e^{-99K} is resolved.
    """
    if K < 1:
        raise InvalidArgument("truncated_exp_check needs K >= 1")
    if abs(z) > K:
        raise InvalidArgument(f"|z| = {abs(z):.6g} exceeds K = {K}")
    jmax = int(math.floor(100 * K))
    dps = int((99 * K + abs(z)) / math.log(10)) + 40
    with mpmath.workdps(dps):
        zz = mpmath.mpc(z)
        term = mpmath.mpc(1)
        acc = mpmath.mpc(1)
        for j in range(1, jmax + 1):
            term = term * zz / j
            acc += term
        err = abs(mpmath.exp(zz) - acc)
        bound = mpmath.exp(-99 * mpmath.mpf(K)) * (1 + mpmath.mpf(tol))
        return +err, +bound


def tail_majorant(K: float, r: float) -> mpmath.mpf:
    """sum_{j > 100K} r^j / j!, an upper bound for the truncation error at |z| = r."""
    jmax = int(math.floor(100 * K))
    dps = int(99 * K / math.log(10)) + 40
    with mpmath.workdps(dps):
        r = mpmath.mpf(r)
        term = r ** (jmax + 1) / mpmath.factorial(jmax + 1)
        acc = mpmath.mpf(0)
        j = jmax + 1
        while term > acc * mpmath.mpf(10) ** (-dps + 5):
            acc += term
            j += 1
            term = term * r / j
        return +acc
