"""Moment computations and consistency checks for the prime series, mollifiers and L-values."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import arith, dirpoly, lfunc
from .errors import InvalidArgument, PrecisionError
from .forms import Form

PAIR_CAP = 5 * 10**7


@dataclass(frozen=True)
class MomentResult:
    k: int
    l: int
    value: complex
    method: str
    prediction: complex
    T: float
    X: float
    sigma0: float
    detail: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class ConsistencyReport:
    name: str
    sample_count: int
    excluded_count: int
    quantiles: dict
    verdict: bool
    metrics: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict, repr=False, compare=False)


QUANTILE_LEVELS = (0.1, 0.25, 0.5, 0.75, 0.9, 0.99)


def _quantiles(x: np.ndarray) -> dict:
    if x.size == 0:
        return {str(q): float("nan") for q in QUANTILE_LEVELS}
    return {str(q): float(v) for q, v in zip(QUANTILE_LEVELS, np.quantile(x, QUANTILE_LEVELS))}


# ---------------------------------------------------------------------------
# exact expansion

def inner_t_integral(m, n, T: float):
    """int_T^{2T} (m/n)^{it} dt, exactly (vectorized over m, n)."""
    m = np.asarray(m)
    n = np.asarray(n)
    r = np.log(m.astype(float)) - np.log(n.astype(float))
    diag = m == n
    safe = np.where(diag, 1.0, r)
    off = (np.exp(2j * T * safe) - np.exp(1j * T * safe)) / (1j * safe)
    out = np.where(diag, complex(T), off)
    return out if out.ndim else complex(out)


def _prime_weights(form: Form, X: float, psi: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    if X < 2:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    primes = arith.sieve_primes(max(2, int(X))).primes_upto(X)
    if psi is None:
        if primes.size and primes[-1] > form.table.limit:
            raise InvalidArgument("coefficient table shorter than X")
        psi = form.table.values[primes]
    return primes, np.asarray(psi)


def _power_expansion(primes: np.ndarray, w: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """(n, A(n)) with (sum_p w_p p^-s)^k = sum_n A(n) n^-s; A(n) = k!/prod(e!) prod w_p^e."""
    if k == 0:
        return np.array([1], dtype=np.int64), np.array([1.0 + 0j])
    ns, cs = [], []
    fk = math.factorial(k)
    for combo in itertools.combinations_with_replacement(range(len(primes)), k):
        n = 1
        c = complex(fk)
        for idx, grp in itertools.groupby(combo):
            e = len(list(grp))
            n *= int(primes[idx]) ** e
            c *= w[idx] ** e / math.factorial(e)
        ns.append(n)
        cs.append(c)
    return np.array(ns, dtype=np.int64), np.array(cs)


def _diagonal_sum(w: np.ndarray, primes: np.ndarray, sigma0: float) -> float:
    return float(np.sum(np.abs(w) ** 2 * primes.astype(float) ** (-2 * sigma0)))


def _expansion_moment(primes, w, k, l, T, sigma0) -> complex:
    n1, a1 = _power_expansion(primes, w, k)
    n2, a2 = _power_expansion(primes, w, l)
    arith.check_cap(n1.size * n2.size, PAIR_CAP, "moment expansion pairs")
    a1 = a1 * n1.astype(float) ** (-sigma0)
    a2 = np.conj(a2) * n2.astype(float) ** (-sigma0)
    total = 0j
    block = max(1, 2_000_000 // max(1, n2.size))
    for i in range(0, n1.size, block):
        # P^k carries n^{-it}, conj(P)^l carries m^{+it}
        inner = inner_t_integral(n2[None, :], n1[i : i + block, None], T)
        total += np.sum(a1[i : i + block, None] * a2[None, :] * inner)
    return complex(total)


def _check_kl(k: int, l: int) -> None:
    if not (0 <= k <= 4 and 0 <= l <= 4):
        raise InvalidArgument("k, l must lie in 0..4")


def bruteforce_mixed_moment(form: Form, k: int, l: int, T: float, X: float, sigma0: float,
                            psi: np.ndarray | None = None) -> MomentResult:
    """int_T^{2T} P0^k conj(P0)^l dt by exact expansion over prime products.

    The coefficient of n = prod p^e in P0^k is k!/prod(e!) prod lambda(p)^e.
    """
    _check_kl(k, l)
    primes, w = _prime_weights(form, X, psi)
    value = _expansion_moment(primes, w, k, l, T, sigma0)
    S = _diagonal_sum(w, primes, sigma0)
    pred = math.factorial(k) * T * S**k if k == l else 0.0
    return MomentResult(k, l, value, "analytic_expansion", complex(pred), T, X, sigma0, {"S": S})


def required_points(primes: np.ndarray, k: int, l: int, T: float, order: int = 32) -> int:
    """Gauss-Legendre nodes needed to resolve the largest frequency in P0^k conj(P0)^l over [T, 2T]."""
    if primes.size == 0:
        return order
    # |log(m/n)| <= max(k, l) log p_max for n, m products of k and l primes
    omega = max(k, l) * math.log(float(primes[-1]))
    panels = int(math.ceil(omega * T / (order * 0.5))) + 1
    return panels * order


def quadrature_mixed_moment(form: Form, k: int, l: int, T: float, X: float, sigma0: float,
                            points: int = 10**5, psi: np.ndarray | None = None, order: int = 32) -> MomentResult:
    """Composite Gauss-Legendre quadrature of P0^k conj(P0)^l over [T, 2T].

    ``points`` is a floor: the panel count is raised until each panel spans at
    most order/2 radians of the fastest oscillation, otherwise the rule aliases.
    """
    _check_kl(k, l)
    if points < 1000:
        raise InvalidArgument("points must be >= 1000")
    primes, w = _prime_weights(form, X, psi)
    need = max(points, required_points(primes, k, l, T, order))
    panels = int(math.ceil(need / order))
    x, wt = np.polynomial.legendre.leggauss(order)
    h = T / panels
    logp = np.log(primes.astype(float))
    coef = w * primes.astype(float) ** (-sigma0)
    partial = []
    block = max(1, 200_000 // order)
    for b0 in range(0, panels, block):
        idx = np.arange(b0, min(panels, b0 + block))
        t = (T + h * (idx[:, None] + 0.5 + 0.5 * x[None, :])).ravel()
        if primes.size:
            P = np.exp(-1j * np.outer(t, logp)) @ coef
        else:
            P = np.zeros(t.size, dtype=complex)
        f = P**k * np.conj(P) ** l
        partial.append(np.sum(f.reshape(-1, order) @ wt) * (h / 2))
    value = complex(np.sum(partial))
    S = _diagonal_sum(w, primes, sigma0)
    pred = math.factorial(k) * T * S**k if k == l else 0.0
    return MomentResult(k, l, value, "quadrature", complex(pred), T, X, sigma0,
                        {"S": S, "points": panels * order})


def gaussian_moment_prediction(k: int, variance: float) -> float:
    """2^-k C(k, k/2) (k/2)! (2 variance)^{k/2} = (k-1)!! variance^{k/2}."""
    if k % 2 or k < 0:
        raise InvalidArgument("gaussian_moment_prediction needs an even k >= 0")
    if k > 12:
        raise InvalidArgument("k must be <= 12")
    h = k // 2
    return math.comb(k, h) * math.factorial(h) * (2 * variance) ** h / 2**k


def joint_weights(form1: Form, form2: Form, a1: float, a2: float, X: float) -> np.ndarray:
    primes, w1 = _prime_weights(form1, X)
    _, w2 = _prime_weights(form2, X)
    return a1 * w1 + a2 * w2


def joint_bruteforce_moment(form1: Form, form2: Form, a1: float, a2: float, k: int, l: int,
                            T: float, X: float, sigma0: float) -> MomentResult:
    """Mixed moment of sum_p psi(p) p^-s with psi = a1 lambda_1 + a2 lambda_2."""
    psi = joint_weights(form1, form2, a1, a2, X)
    return bruteforce_mixed_moment(form1, k, l, T, X, sigma0, psi=psi)


def real_part_moment(form: Form, k: int, T: float, X: float, sigma0: float,
                     psi: np.ndarray | None = None) -> dict:
    """(1/T) int (Re P0)^k via (Re P)^k = 2^-k sum_j C(k,j) P^j conj(P)^{k-j}, normalized by (S/2)^{k/2}."""
    if not 1 <= k <= 4:
        raise InvalidArgument("k must lie in 1..4")
    primes, w = _prime_weights(form, X, psi)
    total = 0j
    for j in range(k + 1):
        total += math.comb(k, j) * _expansion_moment(primes, w, j, k - j, T, sigma0)
    raw = (total / 2**k).real / T
    S = _diagonal_sum(w, primes, sigma0)
    scale = (S / 2) ** (k / 2)
    gauss = gaussian_moment_prediction(k, 1.0) if k % 2 == 0 else 0.0
    return {"k": k, "raw": raw, "normalized": raw / scale if scale else float("nan"), "gaussian": gauss, "S": S}


# ---------------------------------------------------------------------------
# mollifier and L-value checks over sampled t

@dataclass(frozen=True)
class Thresholds:
    prop3_median: float = 0.2
    mollifier_ratio: float = 1e-3
    prop4_mean_square: float = 0.25
    prop4_mean: float = 0.15


def _sample_points(plan, sched) -> np.ndarray:
    from .stats import draw_samples

    return sched.sigma0 + 1j * draw_samples(plan)


def prop3_residual_stats(form: Form, sched: dirpoly.ParameterSchedule, plan,
                         thresholds: Thresholds = Thresholds()) -> ConsistencyReport:
    """Residual |M exp(P) - 1| at sigma0 + it over the plan's sample of t."""
    s = _sample_points(plan, sched)
    M = dirpoly.mollifier(form, s, sched, "M").value
    P = dirpoly.p_series(form, s, sched, "full").value
    P1 = dirpoly.p_series(form, s, sched, "low").value
    P2 = dirpoly.p_series(form, s, sched, "high").value
    r = np.abs(M * np.exp(P) - 1)
    LL = math.log(math.log(sched.T))
    LLL = math.log(LL)
    exc1 = float(np.mean(np.abs(P1) > LL))
    exc2 = float(np.mean(np.abs(P2) > LLL))
    med = float(np.median(r))
    return ConsistencyReport(
        "prop3_residual", s.size, 0, _quantiles(r), med <= thresholds.prop3_median,
        {"median_residual": med, "P1_bound_exceptional_fraction": exc1, "P2_bound_exceptional_fraction": exc2,
         "loglogT": LL, "logloglogT": LLL},
        {"median": thresholds.prop3_median},
        {"t": s.imag, "value": r, "excluded": np.zeros(s.size, dtype=bool)},
    )


def mollifier_consistency(form: Form, sched: dirpoly.ParameterSchedule, plan,
                          thresholds: Thresholds = Thresholds()) -> ConsistencyReport:
    """Mean squares of (script M_v - M_v) relative to mean |M1|^2, and |script M_v exp(P_v) - 1|."""
    s = _sample_points(plan, sched)
    out = {}
    eq5 = []
    diffs = []
    for v, name in ((1, "M1"), (2, "M2")):
        P = dirpoly.p_series(form, s, sched, "low" if v == 1 else "high").value
        sm = dirpoly.script_m(form, s, sched, v, P=P).value
        M = dirpoly.mollifier(form, s, sched, name).value
        diffs.append(sm - M)
        out[f"mean_sq_diff_{v}"] = float(np.mean(np.abs(sm - M) ** 2))
        out[f"mean_sq_{name}"] = float(np.mean(np.abs(M) ** 2))
        eq5.append(np.abs(sm * np.exp(P) - 1))
    ref = out["mean_sq_M1"]
    out["ratio_1"] = out["mean_sq_diff_1"] / ref
    out["ratio_2"] = out["mean_sq_diff_2"] / ref
    verdict = out["ratio_1"] <= thresholds.mollifier_ratio and out["ratio_2"] <= thresholds.mollifier_ratio
    q = {"eq5_factor1": _quantiles(eq5[0]), "eq5_factor2": _quantiles(eq5[1])}
    return ConsistencyReport("mollifier_consistency", s.size, 0, q, verdict, out,
                             {"ratio": thresholds.mollifier_ratio},
                             {"t": s.imag, "value": np.abs(diffs[0]) ** 2, "excluded": np.zeros(s.size, dtype=bool)})


def _afe_batch(form: Form, s: np.ndarray, cfg, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    from .stats import evaluate_many

    return evaluate_many(form, s, cfg, workers)


def prop4_mean_square(form: Form, sched: dirpoly.ParameterSchedule, plan, cfg=None,
                      thresholds: Thresholds = Thresholds(), workers: int = 1) -> ConsistencyReport:
    """Sample mean of |1 - L M|^2 and of L M at sigma0 + it."""
    s = _sample_points(plan, sched)
    L, flagged = _afe_batch(form, s, cfg, workers)
    M = dirpoly.mollifier(form, s, sched, "M").value
    keep = ~flagged
    d_all = np.abs(1 - L * M) ** 2
    LM = (L * M)[keep]
    d = d_all[keep]
    ms = float(np.mean(d))
    mean = complex(np.mean(LM))
    se = float(np.std(d, ddof=1) / math.sqrt(d.size)) if d.size > 1 else float("nan")
    verdict = ms <= thresholds.prop4_mean_square and abs(mean - 1) <= thresholds.prop4_mean
    return ConsistencyReport(
        "prop4_mean_square", s.size, int(flagged.sum()), _quantiles(d), verdict,
        {"mean_square": ms, "mean_square_stderr": se, "mean_LM_re": mean.real, "mean_LM_im": mean.imag,
         "abs_mean_minus_1": abs(mean - 1)},
        {"mean_square": thresholds.prop4_mean_square, "abs_mean_minus_1": thresholds.prop4_mean},
        {"t": s.imag, "value": d_all, "excluded": flagged},
    )


def _critical_z(form: Form, y: float, cfg) -> float:
    """L(1/2+iy) rotated by the gamma-factor phase; real for self-dual forms, sign changes at zeros."""
    v = lfunc.afe_eval(form, complex(0.5, y), cfg)
    return float((v.L * np.exp(1j * v.log_G.imag)).real)


def _sign_change_roots(f, grid: np.ndarray, vals: np.ndarray) -> list[float]:
    out = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0:
            out.append(float(a))
        elif fa * fb < 0:
            out.append(float(optimize.brentq(f, a, b, xtol=1e-10)))
    return out


def prop1_window_check(form: Form, sigma: float, t: float, cfg=None, epsabs: float = 1e-5,
                       limit: int = 200, grid: int = 65) -> tuple[float, float]:
    """(int_{t-1}^{t+1} |log|L(1/2+iy)| - log|L(sigma+iy)|| dy, (sigma - 1/2) log t).

    Zeros on the critical line (sign changes of the phase-rotated value, self-dual
    forms) and sign changes of the difference are located by bisection on a grid
    and passed to QUADPACK as breakpoints, so the logarithmic spikes and kinks sit
    at panel ends. An unmet tolerance raises PrecisionError with the subdivision count.
    """
    if t < 100:
        raise InvalidArgument("prop1_window_check needs t >= 100")
    if not 0.5 <= sigma <= 0.5 + 5 / math.log(t):
        raise InvalidArgument("sigma must lie in [1/2, 1/2 + 5/log t]")
    rhs = (sigma - 0.5) * math.log(t)
    if sigma == 0.5:
        return 0.0, rhs
    cfg = cfg or lfunc.EvalConfig()

    def diff(y):
        a = lfunc.log_abs_L(form, 0.5, y, cfg)
        b = lfunc.log_abs_L(form, sigma, y, cfg)
        return a - b

    ys = np.linspace(t - 1, t + 1, grid)
    breaks = []
    if form.descriptor.self_dual:
        z = lambda y: _critical_z(form, y, cfg)
        breaks += _sign_change_roots(z, ys, np.array([z(y) for y in ys]))
    d = np.array([diff(y) for y in ys])
    ok = np.isfinite(d)
    breaks += _sign_change_roots(diff, ys[ok], d[ok])
    breaks = sorted(b for b in set(breaks) if t - 1 < b < t + 1)
    val, err, info = integrate.quad(lambda y: abs(diff(y)), t - 1, t + 1, points=breaks or None,
                                    epsabs=epsabs, epsrel=1e-8, limit=limit, full_output=1)[:3]
    if err > max(epsabs, 1e-8 * abs(val)) * 10:
        raise PrecisionError(
            f"window integral not converged: error {err:.2e} after {info['last']} subintervals (cap {limit})"
        )
    return float(val), rhs


def lemma4_identity_check(form: Form, s: complex, cfg=None, tol: float = 1e-4) -> tuple[float, float]:
    """(|L(s)|^2 from the AFE, the e^{z^2}-damped contour-integral value)."""
    s = complex(s)
    if abs(s.real - 0.5) > 1e-12:
        raise InvalidArgument("lemma4_identity_check needs s on the critical line")
    if not 10 <= abs(s.imag) <= 1e3:
        raise InvalidArgument("|Im s| must lie in [10, 1000]")
    cfg = cfg or lfunc.EvalConfig()
    lhs = abs(lfunc.afe_eval(form, s, cfg).L) ** 2
    rhs, err, _ = lfunc.damped_integral_abs_sq(form, s, cfg, tol=tol)
    if err > 1e-4 * max(abs(rhs), 1e-300) + 1e-12:
        raise PrecisionError(f"contour quadrature error estimate {err:.2e} too large")
    return lhs, rhs
