"""Sampling over t in [T, 2T] and empirical distribution reports."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from . import dirpoly, lfunc
from .errors import InvalidArgument
from .forms import Form, prime_coefficients_differ

STATISTICS = ("log_abs_L", "re_P0", "re_P_full", "log_LM")
TAIL_LEVELS = (-2, -1, 0, 1, 2)


@dataclass(frozen=True)
class SamplePlan:
    T: float
    count: int
    seed: int = 0
    mode: str = "uniform_random"
    sigma: float = 0.5

    def __post_init__(self):
        problems = []
        if not isinstance(self.count, (int, np.integer)) or self.count < 2:
            problems.append("count must be an integer >= 2")
        if not self.T >= 100:
            problems.append("T must be >= 100")
        if not 0.5 <= self.sigma <= 1:
            problems.append("sigma must lie in [1/2, 1]")
        if self.mode not in ("uniform_random", "equispaced"):
            problems.append("mode must be uniform_random or equispaced")
        if not 0 <= int(self.seed) < 2**64:
            problems.append("seed must be an unsigned 64-bit integer")
        if problems:
            raise InvalidArgument("; ".join(problems))


@dataclass(frozen=True)
class SampleSeries:
    plan: SamplePlan
    t_values: np.ndarray
    values: np.ndarray
    excluded: dict = field(default_factory=dict)

    def kept(self) -> np.ndarray:
        mask = np.ones(len(self.values), dtype=bool)
        mask[list(self.excluded)] = False
        return self.values[mask]


@dataclass(frozen=True)
class EmpiricalReport:
    count: int
    mean: float
    variance: float
    moments: dict
    ks_statistic: float
    tail_frequencies: dict
    gaussian_tails: dict
    predicted_variance: float
    exceptional_fraction: float
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CovarianceReport:
    forms: list
    covariance_matrix: list
    correlation_matrix: list
    predicted: list
    max_offdiag_correlation: float
    variance_additivity: dict
    verdict: bool
    thresholds: dict
    excluded_count: int = 0


# ---------------------------------------------------------------------------
# sampling

def _uniform(seed: int, i: int) -> float:
    # one Philox block per index: draws depend only on (seed, i)
    bg = np.random.Philox(key=int(seed), counter=[int(i), 0, 0, 0])
    return float(np.random.Generator(bg).random())


def draw_samples(plan: SamplePlan) -> np.ndarray:
    if plan.mode == "equispaced":
        return plan.T * (1 + np.arange(plan.count) / plan.count)
    u = np.array([_uniform(plan.seed, i) for i in range(plan.count)])
    return plan.T * (1 + u)


# worker state for process pools
_WORKER: dict = {}


def _init_worker(form, cfg):
    _WORKER["form"] = form
    _WORKER["cfg"] = cfg


def _eval_chunk(points):
    form, cfg = _WORKER["form"], _WORKER["cfg"]
    return [_eval_one(form, s, cfg) for s in points]


def _eval_one(form: Form, s: complex, cfg) -> complex:
    return lfunc.afe_eval(form, s, cfg).L


def evaluate_many(form: Form, s: np.ndarray, cfg=None, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """L(f, s_i) for every point, plus a near-zero flag per point.

    Values are a pure function of each point, so the worker count does not
    change them; chunks are reassembled in index order.
    """
    cfg = cfg or lfunc.EvalConfig()
    s = np.asarray(s, dtype=complex)
    if workers <= 1 or s.size < 2:
        L = np.array([_eval_one(form, z, cfg) for z in s], dtype=complex)
    else:
        chunks = np.array_split(s, min(len(s), workers * 4))
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(form, cfg)) as ex:
            parts = list(ex.map(_eval_chunk, chunks))
        L = np.array([v for part in parts for v in part], dtype=complex)
    flagged = np.abs(L) < lfunc.NEAR_ZERO_FLOOR
    return L, flagged


def sample_statistic(form: Form, plan: SamplePlan, statistic: str, sched: dirpoly.ParameterSchedule | None = None,
                     cfg=None, workers: int = 1, t_values: np.ndarray | None = None) -> SampleSeries:
    if statistic not in STATISTICS:
        raise InvalidArgument(f"statistic must be one of {STATISTICS}")
    t = draw_samples(plan) if t_values is None else np.asarray(t_values, dtype=float)
    excluded = {}
    if statistic in ("re_P0", "re_P_full"):
        if sched is None:
            raise InvalidArgument(f"{statistic} needs a schedule")
        variant = "primes_only" if statistic == "re_P0" else "full"
        vals = dirpoly.p_series(form, sched.sigma0 + 1j * t, sched, variant).value.real
        return SampleSeries(plan, t, np.asarray(vals, dtype=float), excluded)
    sigma = plan.sigma if statistic == "log_abs_L" else sched.sigma0 if sched else plan.sigma
    s = sigma + 1j * t
    L, flagged = evaluate_many(form, s, cfg, workers)
    if statistic == "log_LM":
        if sched is None:
            raise InvalidArgument("log_LM needs a schedule")
        L = L * dirpoly.mollifier(form, s, sched, "M").value
        flagged = np.abs(L) < lfunc.NEAR_ZERO_FLOOR
    vals = np.log(np.maximum(np.abs(L), lfunc.NEAR_ZERO_FLOOR))
    for i in np.flatnonzero(flagged):
        excluded[int(i)] = "near-zero"
    return SampleSeries(plan, t, vals, excluded)


# ---------------------------------------------------------------------------
# reports

def ks_normal(x: np.ndarray) -> float:
    """Sup distance between the empirical CDF of standardized x and the normal CDF."""
    sd = np.std(x)
    if sd == 0:
        return 0.5
    z = (x - np.mean(x)) / sd
    return float(sps.kstest(z, "norm").statistic)


def empirical_report(series: SampleSeries | np.ndarray, predicted_variance: float, min_count: int = 100,
                     extra: dict | None = None) -> EmpiricalReport:
    if isinstance(series, SampleSeries):
        x = series.kept()
        total = len(series.values)
        n_exc = len(series.excluded)
    else:
        x = np.asarray(series, dtype=float)
        total, n_exc = len(x), 0
    if x.size < min_count:
        raise InvalidArgument(f"need at least {min_count} non-excluded samples, have {x.size}")
    mean = float(np.mean(x))
    var = float(np.var(x))
    sd = math.sqrt(var)
    z = (x - mean) / sd if sd > 0 else np.zeros_like(x)
    moments = {str(k): float(np.mean(z**k)) for k in range(3, 7)}
    tails = {str(v): float(np.mean(z >= v)) for v in TAIL_LEVELS}
    gauss = {str(v): float(sps.norm.sf(v)) for v in TAIL_LEVELS}
    return EmpiricalReport(x.size, mean, var, moments, ks_normal(x), tails, gauss, float(predicted_variance),
                           n_exc / total if total else 0.0, dict(extra or {}))


def diagonal_sum(weights: np.ndarray, primes: np.ndarray, sigma0: float) -> float:
    return float(np.sum(np.abs(weights) ** 2 * primes.astype(float) ** (-2 * sigma0)))


def _finite_size(form_weights, primes, sigma0):
    return diagonal_sum(form_weights, primes, sigma0) / 2


def _prime_data(X: float):
    from .arith import sieve_primes

    return sieve_primes(max(2, int(X))).primes_upto(X)


def clt_experiment(form: Form, plan: SamplePlan, sched: dirpoly.ParameterSchedule | None = None, cfg=None,
                   workers: int = 1) -> tuple[EmpiricalReport, SampleSeries]:
    """log|L(f, sigma+it)| over the plan; predicted variance (1/2) loglog T plus the finite-size S/2."""
    series = sample_statistic(form, plan, "log_abs_L", sched, cfg, workers)
    extra = {"asymptotic_variance": 0.5 * math.log(math.log(plan.T))}
    if sched is not None and sched.X >= 2:
        p = _prime_data(sched.X)
        extra["finite_size_variance"] = _finite_size(form.table.values[p], p, sched.sigma0)
    return empirical_report(series, extra["asymptotic_variance"], extra=extra), series


def joint_samples(forms: list[Form], plan: SamplePlan, cfg=None, workers: int = 1,
                  check_distinct: bool = True) -> tuple[np.ndarray, np.ndarray, set]:
    if len(forms) < 2:
        raise InvalidArgument("joint experiments need at least two forms")
    if check_distinct:
        for i in range(len(forms)):
            for j in range(i + 1, len(forms)):
                if not prime_coefficients_differ(forms[i].table, forms[j].table):
                    raise InvalidArgument(f"forms {forms[i].id} and {forms[j].id} have identical prime coefficients")
    t = draw_samples(plan)
    cols = []
    excluded = set()
    for f in forms:
        ser = sample_statistic(f, plan, "log_abs_L", None, cfg, workers, t_values=t)
        cols.append(ser.values)
        excluded |= set(ser.excluded)
    return t, np.column_stack(cols), excluded


def covariance_report(ids: list[str], data: np.ndarray, excluded: set, T: float,
                      corr_threshold: float = 0.15, additivity_threshold: float = 0.3) -> CovarianceReport:
    mask = np.ones(len(data), dtype=bool)
    mask[list(excluded)] = False
    x = data[mask]
    cov = np.cov(x, rowvar=False, ddof=1)
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd)
    n = len(ids)
    off = [abs(corr[i, j]) for i in range(n) for j in range(i + 1, n)]
    v1, v2 = cov[0, 0], cov[1, 1]
    v12 = float(np.var(x[:, 0] + x[:, 1], ddof=1))
    gap = abs(v12 - v1 - v2)
    add = {"var_1": float(v1), "var_2": float(v2), "var_sum": v12, "abs_gap": gap,
           "relative_gap": gap / (v1 + v2)}
    verdict = max(off) <= corr_threshold and gap <= additivity_threshold * (v1 + v2)
    pred = (0.5 * math.log(math.log(T)) * np.eye(n)).tolist()
    return CovarianceReport(ids, cov.tolist(), corr.tolist(), pred, float(max(off)), add, bool(verdict),
                            {"correlation": corr_threshold, "additivity": additivity_threshold}, len(excluded))


def joint_experiment(forms: list[Form], plan: SamplePlan, sched=None, cfg=None, workers: int = 1,
                     corr_threshold: float = 0.15, additivity_threshold: float = 0.3,
                     check_distinct: bool = True) -> tuple[CovarianceReport, np.ndarray, np.ndarray]:
    t, data, excluded = joint_samples(forms, plan, cfg, workers, check_distinct)
    rep = covariance_report([f.id for f in forms], data, excluded, plan.T, corr_threshold, additivity_threshold)
    return rep, t, data


def linear_combination_experiment(form1: Form, form2: Form, a1: float, a2: float, plan: SamplePlan,
                                  sched=None, cfg=None, workers: int = 1) -> tuple[EmpiricalReport, SampleSeries]:
    """a1 log|L1| + a2 log|L2| at shared t."""
    if a1 == 0 and a2 == 0:
        raise InvalidArgument("(a1, a2) must not be (0, 0)")
    t = draw_samples(plan)
    s1 = sample_statistic(form1, plan, "log_abs_L", None, cfg, workers, t_values=t)
    s2 = sample_statistic(form2, plan, "log_abs_L", None, cfg, workers, t_values=t)
    excluded = {**s1.excluded, **s2.excluded}
    series = SampleSeries(plan, t, a1 * s1.values + a2 * s2.values, excluded)
    LL = math.log(math.log(plan.T))
    extra = {"asymptotic_variance": (a1 * a1 + a2 * a2) / 2 * LL}
    if sched is not None and sched.X >= 2:
        p = _prime_data(sched.X)
        psi = a1 * form1.table.values[p] + a2 * form2.table.values[p]
        extra["finite_size_variance"] = _finite_size(psi, p, sched.sigma0)
    return empirical_report(series, extra["asymptotic_variance"], extra=extra), series
