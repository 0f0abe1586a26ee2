"""Gamma factors, the smoothing function V and L(f, s) via the approximate functional equation.

Conventions
-----------
G(f, s) = prod_j pi^(-s/2) Gamma((s + mu_j)/2) with mu_j the stored shifts, and
Lambda(f, s) = G(f, s) L(f, s) = Lambda(f~, 1 - s) (root number 1 for every
built-in form).

The smoothing function carries an entire weight g(u) with g(0) = 1::

    V_s(y) = 1/(2 pi i) int_(c) y^-u g_s(u) G(s+u)/G(s) du/u,
    g_s(u) = exp(kappa u^2 - i alpha_s u),  alpha_s = sum_j arg(s + mu_j)/2.

The linear term cancels the exponential tilt of the gamma ratio along the
contour, so the integrand is bounded by exp(kappa (c^2 - v^2)) and the
trapezoidal rule converges geometrically.  Moving the contour across u = 0
picks up the residue 1.  Any such weight yields an exact identity

    L(s) = sum lambda(n) n^-s V_s(n/B) + G(f~,1-s)/G(f,s) sum conj(lambda(n)) n^(s-1) V~_(1-s)(nB),

provided the second sum uses g_s(-w) (tilt -alpha_s).  V_s(y) is close to 1
for y < sqrt(q(s)) and decays like erfc(log(y/sqrt q)/(2 sqrt kappa))
beyond, so B = 1 balances both sums at length ~ sqrt(analytic conductor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy import special

from .errors import DomainError, InvalidArgument, PrecisionError, TableTooShort
from .forms import Form, FormDescriptor

LOG_PI = math.log(math.pi)
NEAR_ZERO_FLOOR = 1e-300


@dataclass(frozen=True)
class EvalConfig:
    series_cutoff_multiplier: float = 1.0
    quadrature_step: float = 0.1
    quadrature_height: float = 120.0
    target_rel_error: float = 1e-10
    kappa: float = 1.0 / 64
    cheb_degree: int = 24
    cheb_piece_width: float = 0.8
    balance: float = 1.0
    damped_abscissa: float = 2.5
    damped_terms: int = 30000

    def __post_init__(self):
        if self.series_cutoff_multiplier < 1:
            raise InvalidArgument("series_cutoff_multiplier must be >= 1")
        if self.quadrature_step <= 0 or self.quadrature_height < 10 * self.quadrature_step:
            raise InvalidArgument("need quadrature_step > 0 and quadrature_height >= 10*quadrature_step")
        if not 1e-14 < self.target_rel_error < 1e-2:
            raise InvalidArgument("target_rel_error must lie in (1e-14, 1e-2)")
        if self.kappa <= 0:
            raise InvalidArgument("kappa must be positive")

    def refined(self) -> "EvalConfig":
        return replace(self, quadrature_step=self.quadrature_step / 2, cheb_degree=self.cheb_degree + 8,
                       series_cutoff_multiplier=self.series_cutoff_multiplier * 1.5)


@dataclass(frozen=True)
class CompletedValue:
    s: complex
    log_G: complex
    L: complex
    Lambda: complex
    terms: tuple[int, int] = (0, 0)

    @property
    def log_abs_Lambda(self) -> float:
        return self.log_G.real + math.log(max(abs(self.L), NEAR_ZERO_FLOOR))


# ---------------------------------------------------------------------------
# gamma functions

def log_gamma_complex(z):
    """Principal branch of log Gamma (scipy's loggamma), vectorized."""
    z = np.asarray(z, dtype=complex)
    bad = (z.imag == 0) & (z.real <= 0) & (np.round(z.real) == z.real)
    if np.any(bad):
        raise DomainError(f"log Gamma has a pole at {z[bad].ravel()[0]}")
    out = special.loggamma(z)
    return out if out.ndim else complex(out)


def _descriptor(form) -> FormDescriptor:
    return form.descriptor if isinstance(form, Form) else form


def gamma_factor(form, s):
    """log G(f, s) = sum_j [-(s/2) log pi + log Gamma((s + mu_j)/2)]."""
    desc = _descriptor(form)
    s = np.asarray(s, dtype=complex)
    out = np.zeros_like(s)
    for mu in desc.arch_params:
        z = (s + mu) / 2
        bad = (np.abs(z.imag) == 0) & (z.real <= 0) & (np.round(z.real) == z.real)
        if np.any(bad):
            raise DomainError(f"gamma factor pole: shift {mu} at s = {s[bad].ravel()[0]}")
        out = out - s / 2 * LOG_PI + special.loggamma(z)
    return out if out.ndim else complex(out)


_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6)


def _log1p_complex(x: np.ndarray) -> np.ndarray:
    # numpy's complex log1p loses relative accuracy for small |x|
    re, im = x.real, x.imag
    return 0.5 * np.log1p(2 * re + re * re + im * im) + 1j * np.arctan2(im, 1 + re)


def log_gamma_ratio(z, w):
    """log Gamma(z + w) - log Gamma(z) without cancellation for large |z|.

    Uses the Stirling series written in terms of log1p(w/z) when
    |z| >= 60 and |w| <= |z|/2, and scipy's loggamma otherwise.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    z, w = np.broadcast_arrays(z, w)
    out = np.empty(z.shape, dtype=complex)
    far = (np.abs(z) >= 60) & (np.abs(w) <= np.abs(z) / 2) & (z.real > 0) & ((z + w).real > 0)
    if np.any(~far):
        out[~far] = log_gamma_complex(z[~far] + w[~far]) - log_gamma_complex(z[~far])
    if np.any(far):
        a, b = z[far], w[far]
        zw = a + b
        val = (a - 0.5) * _log1p_complex(b / a) + b * np.log(zw) - b
        for k, bk in enumerate(_BERNOULLI, start=1):
            c = bk / (2 * k * (2 * k - 1))
            val = val + c * (zw ** (1 - 2 * k) - a ** (1 - 2 * k))
        out[far] = val
    return out if out.ndim else complex(out)


def gamma_ratio(form, s, u):
    """log G(f, s+u) - log G(f, s)."""
    desc = _descriptor(form)
    u = np.asarray(u, dtype=complex)
    out = np.zeros(np.broadcast(np.asarray(s), u).shape, dtype=complex)
    for mu in desc.arch_params:
        out = out - u / 2 * LOG_PI + log_gamma_ratio((s + mu) / 2, u / 2)
    return out if out.ndim else complex(out)


def stirling_ratio_check(form, sigma: float, y: float) -> tuple[float, float]:
    """(|log|G(sigma+iy)/G(1/2+iy)||, (sigma - 1/2) log y)."""
    if y < 100:
        raise InvalidArgument("stirling_ratio_check needs y >= 100")
    if not 0.5 <= sigma <= 1:
        raise InvalidArgument("sigma must lie in [1/2, 1]")
    diff = gamma_factor(form, complex(sigma, y)) - gamma_factor(form, complex(0.5, y))
    return abs(diff.real), (sigma - 0.5) * math.log(y)


def analytic_conductor(form, s: complex) -> float:
    """q(s) = prod_j |s + mu_j| / (2 pi)."""
    return float(np.prod([abs(s + mu) / (2 * math.pi) for mu in _descriptor(form).arch_params]))


def natural_tilt(form, s: complex) -> float:
    return 0.5 * sum(np.angle(s + mu) for mu in _descriptor(form).arch_params)


# ---------------------------------------------------------------------------
# smoothing kernel

class SmoothingKernel:
    """Trapezoidal discretization of V_s on two vertical contours (left and right of 0)."""

    def __init__(self, form, s: complex, cfg: EvalConfig, tilt: float | None = None):
        desc = _descriptor(form)
        self.desc = desc
        self.s = complex(s)
        self.cfg = cfg
        self.tilt = natural_tilt(desc, s) if tilt is None else float(tilt)
        self.sqrt_q = math.sqrt(analytic_conductor(desc, s))
        mu_min = min(complex(m).real for m in desc.arch_params)
        room = self.s.real + mu_min
        if room <= 0:
            raise DomainError(f"Re(s) + min shift = {room} <= 0; V contour would cross gamma poles")
        self.room = room
        self.c_right = 1.0
        self.c_left = -min(1.0, room / 2)
        self.log_g0 = gamma_factor(desc, self.s)
        self._right = self._contour(self.c_right)
        self._left = self._contour(self.c_left)
        self._window = None

    def _contour(self, c: float):
        cfg = self.cfg
        kappa = cfg.kappa
        # Gaussian envelope exp(kappa (c^2 - v^2)) below eps * exp(kappa c^2) beyond this height
        need = math.sqrt(40.0 / kappa) + 2.0
        height = min(cfg.quadrature_height, need)
        # trapezoid error ~ exp(-2 pi d / h), d = distance to the nearest pole (0 or a gamma pole)
        dist = min(abs(c), c + self.room)
        tol = cfg.target_rel_error * 1e-3
        h = min(cfg.quadrature_step, 2 * math.pi * dist / (math.log(1 / tol) + 3))
        m = int(math.ceil(height / h))
        v = h * np.arange(-m, m + 1)
        u = c + 1j * v
        log_w = kappa * u * u - 1j * self.tilt * u + gamma_ratio(self.desc, self.s, u) - np.log(u)
        w = np.exp(log_w) * (h / (2 * math.pi))
        edge = max(abs(w[0]), abs(w[-1]))
        if edge > 1e-13 * max(1.0, np.abs(w).max()):
            raise PrecisionError(
                f"V quadrature tail {edge:.2e} exceeds tolerance at height {height}; increase quadrature_height"
            )
        return u, w

    def __call__(self, y) -> np.ndarray:
        """V_s(y) for y > 0 (array), by direct quadrature."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if np.any(y <= 0):
            raise InvalidArgument("V(y) needs y > 0")
        x = np.log(y)
        out = np.empty(y.shape, dtype=complex)
        right = x >= math.log(self.sqrt_q)
        for mask, (u, w), residue in ((right, self._right, 0.0), (~right, self._left, 1.0)):
            if mask.any():
                out[mask] = np.exp(-np.outer(x[mask], u)) @ w + residue
        return out

    def coarse(self, y) -> np.ndarray:
        """Same quadrature with every other node (step doubled); for error estimates."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        x = np.log(y)
        out = np.empty(y.shape, dtype=complex)
        right = x >= math.log(self.sqrt_q)
        for mask, (u, w), residue in ((right, self._right, 0.0), (~right, self._left, 1.0)):
            if mask.any():
                mid = len(u) // 2
                sel = np.arange(len(u)) % 2 == mid % 2
                out[mask] = np.exp(-np.outer(x[mask], u[sel])) @ (2 * w[sel]) + residue
        return out

    def transition(self) -> tuple[float, float]:
        """log y interval outside which V is 1 (left) or 0 (right) to target accuracy.

        Located by scanning the kernel itself: the gamma ratio widens the
        transition beyond the kappa Gaussian when |s + mu| is small.
        """
        if self._window is None:
            tol = self.cfg.target_rel_error * 1e-3
            centre = math.log(self.sqrt_q)
            hi = self._scan(centre, 0.25, 1e9, lambda v: np.abs(v) > tol)
            # n >= 1 and the balance factor is at most e^5, so log y >= -5 suffices
            lo = self._scan(centre, -0.25, -5.0, lambda v: np.abs(1 - v) > tol)
            self._window = (lo, hi + math.log(self.cfg.series_cutoff_multiplier))
        return self._window


    def _scan(self, start: float, step: float, stop: float, bad) -> float:
        """Walk from ``start`` in chunks until a whole chunk satisfies the tolerance."""
        last = start
        x0 = start
        for _ in range(40):
            xs = x0 + step * np.arange(1, 33)
            if step < 0:
                xs = xs[xs > stop]
                if xs.size == 0:
                    return stop
            flags = bad(self(np.exp(xs)))
            if flags.any():
                k = np.flatnonzero(flags).max()
                last = xs[min(k + 1, xs.size - 1)]
                if k + 1 >= xs.size:
                    if step < 0 and xs[-1] <= stop + abs(step):
                        return stop
                    x0 = xs[-1]
                    continue
            return float(last if flags.any() else (start if x0 == start else x0))
        raise PrecisionError("smoothing function transition not located")


class SmoothedSum:
    """Piecewise Chebyshev interpolant of V over its transition window, plus the sum cutoff."""

    def __init__(self, kernel: SmoothingKernel, balance: float):
        self.kernel = kernel
        cfg = kernel.cfg
        lo, hi = kernel.transition()
        self.scale = balance
        # y = n / balance; n ranges over integers >= 1
        lo_n = max(0.0, lo + math.log(balance))
        hi_n = hi + math.log(balance)
        self.cutoff = max(1, int(math.ceil(math.exp(hi_n))))
        tol = cfg.target_rel_error * 1e-3
        if self.cutoff > 1 and abs(kernel(np.array([self.cutoff / balance]))[0]) > tol:
            raise PrecisionError("smoothing function has not decayed at the series cutoff")
        # the top node must cover log(cutoff); Chebyshev series do not extrapolate
        self.lo = lo_n
        self.hi = max(math.log(self.cutoff) + 1e-12, lo_n + 1e-9)
        pieces = max(1, int(math.ceil((self.hi - self.lo) / cfg.cheb_piece_width)))
        self.edges = np.linspace(self.lo, self.hi, pieces + 1)
        self.coefs = []
        self.degree = 0
        self.fit_error = 0.0
        probe = np.linspace(-1, 1, 41)[1:-1] + 0.0073
        for a, b in zip(self.edges[:-1], self.edges[1:]):
            deg = cfg.cheb_degree
            while True:
                # raise the degree until the fit holds between the nodes
                nodes = np.cos(math.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
                coef = cheb.chebfit(nodes, kernel(self._y(nodes, a, b)), deg)
                err = np.abs(cheb.chebval(probe, coef) - kernel(self._y(probe, a, b))).max()
                if err <= tol:
                    break
                if deg >= 8 * cfg.cheb_degree:
                    raise PrecisionError(f"Chebyshev fit of V reaches only {err:.2e} at degree {deg}")
                deg = int(deg * 1.5)
            self.coefs.append(coef)
            self.degree = max(self.degree, deg)
            self.fit_error = max(self.fit_error, float(err))

    def _y(self, t: np.ndarray, a: float, b: float) -> np.ndarray:
        return np.exp(0.5 * (a + b) + 0.5 * (b - a) * t) / self.scale

    def weights(self, logn: np.ndarray) -> np.ndarray:
        """V(n / balance) for sorted log n (n beyond the cutoff is not allowed)."""
        out = np.ones(logn.shape, dtype=complex)
        cuts = np.searchsorted(logn, self.edges)
        for i, coef in enumerate(self.coefs):
            lo_i, hi_i = cuts[i], cuts[i + 1] if i + 1 < len(self.coefs) else logn.size
            if hi_i <= lo_i:
                continue
            a, b = self.edges[i], self.edges[i + 1]
            t = (2 * logn[lo_i:hi_i] - (a + b)) / (b - a)
            out[lo_i:hi_i] = cheb.chebval(t, coef)
        return out


# ---------------------------------------------------------------------------
# evaluation

def v_smoothing(form, s: complex, y, cfg: EvalConfig | None = None, tilt: float | None = None):
    cfg = cfg or EvalConfig()
    out = SmoothingKernel(form, s, cfg, tilt)(y)
    return out if np.ndim(y) else complex(out[0])


@lru_cache(maxsize=4)
def _logs(n: int) -> np.ndarray:
    out = np.log(np.arange(1, n + 1, dtype=float))
    out.setflags(write=False)
    return out


def dirichlet_eval(form: Form, s, N: int):
    """Partial sum sum_{n<=N} lambda(n) n^-s (s scalar or array)."""
    if N > form.table.limit:
        raise TableTooShort(N, form.table.limit)
    lam = form.table.values[1 : N + 1]
    logn = _logs(N)
    s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
    out = np.empty(s_arr.shape, dtype=complex)
    chunk = max(1, 2_000_000 // max(N, 1))
    for i in range(0, s_arr.size, chunk):
        blk = s_arr.ravel()[i : i + chunk]
        out.ravel()[i : i + chunk] = np.exp(-np.outer(blk, logn)) @ lam
    return out if np.ndim(s) else complex(out[0])


def afe_lengths(form: Form, s: complex, cfg: EvalConfig | None = None) -> tuple[int, int]:
    cfg = cfg or EvalConfig()
    desc = _descriptor(form)
    k1 = SmoothingKernel(desc, s, cfg)
    k2 = SmoothingKernel(desc.dual(), 1 - s, cfg, tilt=-k1.tilt)
    out = []
    for k, b in ((k1, cfg.balance), (k2, 1 / cfg.balance)):
        lo, hi = k.transition()
        out.append(max(1, int(math.ceil(math.exp(hi + math.log(b))))))
    return out[0], out[1]


def afe_eval(form: Form, s: complex, cfg: EvalConfig | None = None, root_number: complex = 1.0) -> CompletedValue:
    cfg = cfg or EvalConfig()
    s = complex(s)
    if not 0 <= s.real <= 2.5:
        raise InvalidArgument("afe_eval supports 0 <= Re s <= 2.5")
    desc = form.descriptor
    dual = desc.dual()
    k1 = SmoothingKernel(desc, s, cfg)
    k2 = SmoothingKernel(dual, 1 - s, cfg, tilt=-k1.tilt)
    first = SmoothedSum(k1, cfg.balance)
    second = SmoothedSum(k2, 1 / cfg.balance)
    need = max(first.cutoff, second.cutoff)
    if need > form.table.limit:
        raise TableTooShort(need, form.table.limit)
    lam = form.table.values
    logn = _logs(need)

    def partial(sm: SmoothedSum, z: complex, coeffs) -> complex:
        n = sm.cutoff
        ln = logn[:n]
        return complex(np.dot(coeffs[1 : n + 1], np.exp(-z * ln) * sm.weights(ln)))

    s1 = partial(first, s, lam)
    s2 = partial(second, 1 - s, np.conj(lam))
    log_g = gamma_factor(desc, s)
    ratio = np.exp(gamma_factor(dual, 1 - s) - log_g)
    L = s1 + root_number * ratio * s2
    log_abs = log_g.real + math.log(max(abs(L), NEAR_ZERO_FLOOR))
    Lam = complex(np.exp(log_g) * L) if log_abs > -700 else 0j
    return CompletedValue(s, complex(log_g), complex(L), Lam, (first.cutoff, second.cutoff))


def required_length(form: Form, t_max: float, sigma: float = 0.5, cfg: EvalConfig | None = None) -> int:
    """Coefficient table length needed to evaluate at heights up to t_max."""
    cfg = cfg or EvalConfig()
    a, b = afe_lengths(form, complex(sigma, t_max), cfg)
    return max(a, b)


def log_abs_L_flagged(form: Form, sigma: float, t: float, cfg: EvalConfig | None = None) -> tuple[float, bool]:
    val = afe_eval(form, complex(sigma, t), cfg)
    a = abs(val.L)
    if a < NEAR_ZERO_FLOOR:
        return math.log(NEAR_ZERO_FLOOR), True
    return math.log(a), False


def log_abs_L(form: Form, sigma: float, t: float, cfg: EvalConfig | None = None) -> float:
    return log_abs_L_flagged(form, sigma, t, cfg)[0]


def functional_equation_residual(form: Form, s: complex, cfg: EvalConfig | None = None,
                                 floor: float = 1e-12) -> float:
    """|Lambda(s) - Lambda(1-s)| / max(|Lambda(s)|, floor |G(s)|), computed in log scale."""
    if not form.descriptor.self_dual:
        raise InvalidArgument("functional_equation_residual needs a self-dual form")
    a = afe_eval(form, s, cfg)
    b = afe_eval(form, 1 - complex(s), cfg)
    rel = np.exp(b.log_G - a.log_G) * b.L
    return float(abs(a.L - rel) / max(abs(a.L), floor))


# ---------------------------------------------------------------------------
# independent |L(s)|^2 via the e^{z^2}-damped double integral

def _conj_form(form: Form) -> Form:
    t = form.table
    return Form(form.descriptor.dual(), t.__class__(t.form_id, t.limit, np.conj(t.values), t.provenance, t.degree))


def _contour_nodes(c: float, step: float) -> np.ndarray:
    height = math.sqrt(40 + c * c) + 1
    m = int(math.ceil(height / step))
    return c + 1j * step * np.arange(-m, m + 1)


def _amplification(desc: FormDescriptor, s: complex, c: float) -> float:
    """max over the contour of |G(z+s) G(z+conj s)| e^{Re z^2} / (|z| |G(s)|^2)."""
    z = _contour_nodes(c, 0.25)
    log_amp = (gamma_ratio(desc, s, z) + gamma_ratio(desc.dual(), np.conj(s), z)).real + (z * z).real - np.log(np.abs(z))
    return float(np.exp(log_amp.max()))


def _series_tail(degree: int, sigma: float, N: int) -> float:
    # sum_{n > N} d_degree(n) n^-sigma, crude integral bound
    return N ** (1 - sigma) * math.log(N) ** (degree - 1) / ((sigma - 1) * math.factorial(degree - 1))


def _damped_plan(form: Form, s: complex, cfg: EvalConfig, tol: float) -> tuple[str, float]:
    desc = form.descriptor
    c = cfg.damped_abscissa
    N = min(cfg.damped_terms, form.table.limit)
    if s.real + c > 1 and (1 - s).real + c > 1:
        amp = max(_amplification(desc, s, c), _amplification(desc.dual(), 1 - s, c))
        err = amp * (_series_tail(desc.degree, s.real + c, N) + 1e-15 * math.sqrt(N))
        if err <= tol:
            return "dirichlet", c
    # the series does not converge fast enough for the cancellation involved:
    # evaluate Lambda on a contour just right of Re = 1 with the AFE instead
    return "afe", max(1.1 - s.real, 1.1 - (1 - s).real)


def _damped_integral(form: Form, s: complex, c: float, method: str, cfg: EvalConfig, step: float) -> np.ndarray:
    """Trapezoid terms of (1/2 pi i) int_(c) Lambda(f,z+s) Lambda(f~,z+conj s) e^{z^2} dz/z / |G(f,s)|^2."""
    desc = form.descriptor
    dual = _conj_form(form)
    z = _contour_nodes(c, step)
    if method == "dirichlet":
        N = min(cfg.damped_terms, form.table.limit)
        L1 = dirichlet_eval(form, z + s, N)
        L2 = dirichlet_eval(dual, z + np.conj(s), N)
    else:
        L1 = np.array([afe_eval(form, w, cfg).L for w in z + s])
        # conj-shifted point of the dual form: L(f~, w) = conj(L(f, conj w)) for every built-in form
        L2 = np.array([afe_eval(dual, w, cfg).L for w in z + np.conj(s)])
    log_amp = gamma_ratio(desc, s, z) + gamma_ratio(dual.descriptor, np.conj(s), z)
    log_amp = log_amp + z * z - np.log(z)
    # |G(s)|^2 = G(f,s) G(f~,conj s) when the shifts are closed under conjugation
    return np.exp(log_amp) * L1 * L2 * (step / (2 * math.pi))


def damped_integral_abs_sq(form: Form, s: complex, cfg: EvalConfig | None = None, step: float = 0.05,
               tol: float = 1e-4) -> tuple[float, float, str]:
    """(rhs, error estimate, method) for |L(s)|^2 = (I(f,s) + I(f~,1-s)) / |G(f,s)|^2."""
    cfg = cfg or EvalConfig()
    s = complex(s)
    desc = form.descriptor
    if not desc.shifts_closed_under_dual():
        raise InvalidArgument("the damped-integral normalization needs shifts closed under conjugation")
    method, c = _damped_plan(form, s, cfg, tol)
    if method == "afe":
        step = max(step, 0.1)
    dual_form = _conj_form(form)
    shift = 2 * (gamma_factor(desc.dual(), 1 - s).real - gamma_factor(desc, s).real)
    t1 = _damped_integral(form, s, c, method, cfg, step)
    t2 = _damped_integral(dual_form, 1 - s, c, method, cfg, step) * math.exp(shift)
    fine = t1.sum() + t2.sum()
    mid = len(t1) // 2
    sel = np.arange(len(t1)) % 2 == mid % 2
    coarse = 2 * (t1[sel].sum() + t2[sel].sum())
    return float(fine.real), float(abs(fine - coarse) + abs(fine.imag)), method
