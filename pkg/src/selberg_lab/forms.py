"""Normalized Dirichlet coefficients for concrete degree-2 and degree-3 forms.

Coefficients are normalized so that L(f, s) = sum lambda(n) n^-s has its
critical line at Re s = 1/2.  Gamma data is stored as the shift multiset
mu_j of G(s) = prod_j pi^(-s/2) Gamma((s + mu_j)/2).
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import gmpy2
import numpy as np

from . import arith
from .errors import InvalidArgument, ResourceLimit

TABLE_CAP = 10**8
RAMANUJAN_TOL = 1e-9
MULT_TOL = 1e-12


@dataclass(frozen=True)
class FormDescriptor:
    id: str
    degree: int
    arch_params: tuple[complex, ...]
    self_dual: bool = True
    conductor: int = 1
    source: str = ""

    def __post_init__(self):
        if self.degree not in (2, 3):
            raise InvalidArgument(f"degree must be 2 or 3, got {self.degree}")
        if len(self.arch_params) != self.degree:
            raise InvalidArgument("degree must equal the number of archimedean shifts")

    def dual(self) -> "FormDescriptor":
        return FormDescriptor(
            self.id if self.self_dual else self.id + "~",
            self.degree,
            tuple(complex(a).conjugate() for a in self.arch_params),
            self.self_dual,
            self.conductor,
            self.source,
        )

    def shifts_closed_under_dual(self, tol: float = 1e-12) -> bool:
        key = lambda z: (round(z.real, 9), round(z.imag, 9))
        mine = sorted((complex(a) for a in self.arch_params), key=key)
        dual = sorted((complex(a).conjugate() for a in self.arch_params), key=key)
        return all(abs(a - b) <= tol for a, b in zip(mine, dual))


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """values[n] = lambda(1, n) for 1 <= n <= limit; values[0] is unused (0)."""

    form_id: str
    limit: int
    values: np.ndarray = field(repr=False)
    provenance: str = ""
    degree: int = 2
    raw: tuple[int, ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.values) != self.limit + 1:
            raise InvalidArgument("values must have length limit + 1")
        self.values.setflags(write=False)

    def __getitem__(self, n):
        return self.values[n]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def truncate(self, limit: int) -> "CoefficientTable":
        if limit > self.limit:
            raise InvalidArgument(f"cannot extend table {self.form_id} beyond {self.limit}")
        raw = self.raw[: limit + 1] if self.raw is not None else None
        return CoefficientTable(
            self.form_id, limit, self.values[: limit + 1].copy(), self.provenance, self.degree, raw
        )

    def scaled(self, factor: float) -> "CoefficientTable":
        return CoefficientTable(
            self.form_id, self.limit, self.values * factor, self.provenance + f"; scaled by {factor}", self.degree
        )

    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.values).tobytes()).hexdigest()


@dataclass(frozen=True, eq=False)
class Form:
    """A descriptor together with a coefficient table."""

    descriptor: FormDescriptor
    table: CoefficientTable

    @property
    def id(self) -> str:
        return self.descriptor.id

    @property
    def degree(self) -> int:
        return self.descriptor.degree

    @property
    def shifts(self) -> tuple[complex, ...]:
        return self.descriptor.arch_params

    @property
    def limit(self) -> int:
        return self.table.limit

    def with_table(self, table: CoefficientTable) -> "Form":
        return Form(self.descriptor, table)


# ---------------------------------------------------------------------------
# exact power series by Kronecker substitution

def _slot_bytes(bound: int) -> int:
    # signed slots: need |c| < 2^(8*nbytes - 1)
    return (int(bound).bit_length() + 2 + 7) // 8


def _pack(coeffs: list[int], nbytes: int) -> gmpy2.mpz:
    pos = b"".join((c if c > 0 else 0).to_bytes(nbytes, "little") for c in coeffs)
    neg = b"".join((-c if c < 0 else 0).to_bytes(nbytes, "little") for c in coeffs)
    return gmpy2.mpz(int.from_bytes(pos, "little")) - gmpy2.mpz(int.from_bytes(neg, "little"))


def _unpack(x: gmpy2.mpz, slots: int, nbytes: int, keep: int) -> list[int]:
    half = 1 << (8 * nbytes - 1)
    offset = int.from_bytes(((0).to_bytes(nbytes - 1, "little") + b"\x80") * slots, "little")
    y = int(x) + offset
    data = y.to_bytes(slots * nbytes + 1, "little")
    return [int.from_bytes(data[i * nbytes : (i + 1) * nbytes], "little") - half for i in range(keep)]


def series_mul(a: list[int], b: list[int], n: int) -> list[int]:
    """First n coefficients of the product of two integer power series."""
    a, b = a[:n], b[:n]
    bound = min(len(a), len(b)) * max(map(abs, a)) * max(map(abs, b))
    nbytes = _slot_bytes(bound)
    prod = _pack(a, nbytes) * _pack(b, nbytes)
    return _unpack(prod, len(a) + len(b), nbytes, min(n, len(a) + len(b) - 1))


def euler_cube_series(n: int) -> list[int]:
    """Coefficients of prod (1 - q^m)^3 = sum (-1)^k (2k+1) q^(k(k+1)/2), first n terms."""
    out = [0] * n
    k = 0
    while k * (k + 1) // 2 < n:
        out[k * (k + 1) // 2] = (-1) ** k * (2 * k + 1)
        k += 1
    return out


def tau_series(limit: int) -> list[int]:
    """tau(n) for 0 <= n <= limit (tau(0) = 0) from q * prod (1 - q^m)^24."""
    n = limit  # coefficients of prod(1-q^m)^24 needed up to q^(limit-1)
    e = euler_cube_series(n)
    e2 = series_mul(e, e, n)
    e4 = series_mul(e2, e2, n)
    e8 = series_mul(e4, e4, n)
    return [0] + e8[:limit]


def sigma_k_array(limit: int, k: int) -> list[int]:
    sig = [0] * (limit + 1)
    for d in range(1, limit + 1):
        dk = d**k
        for m in range(d, limit + 1, d):
            sig[m] += dk
    return sig


def _sigma3_numpy(limit: int) -> np.ndarray:
    if limit > 2 * 10**6:
        raise ResourceLimit("sigma_3 table overflows int64 beyond 2e6")
    sig = np.zeros(limit + 1, dtype=np.int64)
    for d in range(1, limit + 1):
        sig[d::d] += d**3
    return sig


def weight16_series(limit: int) -> list[int]:
    """Coefficients of E4 * Delta, index 0..limit."""
    delta = tau_series(limit)
    e4 = [1] + [240 * int(v) for v in _sigma3_numpy(limit)[1:]]
    return series_mul(e4, delta, limit + 1)[: limit + 1]


def _check_limit(limit: int) -> None:
    if limit < 1:
        raise InvalidArgument("limit must be >= 1")
    if limit > TABLE_CAP:
        raise ResourceLimit(f"table limit {limit} exceeds cap {TABLE_CAP}")


def _normalize(raw: list[int], weight: int) -> np.ndarray:
    limit = len(raw) - 1
    n = np.arange(limit + 1, dtype=np.float64)
    vals = np.zeros(limit + 1)
    expo = (weight - 1) / 2
    vals[1:] = np.array([float(c) for c in raw[1:]]) / n[1:] ** expo
    return vals


def delta_coefficients(limit: int) -> CoefficientTable:
    _check_limit(limit)
    raw = tau_series(limit)
    return CoefficientTable(
        "delta", limit, _normalize(raw, 12), "q prod(1-q^n)^24, exact integers / n^(11/2)", 2, tuple(raw)
    )


def weight16_coefficients(limit: int) -> CoefficientTable:
    _check_limit(limit)
    raw = weight16_series(limit)
    return CoefficientTable(
        "weight16", limit, _normalize(raw, 16), "E4 * Delta, exact integers / n^(15/2)", 2, tuple(raw)
    )


# ---------------------------------------------------------------------------
# multiplicative fill from prime-power data

def _prime_power_part(limit: int) -> tuple[np.ndarray, np.ndarray]:
    """For 2 <= n <= limit: the full power of spf(n) dividing n, and omega(n)."""
    table = arith.sieve_primes(max(2, limit))
    spf = np.asarray(table.spf[: limit + 1])
    n = np.arange(limit + 1)
    pp = spf.copy()
    pp[:2] = 1
    rest = np.where(n >= 2, n // np.maximum(pp, 1), 1)
    while True:
        more = (rest % np.maximum(spf, 1) == 0) & (n >= 2)
        if not more.any():
            break
        pp[more] *= spf[more]
        rest[more] //= spf[more]
    omega = np.zeros(limit + 1, dtype=np.int64)
    for p in table.primes:
        if p > limit:
            break
        omega[int(p) :: int(p)] += 1
    return pp, omega


def fill_multiplicative(prime_power_values: np.ndarray, limit: int) -> np.ndarray:
    """Extend values known at prime powers (entries elsewhere ignored) multiplicatively."""
    pp, omega = _prime_power_part(limit)
    vals = np.zeros(limit + 1, dtype=prime_power_values.dtype)
    vals[1] = 1
    idx = np.flatnonzero(omega == 1)
    vals[idx] = prime_power_values[idx]
    for w in range(2, int(omega.max(initial=1)) + 1):
        idx = np.flatnonzero(omega == w)
        vals[idx] = prime_power_values[pp[idx]] * vals[idx // pp[idx]]
    return vals


def _local_recursion(e: list[np.ndarray], kmax: int) -> list[np.ndarray]:
    """Coefficients b_0..b_kmax of 1/(1 - e1 x + e2 x^2 - e3 x^3 ...) elementwise."""
    b = [np.ones_like(e[0])]
    for k in range(1, kmax + 1):
        acc = np.zeros_like(e[0])
        for j, ej in enumerate(e, start=1):
            if k - j >= 0:
                acc = acc + (-1) ** (j + 1) * ej * b[k - j]
        b.append(acc)
    return b


def _from_local_polys(primes: np.ndarray, e: list[np.ndarray], limit: int) -> np.ndarray:
    kmax = max(1, int(math.log(limit, 2)) + 1)
    b = _local_recursion(e, kmax)
    ppv = np.zeros(limit + 1, dtype=np.result_type(*e))
    for k in range(1, kmax + 1):
        pk = primes.astype(object) ** k
        ok = np.array([v <= limit for v in pk], dtype=bool)
        if not ok.any():
            break
        ppv[np.array(pk[ok], dtype=np.int64)] = b[k][ok]
    return fill_multiplicative(ppv, limit)


def sym_square_lift(gl2_table: CoefficientTable, limit: int | None = None) -> CoefficientTable:
    """Degree-3 table of the symmetric square from the prime values of a degree-2 table."""
    if gl2_table.degree != 2:
        raise InvalidArgument("sym_square_lift needs a degree-2 table")
    limit = gl2_table.limit if limit is None else limit
    _check_limit(limit)
    if limit > gl2_table.limit:
        raise InvalidArgument(f"degree-2 table covers {gl2_table.limit}, lift needs primes up to {limit}")
    primes = arith.sieve_primes(max(2, limit)).primes_upto(limit)
    lam = gl2_table.values[primes]
    c = lam * lam - 1.0
    vals = _from_local_polys(primes, [c, c, np.ones_like(c)], limit)
    return CoefficientTable(
        "sym2_" + gl2_table.form_id,
        limit,
        vals,
        f"symmetric square of {gl2_table.form_id}: local factor (1-a^2x)(1-x)(1-a^-2x)",
        3,
    )


# ---------------------------------------------------------------------------
# synthetic Satake models

def sato_tate_angles(u: np.ndarray) -> np.ndarray:
    """Inverse CDF of (2/pi) sin^2 theta on [0, pi]; CDF is (2t - sin 2t)/(2 pi)."""
    lo = np.zeros_like(u)
    hi = np.full_like(u, math.pi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = (2 * mid - np.sin(2 * mid)) / (2 * math.pi) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def satake_angles(seed: int, n_primes: int) -> np.ndarray:
    """One Sato-Tate angle per prime index; prefix-stable in n_primes."""
    gen = np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))
    return sato_tate_angles(gen.random(n_primes))


def satake_random_form(seed: int, degree: int, limit: int) -> tuple[FormDescriptor, CoefficientTable]:
    if degree not in (2, 3):
        raise InvalidArgument(f"unsupported degree {degree}")
    _check_limit(limit)
    primes = arith.sieve_primes(max(2, limit)).primes_upto(limit)
    theta = satake_angles(seed, len(primes))
    lam = 2 * np.cos(theta)
    if degree == 2:
        vals = _from_local_polys(primes, [lam, np.ones_like(lam)], limit)
        shifts = (5.5, 6.5)
    else:
        c = 2 * np.cos(2 * theta) + 1
        vals = _from_local_polys(primes, [c, c, np.ones_like(c)], limit)
        shifts = (1.0, 11.0, 12.0)
    fid = f"satake{degree}:{seed}"
    desc = FormDescriptor(fid, degree, shifts, True, 1, "synthetic Sato-Tate Satake model")
    table = CoefficientTable(fid, limit, vals, f"Sato-Tate angles, Philox seed {seed}", degree)
    return desc, table


# ---------------------------------------------------------------------------
# invariant checks

@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


def check_table(table: CoefficientTable, max_reports: int = 10, exact: bool = False) -> list[Violation]:
    """Report violations of normalization, multiplicativity and the Ramanujan bound."""
    out: list[Violation] = []
    v = table.values
    L = table.limit
    if abs(v[1] - 1) > MULT_TOL:
        out.append(Violation("normalization", f"values[1] = {v[1]!r}"))
    bad = 0
    for m in range(2, L // 2 + 1):
        n = np.arange(m + 1, L // m + 1)
        if n.size == 0:
            break
        n = n[np.gcd(n, m) == 1]
        if exact and table.raw is not None:
            raw = table.raw
            for k in n.tolist():
                if raw[m * k] != raw[m] * raw[k]:
                    bad += 1
                    if bad <= max_reports:
                        out.append(Violation("multiplicativity", f"raw[{m}*{k}] != raw[{m}]*raw[{k}]"))
            continue
        prod = v[m] * v[n]
        err = np.abs(v[m * n] - prod)
        viol = err > MULT_TOL * np.maximum(1.0, np.abs(prod))
        if viol.any():
            for k in n[viol][: max(0, max_reports - bad)]:
                out.append(Violation("multiplicativity", f"values[{m * k}] != values[{m}]*values[{k}]"))
            bad += int(viol.sum())
    d = arith.divisor_k_array(L, table.degree)
    over = np.flatnonzero(np.abs(v[1:]) > d[1:] * (1 + RAMANUJAN_TOL)) + 1
    for n in over[:max_reports]:
        out.append(Violation("ramanujan", f"|values[{n}]| = {abs(v[n]):.6g} > d_{table.degree}({n}) = {d[n]:g}"))
    if table.degree == 2 and L >= 2:
        primes = arith.sieve_primes(max(2, L)).primes_upto(L)
        over = primes[np.abs(v[primes]) > 2 * (1 + RAMANUJAN_TOL)]
        for p in over[:max_reports]:
            out.append(Violation("ramanujan", f"|values[{p}]| > 2 at a prime"))
    return out


# ---------------------------------------------------------------------------
# registry of built-in forms

BUILTIN_SHIFTS = {
    "delta": (2, (5.5, 6.5), "weight-12 discriminant form"),
    "weight16": (2, (7.5, 8.5), "weight-16 level-1 eigenform E4*Delta"),
    "sym2_delta": (3, (1.0, 11.0, 12.0), "symmetric square of delta"),
    "sym2_weight16": (3, (1.0, 15.0, 16.0), "symmetric square of weight16"),
}

_TABLE_CACHE: dict[str, CoefficientTable] = {}


def describe(form_id: str) -> FormDescriptor:
    if form_id in BUILTIN_SHIFTS:
        deg, shifts, src = BUILTIN_SHIFTS[form_id]
        return FormDescriptor(form_id, deg, tuple(float(x) for x in shifts), True, 1, src)
    if form_id.startswith("satake"):
        deg, seed = _parse_satake(form_id)
        shifts = (5.5, 6.5) if deg == 2 else (1.0, 11.0, 12.0)
        return FormDescriptor(form_id, deg, shifts, True, 1, "synthetic Sato-Tate Satake model")
    raise InvalidArgument(f"unknown form {form_id!r}")


def _parse_satake(form_id: str) -> tuple[int, int]:
    try:
        head, seed = form_id.split(":")
        return int(head[len("satake"):]), int(seed)
    except ValueError:
        raise InvalidArgument(f"malformed synthetic form id {form_id!r}; use satake2:SEED") from None


def build_table(form_id: str, limit: int) -> CoefficientTable:
    if form_id == "delta":
        return delta_coefficients(limit)
    if form_id == "weight16":
        return weight16_coefficients(limit)
    if form_id.startswith("sym2_"):
        base = coefficients(form_id[len("sym2_"):], limit)
        return sym_square_lift(base, limit)
    if form_id.startswith("satake"):
        deg, seed = _parse_satake(form_id)
        return satake_random_form(seed, deg, limit)[1]
    raise InvalidArgument(f"unknown form {form_id!r}")


def coefficients(form_id: str, limit: int, cache_dir: str | os.PathLike | None = None) -> CoefficientTable:
    """Table for a built-in form, reusing in-process and on-disk caches."""
    hit = _TABLE_CACHE.get(form_id)
    if hit is not None and hit.limit >= limit:
        return hit if hit.limit == limit else hit.truncate(limit)
    if cache_dir is None:
        cache_dir = os.environ.get("SELBERG_LAB_CACHE")
    table = None
    if cache_dir:
        from . import cache

        path = cache.cache_path(cache_dir, form_id, limit)
        if Path(path).exists():
            table = cache.read_table(path)
    if table is None:
        table = build_table(form_id, limit)
        if cache_dir:
            from . import cache

            cache.write_table(cache.cache_path(cache_dir, form_id, limit), table)
    _TABLE_CACHE[form_id] = table
    return table


def load_form(form_id: str, limit: int, cache_dir=None) -> Form:
    return Form(describe(form_id), coefficients(form_id, limit, cache_dir))


def prime_coefficients_differ(a: CoefficientTable, b: CoefficientTable, n_primes: int = 100) -> bool:
    primes = arith.sieve_primes(10**4).primes[:n_primes]
    primes = primes[primes <= min(a.limit, b.limit)]
    return bool(np.any(np.abs(a.values[primes] - b.values[primes]) > 1e-12))
