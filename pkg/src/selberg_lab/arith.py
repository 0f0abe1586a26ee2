"""Integer primitives: sieve, factorization, Moebius, multinomial a_k(n)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidArgument, ResourceLimit

SIEVE_CAP = 10**8
MAX_K = 20


@dataclass(frozen=True)
class Factorization:
    pairs: tuple[tuple[int, int], ...] = ()

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)

    @property
    def value(self) -> int:
        out = 1
        for p, e in self.pairs:
            out *= p**e
        return out

    @property
    def big_omega(self) -> int:
        return sum(e for _, e in self.pairs)


@dataclass(frozen=True, eq=False)
class PrimeTable:
    """Primes up to ``limit`` together with a smallest-prime-factor array.

    ``spf[n]`` is the least prime dividing n for 2 <= n <= limit; spf[0] and
    spf[1] are 0.
    """

    limit: int
    primes: np.ndarray
    spf: np.ndarray = field(repr=False)

    def is_prime(self, n: int) -> bool:
        if n < 2 or n > self.limit:
            if n > self.limit:
                raise InvalidArgument(f"{n} exceeds sieve limit {self.limit}")
            return False
        return int(self.spf[n]) == n

    def primes_upto(self, x: float) -> np.ndarray:
        return self.primes[: np.searchsorted(self.primes, math.floor(x), side="right")]

    def primes_between(self, lo: float, hi: float) -> np.ndarray:
        """Primes p with lo < p <= hi."""
        a = np.searchsorted(self.primes, math.floor(lo), side="right")
        b = np.searchsorted(self.primes, math.floor(hi), side="right")
        return self.primes[a:b]

    def factorize(self, n: int) -> Factorization:
        if n < 1:
            raise InvalidArgument("factorize needs n >= 1")
        if n > self.limit:
            return _trial_factorize(n)
        pairs = []
        spf = self.spf
        while n > 1:
            p = int(spf[n])
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            pairs.append((p, e))
        return Factorization(tuple(pairs))


def sieve_primes(limit: int, cap: int = SIEVE_CAP) -> PrimeTable:
    """Smallest-prime-factor sieve up to ``limit`` inclusive."""
    if limit < 2 or limit > cap:
        raise InvalidArgument(f"sieve limit must be in [2, {cap}], got {limit}")
    return _sieve_cached(int(limit))


@lru_cache(maxsize=8)
def _sieve_cached(limit: int) -> PrimeTable:
    spf = np.zeros(limit + 1, dtype=np.int64)
    for p in range(2, math.isqrt(limit) + 1):
        if spf[p] == 0:
            block = spf[p * p :: p]
            block[block == 0] = p
    rest = np.flatnonzero(spf == 0)
    rest = rest[rest >= 2]
    spf[rest] = rest
    spf.setflags(write=False)
    primes = rest.astype(np.int64)
    primes.setflags(write=False)
    return PrimeTable(limit, primes, spf)


def _trial_factorize(n: int) -> Factorization:
    pairs = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            pairs.append((d, e))
        d += 1 if d == 2 else 2
    if n > 1:
        pairs.append((n, 1))
    return Factorization(tuple(pairs))


def factorize(n: int, table: PrimeTable | None = None) -> Factorization:
    if n < 1:
        raise InvalidArgument("factorize needs n >= 1")
    if table is not None:
        return table.factorize(n)
    if n <= 10**6:
        return sieve_primes(max(2, 10**6)).factorize(n)
    return _trial_factorize(n)


def mobius(n: int, table: PrimeTable | None = None) -> int:
    if n < 1:
        raise InvalidArgument("mobius is defined for n >= 1")
    fac = factorize(n, table)
    if any(e > 1 for _, e in fac):
        return 0
    return -1 if len(fac) % 2 else 1


def mobius_array(limit: int) -> np.ndarray:
    """mu(n) for 0 <= n <= limit (entry 0 is 0)."""
    table = sieve_primes(max(2, limit))
    mu = np.ones(limit + 1, dtype=np.int8)
    mu[0] = 0
    for p in table.primes:
        p = int(p)
        mu[p::p] *= -1
        mu[p * p :: p * p] = 0
    return mu


def big_omega_array(limit: int) -> np.ndarray:
    table = sieve_primes(max(2, limit))
    omega = np.zeros(limit + 1, dtype=np.int64)
    for p in table.primes:
        p = int(p)
        pk = p
        while pk <= limit:
            omega[pk::pk] += 1
            pk *= p
    return omega


def multinomial_a_k(n: int, k: int, X: float, table: PrimeTable | None = None) -> int:
    """k!/prod(alpha_j!) if n is a product of exactly k primes, all below X."""
    if k < 0 or k > MAX_K:
        raise InvalidArgument(f"k must be in [0, {MAX_K}], got {k}")
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    if n == 1:
        return 1 if k == 0 else 0
    fac = factorize(n, table)
    if fac.big_omega != k or fac.pairs[-1][0] >= X:
        return 0
    out = math.factorial(k)
    for _, e in fac:
        out //= math.factorial(e)
    return out


def divisor_k(n: int, k: int, table: PrimeTable | None = None) -> int:
    """k-fold divisor function d_k(n)."""
    out = 1
    for _, e in factorize(n, table):
        out *= math.comb(e + k - 1, k - 1)
    return out


def divisor_k_array(limit: int, k: int) -> np.ndarray:
    """d_k(n) for 0 <= n <= limit, float64 (entry 0 is 0)."""
    table = sieve_primes(max(2, limit))
    d = np.ones(limit + 1, dtype=np.float64)
    d[0] = 0.0
    for p in table.primes:
        p = int(p)
        pk, e = p, 1
        while pk <= limit:
            # multiply by d_k(p^e)/d_k(p^(e-1)) on multiples of p^e
            d[pk::pk] *= math.comb(e + k - 1, k - 1) / math.comb(e + k - 2, k - 1)
            pk *= p
            e += 1
    return d


def check_cap(count: float, cap: int, what: str) -> None:
    if count > cap:
        raise ResourceLimit(f"{what}: about {count:.3g} items exceeds cap {cap}")
