"""Prime pairs, the product family Y(I) and its combinatorics.

Pair ``i`` (1-based) is ``(p_{2i-1}, p_{2i})``, so pair 1 is (2, 3) and pair 2
is (5, 7).  Level ``j`` collects the pairs whose two primes both lie in
``[e^j, e^{j+1})`` and differ by at most ``gap_coeff * j``.  Powers of e are
compared with primes through outward-rounded interval enclosures whose
precision is raised until the comparison is decided.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product as cartesian
from math import comb, gcd, prod
from typing import Iterable, Sequence

import numpy as np
from mpmath import iv

from .errors import (BruteForceLimitExceeded, CapExceeded, GoodIndexSetNotFound,
                     PrecisionExhausted, SieveLimitTooSmall)
from .functions import euler_phi, prime_sieve
from .parallel import pmap
from .torus import format_rational, parse_rational

PRECISION_BUDGET = 4096


class PrimePairTable:
    """Primes up to ``limit`` with 1-based indexing and pair access."""

    def __init__(self, limit: int):
        self.limit = int(limit)
        self.primes = [int(p) for p in prime_sieve(self.limit)]

    def p(self, n: int) -> int:
        if n < 1:
            raise IndexError("primes are indexed from 1")
        if n > len(self.primes):
            raise SieveLimitTooSmall(f"p_{n} lies beyond the sieve limit {self.limit}")
        return self.primes[n - 1]

    def pair(self, i: int) -> tuple[int, int]:
        return self.p(2 * i - 1), self.p(2 * i)

    def num_pairs(self) -> int:
        return len(self.primes) // 2


@lru_cache(maxsize=8)
def _table(limit: int) -> PrimePairTable:
    return PrimePairTable(limit)


def table_for(n_pairs: int = 0, level: int = 0) -> PrimePairTable:
    """A shared table holding at least ``n_pairs`` pairs and reaching past ``e^(level+1)``."""
    limit = max(100, int(math.exp(level + 1)) + 200 * (level + 1) + 100)
    while True:
        t = _table(limit)
        if t.num_pairs() >= n_pairs:
            return t
        limit *= 2


def compare_exp(n: int, j: int) -> int:
    """Sign of ``n - e^j``, decided with certified enclosures."""
    if j == 0:
        return (n > 1) - (n < 1)
    prec = 64
    old = iv.prec
    try:
        while prec <= PRECISION_BUDGET:
            iv.prec = prec
            e = iv.exp(iv.mpf(j))
            if n < e.a:
                return -1
            if n > e.b:
                return 1
            prec *= 2
    finally:
        iv.prec = old
    raise PrecisionExhausted(f"cannot separate {n} from e^{j}")


def in_level(n: int, j: int) -> bool:
    return compare_exp(n, j) >= 0 and compare_exp(n, j + 1) < 0


def build_pairs(j: int, gap_coeff: int = 40, table: PrimePairTable | None = None) -> list[int]:
    """``I_j``: pair indices with both primes in ``[e^j, e^{j+1})`` and gap at most ``gap_coeff*j``."""
    table = table or table_for(level=j)
    if compare_exp(table.limit, j + 1) < 0:
        raise SieveLimitTooSmall(f"sieve limit {table.limit} is below e^{j + 1}")
    out = []
    for i in range(1, table.num_pairs() + 1):
        a, b = table.pair(i)
        if compare_exp(a, j + 1) >= 0:
            break
        if compare_exp(a, j) >= 0 and compare_exp(b, j + 1) < 0 and b - a <= gap_coeff * j:
            out.append(i)
    return out


def build_I(K: int, j_min: int = 5, gap_coeff: int = 40, table: PrimePairTable | None = None) -> list[int]:
    """Union of the levels ``I_j`` for ``j_min <= j <= K``."""
    if K < j_min:
        raise ValueError("K must be at least j_min")
    table = table or table_for(level=K)
    out: list[int] = []
    for j in range(j_min, K + 1):
        out.extend(build_pairs(j, gap_coeff, table))
    return sorted(out)


def level_of_pair(i: int, table: PrimePairTable | None = None) -> int:
    """The e-level containing the larger prime of pair ``i``."""
    table = table or table_for(n_pairs=i)
    b = table.pair(i)[1]
    j = max(0, int(math.log(b)) - 1)
    while compare_exp(b, j + 1) >= 0:
        j += 1
    while j > 0 and compare_exp(b, j) < 0:
        j -= 1
    return j


@dataclass(frozen=True)
class YSystem:
    """The family ``Y(I)`` with its primorial ``P`` and weights ``g_I``."""

    I: tuple[int, ...]
    pairs: tuple[tuple[int, int], ...]
    Y: tuple[int, ...]
    P: int
    weights: dict = field(compare=False, repr=False)

    @property
    def y_min(self) -> int:
        return self.Y[0]

    @property
    def y_max(self) -> int:
        return self.Y[-1]

    @property
    def even_primes(self) -> tuple[int, ...]:
        return tuple(b for _, b in self.pairs)

    @property
    def odd_primes(self) -> tuple[int, ...]:
        return tuple(a for a, _ in self.pairs)

    def g(self, y: int) -> Fraction:
        w = self.weights.get(y)
        return w if w is not None else g_of(self.even_primes, y)

    def admissible(self, x: int) -> bool:
        return gcd(x, self.P) == 1

    def harmonic_weight(self) -> Fraction:
        """``sum_y y_min / y``, which factors as a product over pairs."""
        return prod((1 + Fraction(a, b) for a, b in self.pairs), start=Fraction(1))

    def to_lines(self) -> list[str]:
        lines = [
            "I " + " ".join(map(str, self.I)),
            f"P {self.P}",
            f"y_min {self.y_min}",
            f"y_max {self.y_max}",
        ]
        lines += [f"{y} {format_rational(self.weights[y])}" for y in self.Y]
        return lines

    @classmethod
    def from_lines(cls, lines: Sequence[str], table: PrimePairTable | None = None) -> YSystem:
        head = dict(line.split(" ", 1) if " " in line else (line, "") for line in lines[:4])
        I = tuple(int(t) for t in head["I"].split())
        ys = enumerate_Y(I, cap=max(20, len(I)), table=table)
        body = {int(y): parse_rational(g) for y, g in (line.split() for line in lines[4:])}
        if int(head["P"]) != ys.P or body != ys.weights:
            raise ValueError("Y-system record does not match its index set")
        return ys


def g_of(even_primes: Iterable[int], z: int) -> Fraction:
    out = Fraction(1)
    for p in even_primes:
        if z % p == 0:
            out *= Fraction(p - 1, p)
    return out


def g_value(I: Iterable[int], z: int, table: PrimePairTable | None = None) -> Fraction:
    """``g_I(z)``: product of ``1 - 1/p_{2i}`` over pairs whose larger prime divides ``z``."""
    if z < 1:
        raise ValueError("z must be positive")
    I = sorted(set(I))
    table = table or table_for(n_pairs=max(I, default=0))
    return g_of((table.pair(i)[1] for i in I), z)


def enumerate_Y(I: Iterable[int], cap: int = 20, table: PrimePairTable | None = None) -> YSystem:
    I = tuple(sorted(set(I)))
    if len(I) > cap:
        raise CapExceeded(f"|I| = {len(I)} exceeds the enumeration cap {cap}")
    table = table or table_for(n_pairs=max(I, default=0))
    pairs = tuple(table.pair(i) for i in I)
    Y = sorted(prod(choice) for choice in cartesian(*pairs))
    evens = tuple(b for _, b in pairs)
    weights = {y: g_of(evens, y) for y in Y}
    P = prod(a * b for a, b in pairs)
    return YSystem(I, pairs, tuple(Y), P, weights)


def split_y(ys: YSystem, y: int) -> tuple[int, int]:
    """``(y_o, y_e)``: the parts of ``y`` built from smaller and larger pair primes."""
    return gcd(prod(ys.odd_primes), y), gcd(prod(ys.even_primes), y)


def weight_identity_holds(ys: YSystem, y: int) -> bool:
    y_o, y_e = split_y(ys, y)
    return y * ys.g(y) == y_o * euler_phi(y_e)


# ---------------------------------------------------------------------------
# goodness ratio
# ---------------------------------------------------------------------------

def count_heavy(factors: Sequence[Fraction], delta: Fraction, node_cap: int = 10**6) -> int:
    """Number of subsets ``T`` with ``prod_{t in T} factors[t] >= delta`` (factors in (0, 1])."""
    fs = sorted(factors, reverse=True)
    n = len(fs)
    suffix = [Fraction(1)] * (n + 1)
    for k in range(n - 1, -1, -1):
        suffix[k] = suffix[k + 1] * fs[k]
    nodes = 0
    total = 0
    stack = [(0, Fraction(1))]
    while stack:
        k, cur = stack.pop()
        nodes += 1
        if nodes > node_cap:
            raise CapExceeded("subset count needs more than the node budget")
        if cur < delta:
            continue
        if cur * suffix[k] >= delta:
            total += 1 << (n - k)
            continue
        # here k < n, otherwise suffix[k] == 1 would have been taken above
        stack.append((k + 1, cur))
        stack.append((k + 1, cur * fs[k]))
    return total


def good_I_ratio(I: Iterable[int], delta, table: PrimePairTable | None = None,
                 cap: int = 20) -> Fraction:
    """``#{y in Y : g_I(y) >= delta} / sum_y y_min/y``, exactly.

    Small systems are enumerated; larger ones count subsets of the larger
    pair primes directly, which gives the same number because ``g_I(y)``
    depends only on which larger primes divide ``y``.
    """
    delta = Fraction(delta)
    I = sorted(set(I))
    table = table or table_for(n_pairs=max(I, default=0))
    pairs = [table.pair(i) for i in I]
    denom = prod((1 + Fraction(a, b) for a, b in pairs), start=Fraction(1))
    if len(I) <= cap:
        ys = enumerate_Y(I, cap, table)
        heavy = sum(1 for y in ys.Y if ys.weights[y] >= delta)
    else:
        heavy = count_heavy([Fraction(b - 1, b) for _, b in pairs], delta)
    return heavy / denom


@dataclass(frozen=True)
class GoodIStep:
    K: int
    size: int
    ratio: Fraction


def find_good_I(delta, K_max: int, j_min: int = 5, gap_coeff: int = 40):
    """Scan ``K = j_min .. K_max`` for the first ``I = I_{j_min} u ... u I_K`` with ratio below ``delta``.

    Returns ``(I, trajectory)``; raises :class:`GoodIndexSetNotFound` carrying
    the trajectory when the budget runs out.
    """
    delta = Fraction(delta)
    trajectory: list[GoodIStep] = []
    for K in range(j_min, K_max + 1):
        table = table_for(level=K)
        I = build_I(K, j_min, gap_coeff, table)
        r = good_I_ratio(I, delta, table)
        trajectory.append(GoodIStep(K, len(I), r))
        if I and r < delta:
            return I, trajectory
    raise GoodIndexSetNotFound(
        f"no K <= {K_max} gives a ratio below {format_rational(delta)}", trajectory)


# ---------------------------------------------------------------------------
# level profile
# ---------------------------------------------------------------------------

def binomial_law(n: int) -> tuple[Fraction, ...]:
    return tuple(Fraction(comb(n, m), 2**n) for m in range(n + 1))


def xj_profile(I: Iterable[int], cap: int = 20, table: PrimePairTable | None = None,
               groups: dict[int, Sequence[int]] | None = None) -> dict[int, tuple[Fraction, ...]]:
    """Exact law of ``X_j(y) = #{i in I_j : p_{2i} | y}`` for uniform ``y`` in ``Y(I)``.

    Pairs are grouped by the e-level of their larger prime unless ``groups``
    (level -> pair indices) is given.
    """
    I = sorted(set(I))
    table = table or table_for(n_pairs=max(I, default=0))
    ys = enumerate_Y(I, cap, table)
    if groups is None:
        groups = {}
        for i in I:
            groups.setdefault(level_of_pair(i, table), []).append(i)
    if not groups:
        return {0: (Fraction(1),)}
    out = {}
    for j, members in sorted(groups.items()):
        evens = [table.pair(i)[1] for i in members]
        hist = Counter(sum(1 for p in evens if y % p == 0) for y in ys.Y)
        out[j] = tuple(Fraction(hist.get(m, 0), len(ys.Y)) for m in range(len(evens) + 1))
    return out


# ---------------------------------------------------------------------------
# survivor counts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurvivorCount:
    y: int
    count: int
    bound: int
    ok: bool


def _excluded_steps(ys: YSystem, y: int) -> list[int]:
    # a/y = b/y' for some b  <=>  (y / gcd(y, y')) divides a
    return sorted({y // gcd(y, yp) for yp in ys.Y if yp < y})


def survivor_count(ys: YSystem, y: int, limit: int = 10**6) -> SurvivorCount:
    """Residues ``a mod y`` whose fraction ``a/y`` has no representation over a smaller ``y'`` in ``Y``."""
    if y not in ys.weights:
        raise ValueError(f"{y} is not a member of Y")
    if y > limit:
        raise BruteForceLimitExceeded(f"y = {y} exceeds the brute-force limit {limit}")
    hit = np.zeros(y, dtype=bool)
    for d in _excluded_steps(ys, y):
        hit[::d] = True
    count = y - int(hit.sum())
    bound = ys.g(y) * y
    return SurvivorCount(y, count, int(bound), count <= bound)


def survivor_count_naive(ys: YSystem, y: int, limit: int = 2000) -> int:
    """Literal double loop over ``a`` and ``(y', b)``; a slow oracle for small ``y``."""
    if y > limit:
        raise BruteForceLimitExceeded(f"y = {y} exceeds the naive limit {limit}")
    smaller = [yp for yp in ys.Y if yp < y]
    count = 0
    for a in range(y):
        if not any(a * yp == b * y for yp in smaller for b in range(yp)):
            count += 1
    return count


def survivor_table(ys: YSystem, limit: int = 10**6, workers: int = 1) -> list[SurvivorCount]:
    return pmap(_survivor_job, [(ys, y, limit) for y in ys.Y], workers)


def _survivor_job(args) -> SurvivorCount:
    return survivor_count(*args)


def conjugate(ys: YSystem, y: int, i: int) -> int:
    """Swap the larger prime of pair ``i`` in ``y`` for the smaller one."""
    a, b = ys.pairs[ys.I.index(i)]
    if y % b:
        raise ValueError(f"p_{2 * i} = {b} does not divide {y}")
    return y // b * a
