"""Approximation functions and the Khintchine / Koukoulopoulos-Maynard series.

Rational families (``inv_bits``, scalings, ``power``) evaluate exactly.  The
iterated-log family ``fk:k`` has irrational values, so it is evaluated as a
certified dyadic upper bound computed with outward-rounded interval
arithmetic.  Iterated logarithms use ``max(1, log x)`` with the natural log.

Function specifications parse from compact text::

    inv_bits               1 / bit_length(q)
    scaled:<base>:<c>      c * base(q), c a positive rational
    power:<c>:<s>          c / q**s, s a positive integer
    fk:<k>                 1 / (q log q log log q ... log^(k) q)
    invphi                 1 / phi(q)       (not monotone; series only)
    const:<c>              the constant c
    cutoff:<N>:<base>      base(q) for q <= N, then 0
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import numpy as np
from mpmath import iv
from mpmath.libmp import to_rational
from sympy import factorint

from .errors import HypothesisViolated, PrecisionExhausted, UnsupportedInput
from .torus import as_fraction, format_rational, parse_rational

ZERO = Fraction(0)


class ApproxFunction:
    """A rational-valued approximation function ``q -> f(q)``.

    Subclasses implement :meth:`value`.  Calling the object validates ``q``
    and watches adjacent queried pairs for a monotonicity violation.
    """

    non_increasing = True
    limit_zero = True
    divergent = True
    exact = True

    _WATCH = 1 << 16

    def __init__(self):
        self._seen: dict[int, Fraction] = {}

    @property
    def spec(self) -> str:
        raise NotImplementedError

    def value(self, q: int) -> Fraction:
        raise NotImplementedError

    def __call__(self, q: int) -> Fraction:
        if q < 1:
            raise ValueError(f"approximation functions are defined for q >= 1, got {q}")
        v = self.value(q)
        if self.non_increasing:
            self._watch(q, v)
        return v

    def _watch(self, q, v):
        seen = self._seen
        left, right = seen.get(q - 1), seen.get(q + 1)
        if (left is not None and v > left) or (right is not None and right > v):
            raise HypothesisViolated(f"{self.spec} increases near q={q}")
        if len(seen) >= self._WATCH:
            seen.clear()
        seen[q] = v

    def eval_many(self, qs: Iterable[int]) -> list[Fraction]:
        """Values at ``qs`` (any order) after a running-minimum pass in increasing q."""
        qs = list(qs)
        order = sorted(range(len(qs)), key=qs.__getitem__)
        out: list[Fraction] = [ZERO] * len(qs)
        cur = None
        for i in order:
            v = self(qs[i])
            if cur is not None and v > cur:
                v = cur
            out[i] = cur = v
        return out

    def __repr__(self):
        return f"<ApproxFunction {self.spec}>"

    def __eq__(self, other):
        return isinstance(other, ApproxFunction) and self.spec == other.spec

    def __hash__(self):
        return hash(self.spec)

    def __reduce__(self):
        return parse_function, (self.spec,)


class InvBits(ApproxFunction):
    @property
    def spec(self):
        return "inv_bits"

    def value(self, q):
        return Fraction(1, q.bit_length())


class Scaled(ApproxFunction):
    def __init__(self, base: ApproxFunction, c):
        super().__init__()
        c = as_fraction(c)
        if c <= 0:
            raise ValueError("scale factor must be positive")
        self.base, self.c = base, c
        self.exact = base.exact
        self.non_increasing = base.non_increasing
        self.limit_zero = base.limit_zero
        self.divergent = base.divergent

    @property
    def spec(self):
        return f"scaled:{self.base.spec}:{format_rational(self.c)}"

    def value(self, q):
        return self.c * self.base.value(q)


class Power(ApproxFunction):
    def __init__(self, c, s: int = 1):
        super().__init__()
        c = as_fraction(c)
        if c <= 0 or int(s) != s or s < 1:
            raise ValueError("power family needs c > 0 and a positive integer exponent")
        self.c, self.s = c, int(s)
        self.divergent = self.s == 1

    @property
    def spec(self):
        return f"power:{format_rational(self.c)}:{self.s}"

    def value(self, q):
        return self.c / q ** self.s


class Constant(ApproxFunction):
    limit_zero = False

    def __init__(self, c):
        super().__init__()
        self.c = as_fraction(c)
        if self.c < 0:
            raise ValueError("constant must be non-negative")

    @property
    def spec(self):
        return f"const:{format_rational(self.c)}"

    def value(self, q):
        return self.c


class Cutoff(ApproxFunction):
    """``base`` up to ``N`` and identically zero afterwards (a convergent family)."""

    divergent = False

    def __init__(self, N: int, base: ApproxFunction):
        super().__init__()
        self.N, self.base = int(N), base

    @property
    def spec(self):
        return f"cutoff:{self.N}:{self.base.spec}"

    def value(self, q):
        return self.base.value(q) if q <= self.N else ZERO


class InvPhi(ApproxFunction):
    non_increasing = False

    @property
    def spec(self):
        return "invphi"

    def value(self, q):
        return Fraction(1, euler_phi(q))


def _max1(x):
    lo, hi = x.a, x.b
    if lo >= 1:
        return x
    if hi <= 1:
        return iv.mpf(1)
    return iv.mpf([1, hi])


def _endpoints(x) -> tuple[Fraction, Fraction]:
    lo, hi = x._mpi_
    return Fraction(*to_rational(lo)), Fraction(*to_rational(hi))


class IteratedLog(ApproxFunction):
    """``f_k(q) = 1 / (q log q ... log^(k) q)`` as a certified dyadic upper bound.

    The working precision grows with the size of ``q`` so that the rounding
    error stays far below the gap ``f_k(q) - f_k(q+1)``; the returned upper
    endpoints are therefore non-increasing in ``q`` on their own, and
    :meth:`eval_many` adds a running minimum as a safety net.
    """

    def __init__(self, k: int):
        super().__init__()
        if k < 0:
            raise ValueError("k must be non-negative")
        self.k = int(k)
        self.exact = self.k == 0

    @property
    def spec(self):
        return f"fk:{self.k}"

    def precision(self, q: int) -> int:
        return max(80, 2 * q.bit_length() + 80)

    def enclose(self, q: int, prec: int | None = None) -> tuple[Fraction, Fraction]:
        """Dyadic ``(lo, hi)`` with ``lo <= f_k(q) <= hi``."""
        if self.k == 0:
            v = Fraction(1, q)
            return v, v
        old = iv.prec
        iv.prec = prec or self.precision(q)
        try:
            x = iv.mpf(q)
            t, denom = x, x
            for _ in range(self.k):
                t = _max1(iv.log(t))
                denom = denom * t
            lo, hi = _endpoints(1 / denom)
        finally:
            iv.prec = old
        if not lo <= hi:
            raise PrecisionExhausted(f"empty enclosure for {self.spec} at q={q}")
        return lo, hi

    def value(self, q):
        return self.enclose(q)[1]


_SIMPLE = {"inv_bits": InvBits, "invphi": InvPhi}


def parse_function(text: str) -> ApproxFunction:
    """Parse a compact function specification (see the module docstring)."""
    text = text.strip()
    if text in _SIMPLE:
        return _SIMPLE[text]()
    head, _, rest = text.partition(":")
    try:
        if head == "scaled":
            base, _, c = rest.rpartition(":")
            return Scaled(parse_function(base), parse_rational(c))
        if head == "power":
            c, _, s = rest.partition(":")
            return Power(parse_rational(c), int(s))
        if head == "fk":
            return IteratedLog(int(rest))
        if head == "const":
            return Constant(parse_rational(rest))
        if head == "cutoff":
            n, _, base = rest.partition(":")
            return Cutoff(int(n), parse_function(base))
    except (ValueError, ZeroDivisionError) as exc:
        raise UnsupportedInput(f"bad function spec {text!r}: {exc}") from exc
    raise UnsupportedInput(f"unknown function spec {text!r}")


def first_at_most(f: Callable[[int], Fraction], target: Fraction, start: int = 1) -> int:
    """Least ``x >= start`` with ``f(x) <= target`` for non-increasing ``f``.

    Doubling then bisection.  Raises ``ValueError`` if doubling passes 2**4096.
    """
    if f(start) <= target:
        return start
    lo, step = start, 1
    while True:
        hi = start + step
        if f(hi) <= target:
            break
        lo = hi
        step *= 2
        if step.bit_length() > 4096:
            raise ValueError("threshold not reached")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if f(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# totients and exact series
# ---------------------------------------------------------------------------

def euler_phi(n: int) -> int:
    if n < 1:
        raise ValueError("phi is defined for n >= 1")
    out = n
    for p in factorint(n):
        out = out // p * (p - 1)
    return out


def totient_table(n: int) -> np.ndarray:
    """``phi(0..n)`` by a sieve (``phi(0)`` is stored as 0)."""
    phi = np.arange(n + 1, dtype=np.int64)
    for p in prime_sieve(n):
        phi[p::p] -= phi[p::p] // p
    return phi


def prime_sieve(n: int) -> np.ndarray:
    """All primes ``<= n`` (Eratosthenes on a boolean array)."""
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    flags = np.ones(n + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, int(n**0.5) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return np.flatnonzero(flags)


def exact_sum(terms: list[Fraction]) -> Fraction:
    """Sum of Fractions by binary splitting, which keeps denominators balanced."""
    if not terms:
        return ZERO
    layer = list(terms)
    while len(layer) > 1:
        nxt = [layer[i] + layer[i + 1] for i in range(0, len(layer) - 1, 2)]
        if len(layer) % 2:
            nxt.append(layer[-1])
        layer = nxt
    return layer[0]


@dataclass(frozen=True)
class SeriesReport:
    Q: int
    total: Fraction
    kind: str  # "plain" or "phi-weighted"


Psi = ApproxFunction | Mapping[int, Fraction] | Callable[[int], Fraction]


def _support(psi: Psi, Q: int):
    if isinstance(psi, Mapping):
        return sorted((q, as_fraction(v)) for q, v in psi.items() if 1 <= q <= Q)
    return [(q, psi(q)) for q in range(1, Q + 1)]


def khintchine_partial(psi: Psi, Q: int) -> SeriesReport:
    """Exact ``sum_{q <= Q} psi(q)``; ``psi`` may be a function or a sparse map."""
    if Q < 0:
        raise ValueError("Q must be non-negative")
    return SeriesReport(Q, exact_sum([v for _, v in _support(psi, Q)]), "plain")


def km_partial(psi: Psi, Q: int) -> SeriesReport:
    """Exact ``sum_{q <= Q} phi(q) psi(q) / q``."""
    if Q < 0:
        raise ValueError("Q must be non-negative")
    supp = _support(psi, Q)
    if not isinstance(psi, Mapping) and Q <= 10**7:
        table = totient_table(Q)
        terms = [v * int(table[q]) / q for q, v in supp]
    else:
        terms = [v * euler_phi(q) / q for q, v in supp]
    return SeriesReport(Q, exact_sum(terms), "phi-weighted")


@dataclass(frozen=True)
class KMDensityCheck:
    Q: int
    eps: Fraction
    density: Fraction
    weighted_sum: Fraction
    harmonic_tail: Fraction
    dominates: bool
    ok: bool


def km_density_check(f: ApproxFunction, S: Iterable[int], Q: int, eps) -> KMDensityCheck:
    """Lower bound for the phi-weighted series of ``f`` restricted to a dense ``S``.

    When ``f(q) >= 1/phi(q)`` on ``S`` and ``S`` fills a ``1 - eps`` share of
    ``[1, Q]``, the weighted sum is at least ``sum_{eps Q < q <= Q} 1/q``.
    ``ok`` reports whether that lower bound holds on this instance.
    """
    eps = as_fraction(eps)
    members = sorted({q for q in S if 1 <= q <= Q})
    table = totient_table(Q)
    weighted = exact_sum([f(q) * int(table[q]) / q for q in members])
    dominates = all(f(q) * int(table[q]) >= 1 for q in members)
    start = int(eps * Q)  # q > eps*Q  <=>  q >= floor(eps*Q) + 1
    tail = exact_sum([Fraction(1, q) for q in range(start + 1, Q + 1)])
    density = Fraction(len(members), Q) if Q else ZERO
    return KMDensityCheck(Q, eps, density, weighted, tail, dominates, weighted >= tail)
