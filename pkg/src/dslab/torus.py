"""Exact arc unions on the circle [0, 1).

Everything here is exact: endpoints are :class:`fractions.Fraction` values and
no floating point is ever touched.  Arcs are half-open ``[lo, hi)``; the
mathematical sets are open arcs, and the two conventions differ only on a
finite set of endpoints, which never changes a measure or a
subset-of-union test.  Arcs that cross 0 are split there, so a set is a
totally ordered sequence of components.

Two union routes exist and are kept separate on purpose:

* :func:`normalize` sorts and merges explicit ``Fraction`` intervals.  It is
  simple and is the reference route for small inputs.
* :func:`union_measure` / :func:`union_set` handle unions of many
  approximation sets ``A_m^gamma(eps)`` by putting every endpoint over one
  common denominator and sweeping integers.  Large inputs are merged as a
  stream of per-modulus sorted runs so peak memory stays bounded.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction
from math import floor, gcd, lcm
from numbers import Rational
from typing import Iterable, Iterator, Sequence

from .errors import UnionTooLarge

ZERO = Fraction(0)
ONE = Fraction(1)
HALF = Fraction(1, 2)

#: above this many arcs :func:`union_measure` switches to the streaming merge
STREAM_THRESHOLD = 2_000_000


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions and ``"num/den"`` strings; floats are rejected."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return parse_rational(value)
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


def parse_rational(text: str) -> Fraction:
    text = text.strip()
    if not text or any(c in text for c in ".eE"):
        raise ValueError(f"not an exact rational: {text!r}")
    return Fraction(text)


def format_rational(x: Fraction) -> str:
    """Canonical ``num/den`` text (the denominator is always written)."""
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def frac_part(x: Fraction) -> Fraction:
    return x - floor(x)


def circle_norm(x: Fraction) -> Fraction:
    """Distance from ``x`` to the nearest integer."""
    r = frac_part(x)
    return min(r, 1 - r)


@dataclass(frozen=True)
class TorusIntervalSet:
    """A finite union of half-open arcs of [0, 1) in canonical form.

    ``components`` is sorted, pairwise disjoint and maximal (touching
    components are merged), so two equal sets always have identical
    component tuples.
    """

    components: tuple[tuple[Fraction, Fraction], ...] = ()

    def __post_init__(self):
        prev_hi = None
        for lo, hi in self.components:
            if not (0 <= lo < hi <= 1):
                raise ValueError(f"bad component [{lo}, {hi})")
            if prev_hi is not None and lo <= prev_hi:
                raise ValueError("components must be sorted, disjoint and maximal")
            prev_hi = hi

    @classmethod
    def empty(cls) -> TorusIntervalSet:
        return cls(())

    @classmethod
    def full(cls) -> TorusIntervalSet:
        return cls(((ZERO, ONE),))

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def measure(self) -> Fraction:
        return sum((hi - lo for lo, hi in self.components), ZERO)

    def is_full(self) -> bool:
        return self.components == ((ZERO, ONE),)

    def __contains__(self, point) -> bool:
        x = frac_part(as_fraction(point))
        lo_list = [lo for lo, _ in self.components]
        k = _bisect_right(lo_list, x) - 1
        return k >= 0 and x < self.components[k][1]

    def union(self, other: TorusIntervalSet) -> TorusIntervalSet:
        merged = heapq.merge(self.components, other.components)
        return TorusIntervalSet(tuple(_merge_sorted(merged)))

    def issubset(self, other: TorusIntervalSet) -> bool:
        theirs = other.components
        k = 0
        for lo, hi in self.components:
            while k < len(theirs) and theirs[k][1] <= lo:
                k += 1
            if k == len(theirs) or not (theirs[k][0] <= lo and hi <= theirs[k][1]):
                return False
        return True

    def to_text(self) -> str:
        return "".join(f"{format_rational(lo)} {format_rational(hi)}\n" for lo, hi in self.components)

    @classmethod
    def from_text(cls, text: str) -> TorusIntervalSet:
        comps = []
        for line in text.splitlines():
            if line.strip():
                lo, hi = line.split()
                comps.append((parse_rational(lo), parse_rational(hi)))
        return cls(tuple(comps))


def _bisect_right(seq, x) -> int:
    lo, hi = 0, len(seq)
    while lo < hi:
        mid = (lo + hi) // 2
        if x < seq[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def _merge_sorted(pieces: Iterable[tuple]) -> Iterator[tuple]:
    cur_lo = cur_hi = None
    for lo, hi in pieces:
        if cur_hi is None:
            cur_lo, cur_hi = lo, hi
        elif lo > cur_hi:
            yield cur_lo, cur_hi
            cur_lo, cur_hi = lo, hi
        elif hi > cur_hi:
            cur_hi = hi
    if cur_hi is not None:
        yield cur_lo, cur_hi


@dataclass(frozen=True)
class CenteredArcFamily:
    """Arcs given as ``(center, radius)``; a radius of 1/2 or more covers the circle."""

    arcs: tuple[tuple[Fraction, Fraction], ...] = ()

    @classmethod
    def of(cls, arcs: Iterable[tuple]) -> CenteredArcFamily:
        out = []
        for c, r in arcs:
            c, r = as_fraction(c), as_fraction(r)
            if r < 0:
                raise ValueError("radius must be non-negative")
            out.append((c, r))
        return cls(tuple(out))

    def raw_intervals(self) -> list[tuple[Fraction, Fraction]]:
        return [(c - r, c + r) for c, r in self.arcs]

    def materialize(self) -> TorusIntervalSet:
        return normalize(self)


def dilate(family: CenteredArcFamily, b: int) -> CenteredArcFamily:
    """Concentric dilation: every radius is multiplied by ``b``."""
    if b < 1:
        raise ValueError("dilation factor must be >= 1")
    return CenteredArcFamily(tuple((c, r * b) for c, r in family.arcs))


def normalize(arcs) -> TorusIntervalSet:
    """Canonical form of a centered family or a list of raw ``(lo, hi)`` intervals.

    Raw intervals may sit anywhere on the real line and may wrap past 1; an
    interval of length at least 1 is the whole circle.
    """
    raw = arcs.raw_intervals() if isinstance(arcs, CenteredArcFamily) else arcs
    pieces = []
    for lo, hi in raw:
        lo, hi = as_fraction(lo), as_fraction(hi)
        width = hi - lo
        if width <= 0:
            continue
        if width >= 1:
            return TorusIntervalSet.full()
        start = frac_part(lo)
        end = start + width
        if end <= 1:
            pieces.append((start, end))
        else:
            pieces.append((start, ONE))
            pieces.append((ZERO, end - 1))
    pieces.sort()
    return TorusIntervalSet(tuple(_merge_sorted(pieces)))


def measure(s: TorusIntervalSet) -> Fraction:
    return s.measure()


def subset(a: TorusIntervalSet, b: TorusIntervalSet) -> bool:
    return a.issubset(b)


def approx_set(q: int, gamma=0, eps=0) -> TorusIntervalSet:
    """``{alpha : ||q alpha - gamma|| < eps}`` as a canonical arc set."""
    if q < 1:
        raise ValueError("q must be a positive integer")
    gamma, eps = as_fraction(gamma), as_fraction(eps)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0:
        return TorusIntervalSet.empty()
    if 2 * eps >= 1:
        return TorusIntervalSet.full()
    return union_set([(q, eps)], gamma)


# ---------------------------------------------------------------------------
# integer sweep over a common denominator
# ---------------------------------------------------------------------------

def reduce_common_factor(items: Sequence[tuple[int, Fraction]]) -> tuple[int, list[tuple[int, Fraction]]]:
    """Divide every modulus by their gcd.

    ``A_{gm}^gamma(eps)`` is the preimage of ``A_m^gamma(eps)`` under the
    measure-preserving map ``alpha -> g alpha mod 1``, so the union measure is
    unchanged.  Only measures survive this reduction, not the sets.
    """
    g = 0
    for m, _ in items:
        g = gcd(g, m)
    if g <= 1:
        return 1, list(items)
    return g, [(m // g, e) for m, e in items]


class _Layout:
    """Integer encoding of the arcs of several approximation sets."""

    def __init__(self, items: Sequence[tuple[int, Fraction]], gamma: Fraction):
        self.gamma = frac_part(gamma)
        self.items = [(m, e) for m, e in items if e > 0]
        gd = self.gamma.denominator
        den = 1
        for m, e in self.items:
            den = lcm(den, m * lcm(gd, e.denominator))
        self.D = den

    def arc_count(self) -> int:
        return sum(m for m, _ in self.items)

    def _params(self, m: int, e: Fraction):
        g = self.gamma
        d = lcm(g.denominator, e.denominator)
        gn = g.numerator * (d // g.denominator)
        en = e.numerator * (d // e.denominator)
        s = self.D // (m * d)
        return (gn - en) * s, (gn + en) * s, self.D // m

    def run(self, m: int, e: Fraction) -> list[tuple[int, int]]:
        """Sorted pieces of ``A_m^gamma(e)`` scaled by ``D``, split at 0."""
        lo0, hi0, step = self._params(m, e)
        D = self.D
        out = []
        last_hi = hi0 + (m - 1) * step
        if last_hi > D:
            out.append((0, last_hi - D))
        if m == 1:
            out.append((max(lo0, 0), min(hi0, D)))
        else:
            out.append((max(lo0, 0), hi0))
            out.extend((lo0 + a * step, hi0 + a * step) for a in range(1, m - 1))
            out.append((lo0 + (m - 1) * step, min(last_hi, D)))
        if lo0 < 0:
            out.append((lo0 + D, D))
        return out

    def stream(self, m: int, e: Fraction) -> Iterator[tuple[int, int]]:
        lo0, hi0, step = self._params(m, e)
        D = self.D
        last_hi = hi0 + (m - 1) * step
        if last_hi > D:
            yield 0, last_hi - D
        lo, hi = lo0, hi0
        for _ in range(m):
            a, b = max(lo, 0), min(hi, D)
            if b > a:
                yield a, b
            lo += step
            hi += step
        if lo0 < 0:
            yield lo0 + D, D

    def pieces(self, streaming: bool) -> Iterable[tuple[int, int]]:
        if streaming:
            return heapq.merge(*(self.stream(m, e) for m, e in self.items))
        allp: list[tuple[int, int]] = []
        for m, e in self.items:
            allp.extend(self.run(m, e))
        allp.sort()
        return allp


def _prepare(items, gamma, reduce: bool, budget):
    items = [(int(m), as_fraction(e)) for m, e in items]
    for m, e in items:
        if m < 1:
            raise ValueError("moduli must be positive")
        if e < 0:
            raise ValueError("radii must be non-negative")
    if reduce:
        _, items = reduce_common_factor(items)
    if any(2 * e >= 1 for _, e in items):
        return None
    layout = _Layout(items, as_fraction(gamma))
    if budget is not None and layout.arc_count() > budget:
        raise UnionTooLarge(f"{layout.arc_count()} arcs exceed the interval budget {budget}")
    return layout


def union_measure(items: Iterable[tuple[int, object]], gamma=0, *, reduce: bool = True,
                  budget: int | None = None, streaming: bool | None = None) -> Fraction:
    """Exact measure of ``U A_m^gamma(eps)`` over ``(m, eps)`` pairs."""
    layout = _prepare(items, gamma, reduce, budget)
    if layout is None:
        return ONE
    if not layout.items:
        return ZERO
    if streaming is None:
        streaming = layout.arc_count() > STREAM_THRESHOLD
    total = 0
    for lo, hi in _merge_sorted(layout.pieces(streaming)):
        total += hi - lo
    return Fraction(total, layout.D)


def union_set(items: Iterable[tuple[int, object]], gamma=0, *, budget: int | None = None,
              streaming: bool = False) -> TorusIntervalSet:
    """The canonical arc set ``U A_m^gamma(eps)`` (no modulus reduction)."""
    layout = _prepare(items, gamma, False, budget)
    if layout is None:
        return TorusIntervalSet.full()
    D = layout.D
    comps = tuple((Fraction(lo, D), Fraction(hi, D)) for lo, hi in _merge_sorted(layout.pieces(streaming)))
    return TorusIntervalSet(comps)
