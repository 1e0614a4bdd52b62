"""Counterexample blocks ``S = X * Y``.

The construction picks a pair-index set ``I`` (giving ``Y``, ``P``, ``g_I``),
a threshold ``x'_min`` with ``2 P f(x'_min y_min) <= delta/2``, the least
admissible ``B`` with ``BP + 1 >= x'_min``, and then walks the progression
``x = 1 mod BP`` from ``x_min = BP + 1`` until the mass
``sum_{q in S} min(1, 2 f(q))`` enters the target window.

Two regimes:

``certificate``
    parameters follow the threshold rules exactly and the union is bounded
    by the exact overlap sum ``2 sum_x sum_y g_I(y) f(xy)``;
``empirical``
    thresholds may be overridden by small values (``EmpiricalOverrides``)
    and the union measure is computed exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

from .errors import (HypothesisViolated, MassUnreachable, PreconditionViolated,
                     UnionTooLarge)
from .functions import ApproxFunction, exact_sum, first_at_most
from .parallel import pmap
from .primes import YSystem, enumerate_Y, find_good_I
from .torus import as_fraction, union_measure

CLIP = Fraction(499, 1000)
DEFAULT_WINDOW = (Fraction(1), Fraction(2))


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    return int(raw) if raw else default


def interval_budget() -> int:
    return _env_int("DSLAB_INTERVAL_BUDGET", 20_000_000)


def term_cap() -> int:
    return _env_int("DSLAB_TERM_CAP", 10_000_000)


def k_max_default() -> int:
    return _env_int("DSLAB_K_MAX", 9)


def workers_default() -> int:
    return _env_int("DSLAB_WORKERS", 1)


def clipped(f: ApproxFunction, q: int) -> Fraction:
    v = f(q)
    return v if v < CLIP else CLIP


def mass_term(f: ApproxFunction, q: int) -> Fraction:
    v = 2 * f(q)
    return v if v < 1 else Fraction(1)


@dataclass(frozen=True)
class EmpiricalOverrides:
    """Small-parameter replacements for the rigorous thresholds.

    ``B`` fixes the progression modulus factor (it must be coprime to ``P``).
    ``x_start`` replaces ``x'_min``; by default the walk starts at the least
    ``x = 1 mod BP`` that keeps ``S`` above ``M``.
    """

    B: int = 1
    x_start: int | None = None


@dataclass(frozen=True)
class Parameters:
    x_prime_min: int
    B: int
    x_min: int
    x_max: int
    mass: Fraction
    terms: int


@dataclass(frozen=True)
class BlockCertificate:
    f: str
    eps: Fraction
    delta: Fraction
    M: Fraction
    mode: str
    I: tuple[int, ...]
    P: int
    Y: tuple[int, ...]
    x_prime_min: int
    B: int
    x_min: int
    x_max: int
    S: tuple[int, ...]
    mass: Fraction
    window: tuple[Fraction, Fraction]
    overlap_sum: Fraction
    union: Fraction | None
    union_status: str
    gamma: Fraction = Fraction(0)
    overrides: EmpiricalOverrides | None = None
    notes: tuple[str, ...] = ()
    checks: dict = field(default_factory=dict, compare=False)

    @property
    def BP(self) -> int:
        return self.B * self.P

    @property
    def y_min(self) -> int:
        return self.Y[0]

    @property
    def X(self) -> range:
        return range(self.x_min, self.x_max + 1, self.BP)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


# ---------------------------------------------------------------------------
# parameter selection
# ---------------------------------------------------------------------------

def _start_above(M: Fraction, y_min: int) -> int:
    x = max(1, -(-M.numerator // M.denominator))
    while x * y_min <= M:
        x += 1
    return x


def walk_progression(f: ApproxFunction, Y: Sequence[int], x_min: int, step: int,
                     window=DEFAULT_WINDOW, cap: int | None = None) -> tuple[int, Fraction, int]:
    """Walk ``x = x_min, x_min + step, ...`` until the mass enters ``window``.

    Returns ``(x_max, mass, terms)``.  Raises :class:`MassUnreachable` when
    the term cap runs out, when a zero term shows the tail has vanished, or
    when a single step jumps over the window.
    """
    lo, hi = window
    cap = term_cap() if cap is None else cap
    mass = Fraction(0)
    terms = 0
    x = x_min
    while True:
        if terms + len(Y) > cap:
            raise MassUnreachable(f"term cap {cap} reached with mass {mass}")
        add = [mass_term(f, x * y) for y in Y]
        terms += len(Y)
        if not any(add):
            raise MassUnreachable(f"f vanishes at {x * Y[0]}; mass stuck at {mass}")
        mass += sum(add, Fraction(0))
        if mass >= lo:
            if mass > hi:
                raise MassUnreachable(f"mass jumped over the window to {mass}")
            return x, mass, terms
        x += step


def choose_parameters(ys: YSystem, delta, f: ApproxFunction, M, *, b_choice: str = "min",
                      window=DEFAULT_WINDOW, cap: int | None = None) -> Parameters:
    """Thresholds ``x'_min``, ``B``, ``x_min = BP + 1`` and ``x_max`` for a block."""
    delta, M = as_fraction(delta), as_fraction(M)
    P, y_min = ys.P, ys.y_min
    start = _start_above(M, y_min)
    try:
        xp = first_at_most(lambda x: 2 * P * f(x * y_min), delta / 2, start)
    except ValueError as exc:
        raise MassUnreachable("f never drops below the threshold") from exc
    if b_choice == "min":
        B = max(1, -(-(xp - 1) // P))
        while gcd(B, P) != 1:
            B += 1
    elif b_choice == "P-1":
        B = P - 1
        if B < 1 or B * P + 1 < xp:
            raise PreconditionViolated(f"B = P - 1 = {B} does not reach x'_min = {xp}")
    else:
        raise ValueError(f"unknown B choice {b_choice!r}")
    x_min = B * P + 1
    x_max, mass, terms = walk_progression(f, ys.Y, x_min, B * P, window, cap)
    return Parameters(xp, B, x_min, x_max, mass, terms)


def empirical_parameters(ys: YSystem, f: ApproxFunction, M, overrides: EmpiricalOverrides,
                         window=DEFAULT_WINDOW, cap: int | None = None) -> Parameters:
    M = as_fraction(M)
    B = overrides.B
    if B < 1 or gcd(B, ys.P) != 1:
        raise PreconditionViolated(f"B = {B} must be a positive integer coprime to P = {ys.P}")
    step = B * ys.P
    xp = overrides.x_start if overrides.x_start is not None else 1
    xp = max(xp, _start_above(M, ys.y_min))
    x_min = xp + (1 - xp) % step
    x_max, mass, terms = walk_progression(f, ys.Y, x_min, step, window, cap)
    return Parameters(xp, B, x_min, x_max, mass, terms)


# ---------------------------------------------------------------------------
# sums and unions
# ---------------------------------------------------------------------------

def _overlap_chunk(args) -> Fraction:
    f, xs, Y, weights = args
    return exact_sum([weights[y] * clipped(f, x * y) for x in xs for y in Y])


def overlap_sum(f: ApproxFunction, X: Sequence[int], ys: YSystem, workers: int = 1) -> Fraction:
    """``2 sum_{x in X} sum_{y in Y} g_I(y) f(xy)`` with ``f`` clipped below 1/2."""
    X = list(X)
    weights = {y: ys.g(y) for y in ys.Y}
    size = max(1, -(-len(X) // max(1, workers)))
    chunks = [(f, X[i:i + size], ys.Y, weights) for i in range(0, len(X), size)]
    return 2 * exact_sum(pmap(_overlap_chunk, chunks, workers, chunksize=1))


def union_measure_exact(S: Iterable[int], f: ApproxFunction, gamma=0, budget: int | None = None,
                        clip: bool = False) -> Fraction:
    """Exact ``lambda(U_{q in S} A_q^gamma(f(q)))``."""
    radius = (lambda q: clipped(f, q)) if clip else f
    items = [(q, radius(q)) for q in S]
    return union_measure(items, gamma, budget=interval_budget() if budget is None else budget)


def arc_count(S: Iterable[int]) -> int:
    S = list(S)
    g = 0
    for q in S:
        g = gcd(g, q)
    return sum(S) // g if S else 0


@dataclass(frozen=True)
class OverlapCheck:
    x: int
    bound: Fraction
    exact: Fraction
    ok: bool
    hypothesis: bool


def overlap_verify(x: int, ys: YSystem, f: ApproxFunction, *, allow_violation: bool = False,
                   budget: int | None = None) -> OverlapCheck:
    """Compare ``lambda(U_y A_{xy}(f(xy)))`` with ``2 sum_y g_I(y) f(xy)``."""
    hyp = gcd(x, ys.P) == 1
    if not hyp and not allow_violation:
        raise HypothesisViolated(f"gcd({x}, {ys.P}) = {gcd(x, ys.P)}")
    vals = {y: f(x * y) for y in ys.Y}
    bound = 2 * exact_sum([ys.g(y) * vals[y] for y in ys.Y])
    exact = union_measure([(x * y, vals[y]) for y in ys.Y],
                          budget=interval_budget() if budget is None else budget)
    return OverlapCheck(x, bound, exact, exact <= bound, hyp)


# ---------------------------------------------------------------------------
# the builder
# ---------------------------------------------------------------------------

MASS_NOTE = ("mass is sum min(1, 2 f(q)) over S; the progression sum of f itself "
             "is half of it whenever f < 1/2")


def build_block(f: ApproxFunction, eps, M, mode: str = "empirical", *, I: Iterable[int] | None = None,
                delta=None, K_max: int | None = None, window=DEFAULT_WINDOW,
                overrides: EmpiricalOverrides | None = None, b_choice: str = "min",
                cap: int | None = None, union_budget: int | None = None,
                compute_union: str | None = None, gamma=0, workers: int | None = None,
                tolerance=None) -> BlockCertificate:
    """Build one counterexample block and its certificate.

    ``tolerance`` is the bound the union is compared against (default ``eps``).
    ``compute_union`` is ``always``, ``auto`` (only within the interval
    budget) or ``never``; empirical mode defaults to ``always``.
    """
    eps, M = as_fraction(eps), as_fraction(M)
    if not 0 < eps < 1:
        raise PreconditionViolated("eps must lie in (0, 1)")
    if mode not in ("certificate", "empirical"):
        raise ValueError(f"unknown mode {mode!r}")
    window = (as_fraction(window[0]), as_fraction(window[1]))
    delta = eps / 12 if delta is None else as_fraction(delta)
    tolerance = eps if tolerance is None else as_fraction(tolerance)
    workers = workers_default() if workers is None else workers
    budget = interval_budget() if union_budget is None else union_budget
    if compute_union is None:
        compute_union = "always" if mode == "empirical" else "never"
    if I is None:
        if mode == "empirical":
            raise PreconditionViolated("empirical mode needs an explicit index set")
        I, _ = find_good_I(delta, k_max_default() if K_max is None else K_max)
    ys = enumerate_Y(I)
    if mode == "empirical":
        params = empirical_parameters(ys, f, M, overrides or EmpiricalOverrides(), window, cap)
    else:
        params = choose_parameters(ys, delta, f, M, b_choice=b_choice, window=window, cap=cap)
    BP = params.B * ys.P
    X = range(params.x_min, params.x_max + 1, BP)
    S = tuple(sorted(x * y for x in X for y in ys.Y))
    ov = overlap_sum(f, X, ys, workers)

    union, status = None, "skipped"
    if compute_union != "never":
        size = arc_count(S)
        if size <= budget:
            union = union_measure_exact(S, f, gamma, budget, clip=True)
            status = "computed"
        elif compute_union == "always":
            raise UnionTooLarge(f"{size} arcs exceed the interval budget {budget}")

    checks = {
        "S_above_M": S[0] > M,
        "factorization_unique": len(set(S)) == len(X) * len(ys.Y),
        "mass_in_window": window[0] <= params.mass <= window[1],
    }
    if mode == "certificate":
        checks["overlap_below_tolerance"] = ov < tolerance
    if union is not None:
        checks["union_le_overlap"] = union <= ov
    cert = BlockCertificate(
        f=f.spec, eps=eps, delta=delta, M=M, mode=mode, I=ys.I, P=ys.P, Y=ys.Y,
        x_prime_min=params.x_prime_min, B=params.B, x_min=params.x_min, x_max=params.x_max,
        S=S, mass=params.mass, window=window, overlap_sum=ov, union=union, union_status=status,
        gamma=as_fraction(gamma), overrides=overrides if mode == "empirical" else None,
        notes=(MASS_NOTE,), checks=checks)
    return cert


def union_below(cert: BlockCertificate, tolerance=None) -> bool | None:
    """Whether the exact union beats ``tolerance`` (``None`` when it was not computed)."""
    if cert.union is None:
        return None
    return cert.union < (cert.eps if tolerance is None else as_fraction(tolerance))
