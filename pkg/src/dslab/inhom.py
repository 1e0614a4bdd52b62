"""Inhomogeneous blocks, gamma-windows, the nested window tower and wild thresholds.

A window ``(b, delta)`` is the closed set ``U_j [(j - delta)/b, (j + delta)/b]``,
i.e. ``{gamma : ||b gamma|| <= delta}``.  Its half-width ``delta / b`` is
written ``w`` below.

An inhomogeneous block is a homogeneous block built for ``2f``; it then works
for every shift ``gamma`` in the window ``(b, b f(max S))``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from math import floor, prod
from typing import Iterable, Sequence

from .blocks import (BlockCertificate, EmpiricalOverrides, arc_count, build_block,
                     interval_budget, workers_default)
from .errors import (EmptyTable, GammaOutsideWindow, HypothesisViolated, InvalidModulus,
                     NestingUnreachable, PreconditionViolated, UnsupportedInput)
from .functions import ApproxFunction, IteratedLog, Scaled, exact_sum
from .parallel import pmap
from .primes import table_for
from .torus import (approx_set, as_fraction, circle_norm, frac_part, subset,
                    union_measure)

HALF = Fraction(1, 2)
INHOM_WINDOW = (Fraction(2), Fraction(4))


@dataclass(frozen=True)
class GammaWindow:
    b: int
    delta: Fraction

    def __post_init__(self):
        if self.b < 1:
            raise InvalidModulus(f"window modulus must be positive, got {self.b}")
        if self.delta < 0:
            raise ValueError("window radius must be non-negative")

    @property
    def half_width(self) -> Fraction:
        return self.delta / self.b

    def __contains__(self, gamma) -> bool:
        return circle_norm(self.b * as_fraction(gamma)) <= self.delta

    def interval(self, j: int) -> tuple[Fraction, Fraction]:
        return Fraction(j - self.delta, self.b), Fraction(j + self.delta, self.b)


def inclusion_holds(q: int, b: int, gamma, eps) -> bool:
    """Exact test of ``A_q^gamma(eps) <= A_{bq}(2 b eps)`` under ``||b gamma|| <= b eps``."""
    gamma, eps = as_fraction(gamma), as_fraction(eps)
    if b < 1:
        raise InvalidModulus(f"b must be positive, got {b}")
    if circle_norm(b * gamma) > b * eps:
        raise PreconditionViolated(f"||{b} * {gamma}|| exceeds {b * eps}")
    return subset(approx_set(q, gamma, eps), approx_set(b * q, 0, 2 * b * eps))


@dataclass(frozen=True)
class GammaSample:
    gamma: Fraction
    measure: Fraction
    ok: bool


@dataclass(frozen=True)
class InhomBlockCertificate:
    f: str
    eps: Fraction
    b: int
    block: BlockCertificate
    delta: Fraction
    sum_f: Fraction
    union_2f: Fraction | None
    union_2bf: Fraction | None
    union_bq: Fraction | None
    samples: tuple[GammaSample, ...] = ()
    checks: dict = field(default_factory=dict, compare=False)

    @property
    def window(self) -> GammaWindow:
        return GammaWindow(self.b, self.delta)

    @property
    def S(self) -> tuple[int, ...]:
        return self.block.S

    @property
    def ok(self) -> bool:
        return all(self.checks.values()) and all(s.ok for s in self.samples)


def _check_below_half(f: ApproxFunction, M: Fraction):
    first = floor(M) + 1
    if f(first) >= HALF:
        raise HypothesisViolated(f"f({first}) = {f(first)} is not below 1/2")


def build_inhom_block(f: ApproxFunction, eps, M, b: int, mode: str = "empirical", *,
                      I: Iterable[int] | None = None, overrides: EmpiricalOverrides | None = None,
                      dilation: str = "auto", union_budget: int | None = None,
                      workers: int | None = None, **kw) -> InhomBlockCertificate:
    """Block for ``2f`` with tolerance ``eps / b``, its window and dilation chain.

    ``dilation`` is ``always``, ``auto`` or ``never`` and controls the exact
    computation of the three unions ``A_q(2f)``, ``A_q(2bf)`` and ``A_{bq}(2bf)``.
    """
    eps, M = as_fraction(eps), as_fraction(M)
    if not isinstance(b, int) or b < 1:
        raise InvalidModulus(f"b must be a positive integer, got {b!r}")
    if not 0 < eps < 1:
        raise PreconditionViolated("eps must lie in (0, 1)")
    _check_below_half(f, M)
    budget = interval_budget() if union_budget is None else union_budget
    g = Scaled(f, 2)
    block = build_block(g, eps / b, M, mode, I=I, overrides=overrides, window=INHOM_WINDOW,
                        union_budget=budget, compute_union="never", workers=workers, **kw)
    S = block.S
    sum_f = exact_sum([f(q) for q in S])
    delta = b * f(S[-1])

    u2f = u2bf = ubq = None
    if dilation != "never":
        n = arc_count(S)
        if n <= budget:
            u2f = union_measure([(q, 2 * f(q)) for q in S], budget=budget)
            u2bf = union_measure([(q, 2 * b * f(q)) for q in S], budget=budget)
        elif dilation == "always":
            u2f = union_measure([(q, 2 * f(q)) for q in S], budget=budget)
        if b * sum(S) <= budget:
            ubq = union_measure([(b * q, 2 * b * f(q)) for q in S], reduce=False, budget=budget)
    checks = dict(block.checks)
    checks["sum_f_in_window"] = HALF <= sum_f <= 1
    if u2f is not None and u2bf is not None:
        checks["dilation_bound"] = u2bf <= b * u2f
    if ubq is not None and u2bf is not None:
        checks["rescaling_preserves_measure"] = ubq == u2bf
    return InhomBlockCertificate(f.spec, eps, b, block, delta, sum_f, u2f, u2bf, ubq, (), checks)


def _sample_measure(args) -> GammaSample:
    items, gamma, eps, budget = args
    m = union_measure(items, gamma, budget=budget)
    return GammaSample(gamma, m, m < eps)


def verify_inhom_block(cert: InhomBlockCertificate, gammas: Iterable, f: ApproxFunction, *,
                       workers: int | None = None, budget: int | None = None) -> InhomBlockCertificate:
    """Exact ``lambda(U_{q in S} A_q^gamma(f(q)))`` for each window sample ``gamma``."""
    window = cert.window
    gammas = [frac_part(as_fraction(g)) for g in gammas]
    for g in gammas:
        if g not in window:
            raise GammaOutsideWindow(f"{g} lies outside the window (b={window.b}, delta={window.delta})")
    budget = interval_budget() if budget is None else budget
    items = [(q, f(q)) for q in cert.S]
    jobs = [(items, g, cert.eps, budget) for g in gammas]
    workers = workers_default() if workers is None else workers
    samples = pmap(_sample_measure, jobs, workers)
    return InhomBlockCertificate(cert.f, cert.eps, cert.b, cert.block, cert.delta, cert.sum_f,
                                 cert.union_2f, cert.union_2bf, cert.union_bq,
                                 cert.samples + tuple(samples), cert.checks)


def window_samples(window: GammaWindow, per_interval: int = 50) -> list[Fraction]:
    """Centers, both closed edges and an interior grid of every window interval, reduced mod 1."""
    b, d = window.b, window.delta
    pts = set()
    for j in range(b):
        pts.add(Fraction(j, b))
        if d > 0:
            for t in range(-per_interval, per_interval + 1):
                pts.add(frac_part(Fraction(j, b) + d * Fraction(t, per_interval) / b))
    return sorted(pts)


# ---------------------------------------------------------------------------
# tower
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TowerLevel:
    k: int
    G: int
    b: int
    delta: Fraction
    eps: Fraction
    S_min: int
    S_max: int
    S_size: int
    nested_count: int
    nesting_ok: bool
    cert: InhomBlockCertificate = field(compare=False, repr=False)

    @property
    def half_width(self) -> Fraction:
        return self.delta / self.b

    @property
    def window(self) -> GammaWindow:
        return GammaWindow(self.b, self.delta)


def nested_count(outer: GammaWindow, inner: GammaWindow) -> int:
    """Number of inner window intervals inside the outer interval around 0.

    Requires ``outer.b | inner.b``; then the picture repeats with period
    ``1/outer.b`` and the interval around 0 covers the fundamental domain.
    The count comes from a closed form and is confirmed by exact
    containment tests on the extreme intervals and their outside neighbours.
    """
    if inner.b % outer.b:
        raise ValueError("inner modulus must be a multiple of the outer one")
    W, w = outer.half_width, inner.half_width
    if W < w:
        return 0
    J = floor((W - w) * inner.b)

    def inside(j):
        lo, hi = inner.interval(j)
        return -W <= lo and hi <= W

    assert inside(J) and inside(-J) and not inside(J + 1) and not inside(-J - 1)
    return 2 * J + 1


def primorial(k: int) -> int:
    t = table_for(n_pairs=k)
    return prod(t.p(i) for i in range(1, k + 1))


@dataclass(frozen=True)
class TowerWitnesses:
    count: int
    digest: str
    chain: tuple[Fraction, ...]
    chain_contained: tuple[bool, ...]
    members_ok: bool


@dataclass(frozen=True)
class Tower:
    f: str
    levels: tuple[TowerLevel, ...]
    witnesses: TowerWitnesses

    @property
    def ok(self) -> bool:
        return (all(tower_invariants(self.levels).values())
                and self.witnesses.members_ok and all(self.witnesses.chain_contained))


def tower_invariants(levels: Sequence[TowerLevel]) -> dict:
    """Structural checks between consecutive levels."""
    out = {}
    for prev, cur in zip(levels, levels[1:]):
        out[f"G_increases.{cur.k}"] = cur.G > prev.G
        out[f"b_divides.{cur.k}"] = cur.b % prev.b == 0
        out[f"blocks_ordered.{cur.k}"] = cur.S_min > prev.S_max
        out[f"nested.{cur.k}"] = cur.nesting_ok
    return out


def _seed_G(base: int, w_prev: Fraction, floor_G: int) -> int:
    G = floor_G
    while base**G * w_prev < 1:
        G += 1
    return G


def build_tower(f: ApproxFunction, levels: int, mode: str = "empirical", *,
                I: Iterable[int] | None = None, overrides: EmpiricalOverrides | None = None,
                G_budget: int = 64, eps_schedule: Sequence | None = None,
                witness_limit: int = 2_000_000, **kw) -> Tower:
    """Nested windows with ``b_k = (p_1 ... p_k)^{G_k}`` and blocks above each other."""
    if levels < 1:
        raise ValueError("levels must be at least 1")
    eps_schedule = list(eps_schedule) if eps_schedule else [Fraction(1, 2**k) for k in range(1, levels + 1)]
    out: list[TowerLevel] = []
    M = Fraction(1)
    G_prev = 0
    for k in range(1, levels + 1):
        base = primorial(k)
        eps = as_fraction(eps_schedule[k - 1])
        G = G_prev + 1 if k == 1 else _seed_G(base, out[-1].half_width, G_prev + 1)
        cert = None
        for _ in range(G_budget):
            b = base**G
            if cert is None or mode == "certificate":
                cert = build_inhom_block(f, eps, M, b, mode, I=I, overrides=overrides,
                                         dilation="auto", **kw)
            else:
                # empirical blocks do not depend on b; only the window changes
                cert = InhomBlockCertificate(cert.f, eps, b, cert.block, b * f(cert.S[-1]),
                                             cert.sum_f, None, None, None, (), dict(cert.block.checks))
            window = GammaWindow(b, cert.delta)
            count = nested_count(out[-1].window, window) if out else 1
            if not out or count >= 2:
                break
            G += 1
        else:
            raise NestingUnreachable(f"level {k}: no G below {G} nests into level {k - 1}")
        S = cert.S
        out.append(TowerLevel(k, G, b, cert.delta, eps, S[0], S[-1], len(S), count,
                              (count >= 2) if k > 1 else True, cert))
        M = Fraction(S[-1])
        G_prev = G
    return Tower(f.spec, tuple(out), tower_witnesses(out, witness_limit))


def _children(parent: Fraction, outer: GammaWindow, inner: GammaWindow):
    # inner centers j/b whose closed interval sits inside [parent - W, parent + W]
    W, w = outer.half_width, inner.half_width
    lo = parent - W + w
    hi = parent + W - w
    j0 = -((-lo.numerator * inner.b) // lo.denominator)
    j1 = (hi.numerator * inner.b) // hi.denominator
    return (Fraction(j, inner.b) for j in range(j0, j1 + 1))


def tower_witnesses(levels: Sequence[TowerLevel], limit: int = 2_000_000) -> TowerWitnesses:
    """Certified members of every window: 0 and the deepest centers nested under the interval at 0.

    Also returns a nested chain: at each level the largest nested center,
    with a containment flag for each step.
    """
    windows = [lv.window for lv in levels]
    frontier = [Fraction(0)]
    chain = [Fraction(0)]
    contained = [True]
    for k in range(1, len(windows)):
        nxt = []
        for c in frontier:
            nxt.extend(_children(c, windows[k - 1], windows[k]))
            if len(nxt) > limit:
                raise NestingUnreachable(f"more than {limit} witnesses at level {k + 1}")
        frontier = nxt
        kids = list(_children(chain[-1], windows[k - 1], windows[k]))
        pick = max(kids)
        W, w = windows[k - 1].half_width, windows[k].half_width
        contained.append(chain[-1] - W <= pick - w and pick + w <= chain[-1] + W)
        chain.append(pick)
    members = sorted({frac_part(g) for g in frontier} | {Fraction(0)})
    ok = all(g in win for g in members for win in windows)
    h = hashlib.sha1()
    for g in members:
        h.update(f"{g.numerator}/{g.denominator}\n".encode())
    return TowerWitnesses(len(members), h.hexdigest(), tuple(chain), tuple(contained), ok)


# ---------------------------------------------------------------------------
# S_gamma and wild thresholds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SGammaLevel:
    n: int
    q: int
    norm_q_gamma: Fraction
    cert: InhomBlockCertificate = field(repr=False)
    approx_ok: bool
    spacing_rule: bool


@dataclass(frozen=True)
class SGamma:
    gamma: Fraction
    levels: tuple[SGammaLevel, ...]
    total_f: Fraction
    tail: Fraction

    @property
    def S(self) -> tuple[int, ...]:
        return tuple(q for lv in self.levels for q in lv.cert.S)

    @property
    def ok(self) -> bool:
        disjoint = all(self.levels[i].cert.S[0] > self.levels[i - 1].cert.S[-1]
                       for i in range(1, len(self.levels)))
        per_level = all(HALF <= lv.cert.sum_f <= 1 and lv.approx_ok for lv in self.levels)
        return disjoint and per_level and self.total_f >= Fraction(len(self.levels), 2)


def parse_gamma(gamma) -> Fraction:
    if isinstance(gamma, float):
        raise UnsupportedInput("decimal approximations of gamma are not accepted; pass num/den")
    try:
        return as_fraction(gamma)
    except (TypeError, ValueError) as exc:
        raise UnsupportedInput(f"gamma must be an exact rational: {exc}") from exc


def build_S_gamma(f: ApproxFunction, gamma, n_max: int, q_seq: Sequence[int] | None = None,
                  mode: str = "empirical", **kw) -> SGamma:
    """Blocks ``S_n`` for ``b = q_n``, ``eps = 1/q_n`` stacked above each other."""
    gamma = parse_gamma(gamma)
    c = gamma.denominator
    qs = list(q_seq) if q_seq else [c * 2**n for n in range(1, n_max + 1)]
    if len(qs) < n_max:
        raise PreconditionViolated("q sequence is shorter than n_max")
    out = []
    M = Fraction(1)
    prev_max = None
    for n, q in enumerate(qs[:n_max], start=1):
        cert = build_inhom_block(f, Fraction(1, q), M, q, mode, dilation="never", **kw)
        norm = circle_norm(q * gamma)
        approx_ok = norm <= q * f(cert.S[-1])
        spacing = True if prev_max is None else Fraction(1, q) < min(Fraction(1), 2 * f(prev_max))
        out.append(SGammaLevel(n, q, norm, cert, approx_ok, spacing))
        prev_max = cert.S[-1]
        M = Fraction(prev_max)
    total = exact_sum([lv.cert.sum_f for lv in out])
    tail = exact_sum([Fraction(1, q) for q in qs[:n_max]])
    return SGamma(gamma, tuple(out), total, tail)


class EmpiricalH:
    """Monotone step table ``1/eps -> max S`` recorded from builder runs.

    ``H(x)`` is the value at the least recorded key ``>= x`` (an upper
    estimate, since H is increasing); stored values are made
    non-decreasing by a running maximum.
    """

    def __init__(self, rows: Iterable[tuple] = ()):
        pts = sorted((as_fraction(k), int(v)) for k, v in rows)
        self.keys: list[Fraction] = []
        self.values: list[int] = []
        best = 0
        for k, v in pts:
            best = max(best, v)
            if self.keys and self.keys[-1] == k:
                self.values[-1] = best
            else:
                self.keys.append(k)
                self.values.append(best)

    def __len__(self):
        return len(self.keys)

    def record(self, eps, max_s: int) -> EmpiricalH:
        return EmpiricalH(list(zip(self.keys, self.values)) + [(1 / as_fraction(eps), max_s)])

    def __call__(self, x) -> int | None:
        x = as_fraction(x)
        for k, v in zip(self.keys, self.values):
            if k >= x:
                return v
        return None


@dataclass(frozen=True)
class ThresholdRow:
    q: int
    H: int
    L: Fraction


def wild_threshold(f: ApproxFunction, H: EmpiricalH, grid: Iterable[int]) -> list[ThresholdRow]:
    """``L(q) = 1/f(H(q^2))`` along ``grid``; stops where the table runs out."""
    if not len(H):
        raise EmptyTable("no recorded (1/eps, max S) pairs")
    rows = []
    for q in sorted(set(grid)):
        h = H(q * q)
        if h is None:
            break
        rows.append(ThresholdRow(q, h, 1 / f(h)))
    return rows


def symbolic_max_s_bound(f: ApproxFunction) -> str:
    """Tower-sized magnitude bound, as text only."""
    if isinstance(f, IteratedLog):
        return f"max S <= exp^({f.k + 3})(eps^-3000)"
    return "max S <= H(1/eps), H measured empirically"


def symbolic_threshold(f: ApproxFunction) -> str:
    if isinstance(f, IteratedLog):
        return f"L(q) < exp^({f.k + 3})(q^7000) for large q"
    return "L(q) = 1/f(H(q^2))"
