"""Assembly of full counterexamples from blocks.

``build_thmA`` stacks blocks with tolerances ``2^-k`` above each other and
reports a Borel-Cantelli tail certificate.  ``build_thmC`` interleaves sparse
blocks ``C_j`` with long runs ``D_j`` on which ``psi(q) = min(f(q), q^-2)``,
so the support has upper density 1 while psi stays non-increasing on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .blocks import BlockCertificate, EmpiricalOverrides, build_block
from .errors import DegenerateBlock
from .functions import ApproxFunction, exact_sum, first_at_most
from .torus import as_fraction

HALF = Fraction(1, 2)


# ---------------------------------------------------------------------------
# homogeneous assembly with a tail certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailRow:
    K: int
    built: Fraction      # sum of eps_l over built blocks l >= K
    schedule: Fraction   # built plus the geometric tail of the schedule
    measured: Fraction   # sum over built blocks l >= K of the measured union (or overlap sum)


@dataclass(frozen=True)
class TailCertificate:
    eps: tuple[Fraction, ...]
    measured: tuple[Fraction, ...]
    measured_kind: tuple[str, ...]
    rows: tuple[TailRow, ...]

    @property
    def blocks_within_eps(self) -> tuple[bool, ...]:
        return tuple(m < e for m, e in zip(self.measured, self.eps))

    @property
    def valid(self) -> bool:
        """The schedule bounds apply only when every block beats its tolerance."""
        return all(self.blocks_within_eps)

    def bound(self, K: int) -> Fraction:
        return self.rows[K - 1].schedule


def tail_certificate(blocks: Sequence[BlockCertificate]) -> TailCertificate:
    eps = tuple(b.eps for b in blocks)
    measured, kinds = [], []
    for b in blocks:
        if b.union is not None:
            measured.append(b.union)
            kinds.append("union")
        else:
            measured.append(b.overlap_sum)
            kinds.append("overlap")
    n = len(blocks)
    tail = Fraction(1, 2**n)  # sum_{l > n} 2^-l
    rows = []
    for K in range(1, n + 1):
        built = sum(eps[K - 1:], Fraction(0))
        rows.append(TailRow(K, built, built + tail, sum(measured[K - 1:], Fraction(0))))
    return TailCertificate(eps, tuple(measured), tuple(kinds), tuple(rows))


@dataclass(frozen=True)
class ThmA:
    f: str
    blocks: tuple[BlockCertificate, ...]
    tail: TailCertificate

    @property
    def total_mass(self) -> Fraction:
        return sum((b.mass for b in self.blocks), Fraction(0))

    @property
    def disjoint(self) -> bool:
        return all(self.blocks[i].S[0] > self.blocks[i - 1].S[-1] for i in range(1, len(self.blocks)))


def build_thmA(f: ApproxFunction, k_max: int, mode: str = "empirical", **kw) -> ThmA:
    """Blocks ``S_1, ..., S_{k_max}`` with ``eps_k = 2^-k`` and ``M_k = max S_{k-1}``."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    kw.setdefault("compute_union", "auto")
    blocks = []
    M = Fraction(1)
    for k in range(1, k_max + 1):
        b = build_block(f, Fraction(1, 2**k), M, mode, **kw)
        blocks.append(b)
        M = Fraction(b.S[-1])
    return ThmA(f.spec, tuple(blocks), tail_certificate(blocks))


# ---------------------------------------------------------------------------
# upper-density assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PsiBlock:
    j: int
    M: int
    C: BlockCertificate
    Q: int

    @property
    def C_max(self) -> int:
        return self.C.S[-1]

    @property
    def D(self) -> range:
        return range(self.C_max + 1, self.Q + 1)


def _d_value(f: ApproxFunction, q: int) -> Fraction:
    v = f(q)
    w = Fraction(1, q * q)
    return v if v < w else w


@dataclass(frozen=True)
class PsiFunction:
    """``psi`` supported on ``{1} u C_1 u D_1 u C_2 u D_2 ...``."""

    f: ApproxFunction
    blocks: tuple[PsiBlock, ...]
    overrides: dict = field(default_factory=dict, compare=False)

    def value(self, q: int) -> Fraction:
        if q in self.overrides:
            return self.overrides[q]
        if q == 1:
            return self.f(1)
        for blk in self.blocks:
            if q <= blk.C_max:
                return self.f(q) if q in set(blk.C.S) else Fraction(0)
            if q <= blk.Q:
                return _d_value(self.f, q)
        return Fraction(0)

    __call__ = value

    def support(self) -> Iterator[tuple[int, Fraction, str]]:
        """``(q, psi(q), tag)`` in increasing ``q``; tags are ``D0``, ``C<j>``, ``D<j>``."""
        ov = self.overrides
        yield 1, ov.get(1, self.f(1)), "D0"
        for blk in self.blocks:
            for q in blk.C.S:
                yield q, ov.get(q, self.f(q)), f"C{blk.j}"
            for q in blk.D:
                yield q, ov.get(q, _d_value(self.f, q)), f"D{blk.j}"

    def support_count(self, N: int) -> int:
        n = 1 if N >= 1 else 0
        for blk in self.blocks:
            n += sum(1 for q in blk.C.S if q <= N)
            if N > blk.C_max:
                n += min(N, blk.Q) - blk.C_max
        return n

    def tampered(self, q: int, value) -> PsiFunction:
        ov = dict(self.overrides)
        ov[q] = as_fraction(value)
        return PsiFunction(self.f, self.blocks, ov)


def build_thmC(f: ApproxFunction, j_max: int, mode: str = "empirical", *,
               I: Iterable[int] = (), overrides: EmpiricalOverrides | None = None, **kw) -> PsiFunction:
    """Interleave blocks ``C_j`` (tolerance ``2^-j``) with runs ``D_j = (max C_j, Q_j]``.

    ``M_j`` is the least integer above ``Q_{j-1}`` with ``f(M_j) <= psi(Q_{j-1})``
    and ``Q_j = max(j * max C_j, max C_j + 1)``, the least value meeting the
    density requirement.
    """
    if j_max < 1:
        raise ValueError("j_max must be at least 1")
    kw.setdefault("compute_union", "auto")
    if mode == "empirical" and overrides is None:
        overrides = EmpiricalOverrides()
    psi = PsiFunction(f, ())
    blocks: list[PsiBlock] = []
    Q_prev = 1
    for j in range(1, j_max + 1):
        target = psi.value(Q_prev)
        M = first_at_most(f, target, Q_prev + 1)
        C = build_block(f, Fraction(1, 2**j), M, mode, I=I if mode == "empirical" else None,
                        overrides=overrides, **kw)
        if not C.S:
            raise DegenerateBlock(f"C_{j} is empty")
        Q = max(j * C.S[-1], C.S[-1] + 1)
        blocks.append(PsiBlock(j, M, C, Q))
        psi = PsiFunction(f, tuple(blocks))
        Q_prev = Q
    return psi


@dataclass(frozen=True)
class DensityReport:
    checkpoints: tuple[tuple[int, Fraction], ...]


@dataclass(frozen=True)
class PsiVerification:
    density: DensityReport
    checks: dict
    block_mass: tuple[Fraction, ...]
    d_sum: Fraction
    square_partial: Fraction
    first_failure: str | None = None

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def square_partial_sum(N: int) -> Fraction:
    """``sum_{q=1}^N q^-2``, a rational lower bound for the full series."""
    return exact_sum([Fraction(1, q * q) for q in range(1, N + 1)])


def verify_psi(psi: PsiFunction, f: ApproxFunction | None = None,
               checkpoints: Iterable[int] | None = None) -> PsiVerification:
    """Check the defining properties of ``psi``; failures are reported, not raised."""
    f = f or psi.f
    below_f = True
    monotone = True
    failure = None
    prev = None
    d_terms = []
    for q, v, tag in psi.support():
        if v > f(q):
            below_f = False
            failure = failure or f"psi({q}) > f({q})"
        if prev is not None and v > prev[1]:
            monotone = False
            failure = failure or f"psi({q}) > psi({prev[0]})"
        if tag != "D0" and tag.startswith("D"):
            d_terms.append(v)
        prev = (q, v)
    masses = tuple(exact_sum([psi.value(q) for q in blk.C.S]) for blk in psi.blocks)
    d_sum = exact_sum(d_terms)
    top = psi.blocks[-1].Q if psi.blocks else 1
    sq = square_partial_sum(top)
    pts = sorted(set(checkpoints) if checkpoints is not None
                 else {b.Q for b in psi.blocks} | {b.C_max for b in psi.blocks})
    dens = tuple((N, Fraction(psi.support_count(N), N)) for N in pts if N >= 1)
    dmap = dict(dens)
    checks = {
        "psi_le_f": below_f,
        "non_increasing_on_support": monotone,
        "block_mass_in_window": all(HALF <= m <= 1 for m in masses),
        "d_sum_le_square_series": d_sum <= sq,
    }
    for blk in psi.blocks:
        N = blk.Q
        d = dmap.get(N, Fraction(psi.support_count(N), N))
        checks[f"density_at_Q{blk.j}"] = d >= 1 - Fraction(1, blk.j)
    return PsiVerification(DensityReport(dens), checks, masses, d_sum, sq, failure)
