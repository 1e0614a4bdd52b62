"""Encoding certificates as records, decoding them, and re-checking them."""

from __future__ import annotations

from fractions import Fraction

from .assemble import PsiBlock, PsiFunction, ThmA, verify_psi
from .blocks import (BlockCertificate, EmpiricalOverrides, arc_count, interval_budget,
                     mass_term, overlap_sum, union_measure_exact)
from .errors import RecordFormatError
from .functions import exact_sum, parse_function
from .inhom import InhomBlockCertificate, SGamma, Tower, GammaSample
from .primes import YSystem, enumerate_Y
from .records import ELIDE_THRESHOLD, Record, fmt, to_bool, to_frac, to_ints
from .torus import parse_rational


# ---------------------------------------------------------------------------
# blocks
# ---------------------------------------------------------------------------

def block_record(cert: BlockCertificate, elide: int = ELIDE_THRESHOLD) -> Record:
    r = Record("block")
    r.add("f", cert.f).add("mode", cert.mode).add("eps", cert.eps).add("delta", cert.delta)
    r.add("M", cert.M).add("mass_window", cert.window).add("gamma", cert.gamma)
    r.add("I", cert.I).add("P", cert.P).add("Y", cert.Y)
    if cert.overrides is not None:
        r.add("override_B", cert.overrides.B).add("override_x_start", cert.overrides.x_start)
    r.add("x_prime_min", cert.x_prime_min).add("B", cert.B).add("BP", cert.BP)
    r.add("x_min", cert.x_min).add("x_max", cert.x_max)
    r.add("S_size", len(cert.S)).add("S_min", cert.S[0]).add("S_max", cert.S[-1])
    if len(cert.S) <= elide:
        r.add("S", cert.S)
    else:
        r.add("S_elided", "regenerate as x*y for x in range(x_min, x_max+1, BP) and y in Y")
    r.add("mass", cert.mass).add("overlap_sum", cert.overlap_sum)
    r.add("union", cert.union).add("union_status", cert.union_status)
    for note in cert.notes:
        r.add("note", note)
    for k, v in cert.checks.items():
        r.add(f"check.{k}", v)
    return r


def regenerate_S(x_min: int, x_max: int, BP: int, Y) -> tuple[int, ...]:
    return tuple(sorted(x * y for x in range(x_min, x_max + 1, BP) for y in Y))


def block_from_record(r: Record) -> BlockCertificate:
    try:
        Y = to_ints(r.get("Y"))
        x_min, x_max, BP = int(r.get("x_min")), int(r.get("x_max")), int(r.get("BP"))
        S_text = r.get("S", "")
        S = to_ints(S_text) if S_text else regenerate_S(x_min, x_max, BP, Y)
        ov = None
        if r.get("override_B", ""):
            xs = r.get("override_x_start")
            ov = EmpiricalOverrides(int(r.get("override_B")), None if xs == "none" else int(xs))
        lo, hi = r.get("mass_window").split()
        checks = {k[len("check."):]: to_bool(v) for k, v in r.fields if k.startswith("check.")}
        return BlockCertificate(
            f=r.get("f"), eps=parse_rational(r.get("eps")), delta=parse_rational(r.get("delta")),
            M=parse_rational(r.get("M")), mode=r.get("mode"), I=to_ints(r.get("I", " ")),
            P=int(r.get("P")), Y=Y, x_prime_min=int(r.get("x_prime_min")), B=int(r.get("B")),
            x_min=x_min, x_max=x_max, S=S, mass=parse_rational(r.get("mass")),
            window=(parse_rational(lo), parse_rational(hi)),
            overlap_sum=parse_rational(r.get("overlap_sum")), union=to_frac(r.get("union")),
            union_status=r.get("union_status"), gamma=parse_rational(r.get("gamma")),
            overrides=ov, notes=tuple(r.getall("note")), checks=checks)
    except (ValueError, KeyError) as exc:
        raise RecordFormatError(f"malformed block record: {exc}") from exc


def verify_block(cert: BlockCertificate, workers: int = 1, budget: int | None = None) -> dict:
    """Recompute everything a block certificate states from ``S`` and ``f`` alone."""
    f = parse_function(cert.f)
    ys = enumerate_Y(cert.I)
    X = range(cert.x_min, cert.x_max + 1, cert.BP)
    S = regenerate_S(cert.x_min, cert.x_max, cert.BP, ys.Y)
    mass = exact_sum([mass_term(f, q) for q in S])
    ov = overlap_sum(f, X, ys, workers)
    out = {
        "Y_matches_I": ys.Y == cert.Y and ys.P == cert.P,
        "S_matches_recipe": S == cert.S,
        "S_above_M": S[0] > cert.M,
        "factorization_unique": len(set(S)) == len(X) * len(ys.Y),
        "mass_reproduced": mass == cert.mass,
        "mass_in_window": cert.window[0] <= mass <= cert.window[1],
        "overlap_reproduced": ov == cert.overlap_sum,
        "progression_admissible": all(x % cert.BP == 1 % cert.BP for x in X) and ys.admissible(cert.x_min),
    }
    if cert.union is not None:
        u = union_measure_exact(S, f, cert.gamma, budget, clip=True)
        out["union_reproduced"] = u == cert.union
        out["union_le_overlap"] = u <= ov
    if cert.mode == "certificate":
        out["overlap_below_tolerance"] = ov < cert.eps
    return out


# ---------------------------------------------------------------------------
# inhomogeneous blocks
# ---------------------------------------------------------------------------

def inhom_record(cert: InhomBlockCertificate) -> Record:
    r = Record("inhom")
    r.add("f", cert.f).add("eps", cert.eps).add("b", cert.b).add("delta", cert.delta)
    r.add("window", (cert.b, cert.delta)).add("sum_f", cert.sum_f)
    r.add("union_2f", cert.union_2f).add("union_2bf", cert.union_2bf).add("union_bq", cert.union_bq)
    for k, v in cert.checks.items():
        r.add(f"check.{k}", v)
    for s in cert.samples:
        r.add("sample", (s.gamma, s.measure, s.ok))
    if cert.samples:
        r.add("samples_count", len(cert.samples))
        r.add("samples_max_measure", max(s.measure for s in cert.samples))
        r.add("samples_all_below_eps", all(s.ok for s in cert.samples))
    return r.extend("block", block_record(cert.block))


def inhom_from_record(r: Record) -> InhomBlockCertificate:
    block = block_from_record(r.sub("block"))
    samples = []
    for line in r.getall("sample"):
        g, m, ok = line.split()
        samples.append(GammaSample(parse_rational(g), parse_rational(m), to_bool(ok)))
    checks = {k[len("check."):]: to_bool(v) for k, v in r.fields if k.startswith("check.")}
    return InhomBlockCertificate(
        r.get("f"), parse_rational(r.get("eps")), int(r.get("b")), block,
        parse_rational(r.get("delta")), parse_rational(r.get("sum_f")),
        to_frac(r.get("union_2f")), to_frac(r.get("union_2bf")), to_frac(r.get("union_bq")),
        tuple(samples), checks)


# ---------------------------------------------------------------------------
# towers, S_gamma, assemblies
# ---------------------------------------------------------------------------

def tower_record(t: Tower) -> Record:
    r = Record("tower")
    r.add("f", t.f).add("levels", len(t.levels))
    for lv in t.levels:
        r.add("level", (lv.k, lv.G, lv.b, lv.delta, lv.eps, lv.S_min, lv.S_max, lv.S_size,
                        lv.nested_count, lv.nesting_ok))
    for i in range(1, len(t.levels)):
        r.add(f"divides.{i}.{i + 1}", t.levels[i].b % t.levels[i - 1].b == 0)
    w = t.witnesses
    r.add("witness_count", w.count).add("witness_digest", w.digest)
    r.add("witness_chain", w.chain).add("witness_chain_contained", w.chain_contained)
    r.add("witnesses_in_all_windows", w.members_ok)
    r.add("ok", t.ok)
    for lv in t.levels:
        r.extend(f"L{lv.k}", inhom_record(lv.cert))
    return r


def sgamma_record(s: SGamma) -> Record:
    r = Record("sgamma")
    r.add("gamma", s.gamma).add("levels", len(s.levels))
    for lv in s.levels:
        S = lv.cert.S
        r.add("level", (lv.n, lv.q, lv.norm_q_gamma, lv.approx_ok, lv.spacing_rule,
                        lv.cert.sum_f, S[0], S[-1], len(S)))
    r.add("total_f", s.total_f).add("tail_sum_inverse_q", s.tail).add("ok", s.ok)
    for lv in s.levels:
        r.extend(f"S{lv.n}", inhom_record(lv.cert))
    return r


def thmA_record(a: ThmA) -> Record:
    r = Record("thma")
    r.add("f", a.f).add("k_max", len(a.blocks)).add("total_mass", a.total_mass).add("disjoint", a.disjoint)
    t = a.tail
    for k, (e, m, kind, ok) in enumerate(zip(t.eps, t.measured, t.measured_kind, t.blocks_within_eps), 1):
        r.add("block", (k, e, kind, m, ok))
    for row in t.rows:
        r.add("tail", (row.K, row.built, row.schedule, row.measured))
    r.add("tail_valid", t.valid)
    for k, b in enumerate(a.blocks, 1):
        r.extend(f"S{k}", block_record(b))
    return r


def psi_record(psi: PsiFunction, check: bool = True) -> Record:
    r = Record("psi")
    r.add("f", psi.f.spec).add("j_max", len(psi.blocks))
    for blk in psi.blocks:
        r.add("psi_block", (blk.j, blk.M, blk.C.S[0], blk.C_max, len(blk.C.S), blk.Q))
    if check:
        v = verify_psi(psi)
        for k, ok in v.checks.items():
            r.add(f"check.{k}", ok)
        for m in v.block_mass:
            r.add("block_mass", m)
        r.add("d_sum", v.d_sum).add("square_partial_sum", v.square_partial)
        for N, d in v.density.checkpoints:
            r.add("density", (N, d))
    for blk in psi.blocks:
        r.extend(f"C{blk.j}", block_record(blk.C))
    return r


def psi_from_record(r: Record) -> PsiFunction:
    f = parse_function(r.get("f"))
    blocks = []
    for line in r.getall("psi_block"):
        j, M, _, _, _, Q = to_ints(line)
        blocks.append(PsiBlock(j, M, block_from_record(r.sub(f"C{j}")), Q))
    return PsiFunction(f, tuple(blocks))


# ---------------------------------------------------------------------------
# y-systems
# ---------------------------------------------------------------------------

def ysystem_record(ys: YSystem) -> Record:
    r = Record("ysystem")
    for line in ys.to_lines():
        k, _, v = line.partition(" ")
        r.fields.append(("y", line) if k.isdigit() else (k, v))
    return r
