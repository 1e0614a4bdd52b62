"""Command-line front end.

Every command accepts ``--config FILE`` with ``key=value`` lines whose keys
are the long option names (``eps=1/4``, ``f=inv_bits``, ``I=1,2``); explicit
flags win over the file.  Environment variables ``DSLAB_INTERVAL_BUDGET``,
``DSLAB_TERM_CAP``, ``DSLAB_K_MAX`` and ``DSLAB_WORKERS`` override the caps.

Exit status is 0 on success, 1 on a computation failure and 2 on a usage
error; failures print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import certs
from .assemble import build_thmA, build_thmC, verify_psi
from .blocks import EmpiricalOverrides, build_block, workers_default
from .errors import DSLabError
from .functions import khintchine_partial, km_partial, parse_function
from .inhom import (build_inhom_block, build_S_gamma, build_tower, parse_gamma,
                    verify_inhom_block, window_samples)
from .primes import build_I, build_pairs, enumerate_Y, table_for
from .records import Record, append_record, fmt, read_last, read_records
from .torus import parse_rational


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _rat(text):
    try:
        return parse_rational(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _ints(text):
    text = text.strip()
    try:
        return tuple(int(t) for t in text.replace(",", " ").split()) if text else ()
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated integer list: {text!r}") from exc


def _window(text):
    lo, hi = text.split(",")
    return _rat(lo), _rat(hi)


# option name -> (type, default)
OPTIONS = {
    "f": (str, "scaled:inv_bits:1/8"),
    "eps": (_rat, Fraction(1, 4)),
    "M": (_rat, Fraction(1)),
    "mode": (str, "empirical"),
    "I": (_ints, None),
    "B": (int, 1),
    "x_start": (int, None),
    "window": (_window, (Fraction(1), Fraction(2))),
    "b_choice": (str, "min"),
    "term_cap": (int, None),
    "budget": (int, None),
    "K_max": (int, None),
    "workers": (int, None),
    "compute_union": (str, None),
    "b": (int, 2),
    "levels": (int, 3),
    "G_budget": (int, 64),
    "gamma": (str, "0"),
    "n_max": (int, 2),
    "q_seq": (_ints, None),
    "j_max": (int, 3),
    "k_max": (int, 3),
    "j": (int, None),
    "K": (int, None),
    "j_min": (int, 5),
    "gap_coeff": (int, 40),
    "kind": (str, "plain"),
    "Q": (int, 10),
    "per_interval": (int, 50),
    "out": (str, None),
    "cert": (str, None),
}

CHOICES = {"mode": ("empirical", "certificate"), "b_choice": ("min", "P-1"),
           "compute_union": ("always", "auto", "never"), "kind": ("plain", "km")}


def _add(p, *names):
    for name in names:
        typ, _ = OPTIONS[name]
        flag = "--" + name.replace("_", "-")
        kwargs = {"dest": name, "default": None, "type": typ}
        if name in CHOICES:
            kwargs["choices"] = CHOICES[name]
        p.add_argument(flag, **kwargs)


BUILD = ("f", "eps", "M", "mode", "I", "B", "x_start", "window", "b_choice", "term_cap",
         "budget", "K_max", "workers", "compute_union", "out")


def make_parser() -> Parser:
    p = Parser(prog="dslab", description="Exact construction and verification of counterexample blocks.")
    p.add_argument("--config", default=None, help="key=value file supplying option defaults")
    sub = p.add_subparsers(dest="command", parser_class=Parser, required=True)

    s = sub.add_parser("primes", help="prime-pair levels I_j")
    _add(s, "j", "K", "j_min", "gap_coeff", "out")

    s = sub.add_parser("ysystem", help="the family Y(I) with weights")
    _add(s, "I", "out")

    for name, extra in (("block", ()), ("inhom", ("b", "per_interval"))):
        grp = sub.add_parser(name).add_subparsers(dest="action", parser_class=Parser, required=True)
        _add(grp.add_parser("build"), *BUILD, *extra)
        _add(grp.add_parser("verify"), "cert", "workers", "budget", "out", *extra)

    grp = sub.add_parser("tower").add_subparsers(dest="action", parser_class=Parser, required=True)
    _add(grp.add_parser("build"), *BUILD, "levels", "G_budget")

    grp = sub.add_parser("sgamma").add_subparsers(dest="action", parser_class=Parser, required=True)
    _add(grp.add_parser("build"), *BUILD, "gamma", "n_max", "q_seq")

    grp = sub.add_parser("psi").add_subparsers(dest="action", parser_class=Parser, required=True)
    _add(grp.add_parser("build"), *BUILD, "j_max")
    _add(grp.add_parser("verify"), "cert", "out")

    grp = sub.add_parser("thma").add_subparsers(dest="action", parser_class=Parser, required=True)
    _add(grp.add_parser("build"), *BUILD, "k_max")

    s = sub.add_parser("series", help="exact Khintchine or phi-weighted partial sums")
    _add(s, "kind", "f", "Q")

    s = sub.add_parser("report", help="render a certificate file as a table")
    _add(s, "cert")
    return p


def read_config(path: str) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            k, v = (t.strip() for t in line.split("=", 1))
            k = k.replace("-", "_")
            if k not in OPTIONS:
                raise UsageError(f"{path}:{n}: unknown key {k!r}")
            try:
                out[k] = OPTIONS[k][0](v)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{path}:{n}: {exc}") from exc
    return out


class Opts:
    """Flag value, else config value, else built-in default."""

    def __init__(self, ns, config):
        self.ns, self.config = ns, config

    def __getattr__(self, name):
        v = getattr(self.ns, name, None)
        if v is None:
            v = self.config.get(name)
        if v is None and name in OPTIONS:
            v = OPTIONS[name][1]
        return v


def _build_kwargs(o: Opts) -> dict:
    kw = dict(window=o.window, b_choice=o.b_choice, cap=o.term_cap, union_budget=o.budget,
              K_max=o.K_max, workers=o.workers)
    if o.mode == "empirical":
        kw["I"] = o.I if o.I is not None else (1,)
        kw["overrides"] = EmpiricalOverrides(o.B, o.x_start)
    elif o.I is not None:
        kw["I"] = o.I
    return kw


def _inputs(rec: Record, o: Opts, names) -> Record:
    for n in names:
        if n in ("out", "workers", "cert"):
            continue
        rec.add_input(n, getattr(o, n))
    return rec


def _emit(rec: Record, o: Opts) -> None:
    if o.out:
        append_record(o.out, rec)
    else:
        sys.stdout.write(rec.to_text())


def _print_checks(checks: dict) -> bool:
    for k, v in checks.items():
        print(f"{k:<32} {'pass' if v else 'FAIL'}")
    return all(checks.values())


def cmd_primes(o):
    table = table_for(level=(o.K if o.K is not None else (o.j or 1)))
    rec = Record("primes")
    if o.j is not None:
        I = build_pairs(o.j, o.gap_coeff, table)
        _inputs(rec, o, ("j", "gap_coeff"))
    elif o.K is not None:
        I = build_I(o.K, o.j_min, o.gap_coeff, table)
        _inputs(rec, o, ("K", "j_min", "gap_coeff"))
    else:
        raise UsageError("primes needs --j or --K")
    rec.add("I", tuple(I)).add("size", len(I))
    for i in I:
        rec.add("pair", (i, *table.pair(i)))
    _emit(rec, o)
    return 0


def cmd_ysystem(o):
    if o.I is None:
        raise UsageError("ysystem needs --I")
    rec = certs.ysystem_record(enumerate_Y(o.I))
    _emit(_inputs(rec, o, ("I",)), o)
    return 0


def cmd_block(o):
    if o.action == "verify":
        cert = certs.block_from_record(read_last(o.cert, "block"))
        return 0 if _print_checks(certs.verify_block(cert, o.workers or workers_default(), o.budget)) else 1
    f = parse_function(o.f)
    kw = _build_kwargs(o)
    cert = build_block(f, o.eps, o.M, o.mode, compute_union=o.compute_union, **kw)
    _emit(_inputs(certs.block_record(cert), o, BUILD), o)
    return 0


def cmd_inhom(o):
    if o.action == "verify":
        rec = read_last(o.cert, "inhom")
        cert = certs.inhom_from_record(rec)
        f = parse_function(cert.f)
        fresh = type(cert)(cert.f, cert.eps, cert.b, cert.block, cert.delta, cert.sum_f,
                           cert.union_2f, cert.union_2bf, cert.union_bq, (), cert.checks)
        done = verify_inhom_block(fresh, window_samples(cert.window, o.per_interval), f,
                                  workers=o.workers, budget=o.budget)
        out = certs.inhom_record(done)
        out.inputs = list(rec.inputs) + [("per_interval", fmt(o.per_interval))]
        _emit(out, o)
        checks = dict(certs.verify_block(cert.block, o.workers or workers_default(), o.budget))
        checks["samples_all_below_eps"] = all(s.ok for s in done.samples)
        return 0 if all(checks.values()) else 1
    f = parse_function(o.f)
    kw = _build_kwargs(o)
    kw.pop("window")
    cert = build_inhom_block(f, o.eps, o.M, o.b, o.mode, **kw)
    _emit(_inputs(certs.inhom_record(cert), o, BUILD + ("b",)), o)
    return 0


def cmd_tower(o):
    f = parse_function(o.f)
    kw = _build_kwargs(o)
    kw.pop("window")
    t = build_tower(f, o.levels, o.mode, G_budget=o.G_budget, **kw)
    _emit(_inputs(certs.tower_record(t), o, BUILD + ("levels", "G_budget")), o)
    return 0 if t.ok else 1


def cmd_sgamma(o):
    f = parse_function(o.f)
    kw = _build_kwargs(o)
    kw.pop("window")
    s = build_S_gamma(f, parse_gamma(o.gamma), o.n_max, o.q_seq, o.mode, **kw)
    _emit(_inputs(certs.sgamma_record(s), o, BUILD + ("gamma", "n_max", "q_seq")), o)
    return 0 if s.ok else 1


def cmd_psi(o):
    if o.action == "verify":
        rec = read_last(o.cert, "psi")
        psi = certs.psi_from_record(rec)
        v = verify_psi(psi)
        stored = {k[len("check."):]: v for k, v in rec.fields if k.startswith("check.")}
        checks = dict(v.checks)
        checks["matches_stored_checks"] = stored == {k: ("true" if b else "false") for k, b in v.checks.items()}
        checks["d_sum_reproduced"] = fmt(v.d_sum) == rec.get("d_sum")
        return 0 if _print_checks(checks) else 1
    f = parse_function(o.f)
    kw = _build_kwargs(o)
    psi = build_thmC(f, o.j_max, o.mode, compute_union=o.compute_union or "auto", **kw)
    rec = certs.psi_record(psi)
    _emit(_inputs(rec, o, BUILD + ("j_max",)), o)
    return 0 if all(to == "true" for k, to in rec.fields if k.startswith("check.")) else 1


def cmd_thma(o):
    f = parse_function(o.f)
    kw = _build_kwargs(o)
    a = build_thmA(f, o.k_max, o.mode, compute_union=o.compute_union or "auto", **kw)
    _emit(_inputs(certs.thmA_record(a), o, BUILD + ("k_max",)), o)
    return 0


def cmd_series(o):
    f = parse_function(o.f)
    rep = (km_partial if o.kind == "km" else khintchine_partial)(f, o.Q)
    print(fmt(rep.total))
    return 0


# descriptive labels for the inequalities a record states
LABELS = {
    "mass_window": "target window for the block mass",
    "mass": "mass: window_lo <= sum_q min(1, 2f(q)) <= window_hi",
    "overlap_sum": "union bound: 2 sum_x sum_y g_I(y) f(xy)",
    "union": "exact measure of the union of A_q(f(q))",
    "delta": "threshold: 2P f(x'_min y_min) <= delta/2",
    "x_prime_min": "least x' with 2P f(x' y_min) <= delta/2",
    "sum_f": "block mass: 1/2 <= sum_q f(q) <= 1",
    "union_2bf": "dilation: lambda(U A_q(2bf)) <= b lambda(U A_q(2f))",
    "union_bq": "rescaling: lambda(U A_bq(2bf)) = lambda(U A_q(2bf))",
    "window": "gamma-window: ||b gamma|| <= delta",
    "level": "nesting: outer interval holds >= 2 inner intervals",
    "tail": "tail bound: sum_{l >= K} eps_l",
    "density": "density at Q_j >= 1 - 1/j",
    "d_sum": "sum over D_j of psi <= sum_q q^-2",
    "block_mass": "block mass: 1/2 <= sum_{C_j} f <= 1",
    "sample": "small union at gamma: lambda(U A_q^gamma(f)) < eps",
}


def _short(v: str) -> str:
    if len(v) <= 72:
        return v
    parts = v.split()
    if len(parts) == 1 and "/" in v:
        x = parse_rational(v)
        return f"~{float(x):.12g} (exact value in file)"
    return v[:60] + f" ... ({len(parts)} items)"


def cmd_report(o):
    for rec in read_records(o.cert):
        print(f"== {rec.kind} record, input hash {rec.input_hash}")
        for k, v in rec.inputs:
            print(f"  input {k:<24} {_short(v)}")
        for k, v in rec.fields:
            base = k.rsplit(".", 1)[-1]
            label = LABELS.get(base, "check" if ".check." in f".{k}" else "")
            print(f"  {k:<32} {_short(v):<48} {label}")
    return 0


COMMANDS = {"primes": cmd_primes, "ysystem": cmd_ysystem, "block": cmd_block, "inhom": cmd_inhom,
            "tower": cmd_tower, "sgamma": cmd_sgamma, "psi": cmd_psi, "thma": cmd_thma,
            "series": cmd_series, "report": cmd_report}


# index set used by empirical builds when none is given
EMPIRICAL_I = {"block": (1,), "inhom": (1,), "tower": (1,), "sgamma": (1,), "thma": (1,), "psi": ()}


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit": code}) + "\n")
    return code


def run_cli(argv=None) -> int:
    try:
        ns = make_parser().parse_args(argv)
        config = read_config(ns.config) if ns.config else {}
        o = Opts(ns, config)
        if o.I is None and o.mode == "empirical" and ns.command in EMPIRICAL_I:
            ns.I = EMPIRICAL_I[ns.command]
        if ns.command in ("report",) or getattr(ns, "action", None) == "verify":
            if not o.cert:
                raise UsageError("--cert is required")
        return COMMANDS[ns.command](o)
    except UsageError as exc:
        return _fail("UsageError", str(exc), 2)
    except DSLabError as exc:
        return _fail(exc.kind, str(exc), 1)
    except (OSError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)


def main() -> None:
    sys.exit(run_cli())
