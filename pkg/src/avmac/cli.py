"""Command line interface: ``avmac <command> [options]``.

Exit status is 0 on success, 2 for bad input (including unreadable channel
files) and 3 when a solver or search budget gives out.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adversary import exhaustive_attack, greedy_attack, symmetrizer_attack
from .channel import resolve_channel
from .coding import EXPERIMENT_HEADER, random_code, run_pipeline, prefix_input, save_code
from .errors import ComputationError, InputError
from .infotheory import InputPolicy
from .region import (QOptions, RegionOptions, capacity_region, cooperation_thresholds, deterministic_capacity,
                     nonconferencing_verdict)
from .symmetrizability import DEFAULT_TOL, KINDS, check_symmetrizable

log = logging.getLogger("avmac")


def _f(x) -> str:
    return f"{x:.10f}"


def _bits(value, nats):
    return value / math.log(2) if nats else value


def _header(args, keys) -> list[str]:
    lines = [f"# avmac {__version__} {args.command}"]
    for k in keys:
        lines.append(f"# {k}={getattr(args, k.replace('-', '_'))}")
    return lines


def _write(path, lines):
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _region_opts(args) -> RegionOptions:
    if args.p_restarts < 1 or args.q_grid < 1:
        raise InputError("budgets must be positive")
    return RegionOptions(nu=args.nu, p_restarts=args.p_restarts, seed=args.seed,
                         q=QOptions(grid=args.q_grid, seed=args.seed))


def _caps(args):
    c1, c2 = _bits(args.c1, args.nats), _bits(args.c2, args.nats)
    if c1 < 0 or c2 < 0:
        raise InputError("--c1 and --c2 must be nonnegative")
    return c1, c2


# ---------------------------------------------------------------- commands

def cmd_symm(args) -> int:
    ch = resolve_channel(args.channel)
    lines = _header(args, ["channel", "tol"])
    out = {}
    for kind in KINDS:
        cert = check_symmetrizable(ch, kind, args.tol)
        flag = " marginal" if cert.marginal else ""
        lines.append(f"{kind}: {str(cert.feasible).lower()} residual={cert.residual:.3e}{flag}")
        out[kind] = cert.to_dict()
    for kind in KINDS:
        if out[kind]["feasible"]:
            sig = np.array(out[kind]["sigma"])
            lines.append(f"# {kind} sigma={json.dumps(np.round(sig, 10).tolist())}")
    print("\n".join(lines))
    if args.out:
        Path(args.out).write_text(json.dumps(out, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def _region_lines(args, reg, c1, c2):
    lines = _header(args, ["channel", "c1", "c2", "nats"])
    lines += [f"# {k}={v}" for k, v in sorted(reg.resolution.items())]
    lines.append(f"# conferencing_bits={_f(c1)},{_f(c2)}")
    lines.append(f"# budget_exhausted={str(reg.budget_exhausted).lower()}")
    lines.append("R1,R2")
    lines += [f"{_f(a)},{_f(b)}" for a, b in reg.inner_vertices]
    return lines


def _bound_lines(reg):
    rows = ["index,origin,exact,b1,b2,b3a,b3b"]
    for r in reg.bound_records:
        b = r.bounds
        rows.append(f"{r.index},{r.origin},{str(b.exact).lower()},{_f(b.b1)},{_f(b.b2)},{_f(b.b3a)},{_f(b.b3b)}")
    return rows


def _emit_region(args, reg, c1, c2):
    lines = _region_lines(args, reg, c1, c2)
    if args.out:
        _write(args.out, lines)
        _write(str(args.out) + ".bounds.csv", _bound_lines(reg))
    print(f"max_sum_rate={_f(reg.max_sum_rate())}")
    print(f"max_R1={_f(reg.max_rate(0))}")
    print(f"max_R2={_f(reg.max_rate(1))}")
    if not args.out:
        print("\n".join(lines))


def cmd_region(args) -> int:
    ch = resolve_channel(args.channel)
    c1, c2 = _caps(args)
    reg = capacity_region(ch, c1, c2, _region_opts(args))
    _emit_region(args, reg, c1, c2)
    if args.thresholds:
        th = cooperation_thresholds(ch, _region_opts(args))
        print(f"c_infinity={_f(th.c_infinity)}")
        print(f"sum_threshold={_f(th.sum_threshold)}")
        print(f"c1_threshold={_f(th.c1_threshold)}")
        print(f"c2_threshold={_f(th.c2_threshold)}")
    return 3 if reg.budget_exhausted else 0


def cmd_dichotomy(args) -> int:
    ch = resolve_channel(args.channel)
    c1, c2 = _caps(args)
    res = deterministic_capacity(ch, c1, c2, _region_opts(args))
    print(f"XY-symmetrizable: {str(res.certificate.feasible).lower()} residual={res.certificate.residual:.3e}")
    if res.zero:
        print("deterministic region: {(0,0)}")
        if args.out:
            _write(args.out, _header(args, ["channel", "c1", "c2", "nats"]) + ["R1,R2", f"{_f(0)},{_f(0)}"])
        return 0
    print("deterministic region: equals the random-code region")
    _emit_region(args, res.region, c1, c2)
    return 0


def cmd_nonconf(args) -> int:
    ch = resolve_channel(args.channel)
    v = nonconferencing_verdict(ch, args.tol, QOptions(grid=args.q_grid, seed=args.seed))
    for k, cert in v.certificates.items():
        print(f"{k}: {str(cert.feasible).lower()} residual={cert.residual:.3e}")
    print(f"case={v.case}")
    print(f"statement={v.statement}")
    if v.axis is not None:
        print(f"axis={v.axis} bound={_f(v.axis_bound)} upper_bound_only=true")
    return 0


def cmd_simulate(args) -> int:
    ch = resolve_channel(args.channel)
    c1, c2 = _caps(args)
    r = prefix_input(ch, QOptions(grid=args.q_grid, seed=args.seed)).reshape(ch.nx, ch.ny)
    policy = InputPolicy.from_joint(r)
    rep = run_pipeline(ch, policy, args.n, (args.r1, args.r2), c1, c2, args.seed)
    lines = _header(args, ["channel", "c1", "c2", "nats", "n", "r1", "r2", "seed"])
    lines.append(f"# lambda={_f(rep.lam)} prefix_error={_f(rep.prefix_error)} bound={_f(rep.bound)}")
    lines.append(f"# final_length={rep.final.n} sender1_rate={_f(rep.sender1_rate)}")
    lines.append(EXPERIMENT_HEADER)
    lines += rep.rows
    print("\n".join(lines))
    if args.out:
        _write(args.out, lines)
    if args.code_out:
        save_code(rep.final, args.code_out)
    return 0


def cmd_attack(args) -> int:
    ch = resolve_channel(args.channel)
    if args.m1 < 1 or args.m2 < 1 or args.n < 1 or args.trials < 1:
        raise InputError("--n, --m1, --m2 and --trials must be positive")
    cert = None
    if args.strategy in ("symmetrizer", "all"):
        cert = check_symmetrizable(ch, args.kind, args.tol)
    lines = _header(args, ["channel", "n", "m1", "m2", "trials", "strategy", "kind", "decoder_state", "seed"])
    lines.append(EXPERIMENT_HEADER)
    for t in range(args.trials):
        prior = None
        if args.decoder_state is not None:
            if not 0 <= args.decoder_state < ch.ns:
                raise InputError(f"--decoder-state must lie in [0, {ch.ns})")
            prior = np.eye(ch.ns)[args.decoder_state]
        code = random_code(ch, args.n, args.m1, args.m2, seed=args.seed + t, decoder_prior=prior)
        outcomes = []
        if args.strategy in ("exhaustive", "all"):
            outcomes.append(exhaustive_attack(code, ch))
        if args.strategy in ("greedy", "all"):
            outcomes.append(greedy_attack(code, ch))
        if args.strategy in ("symmetrizer", "all") and cert.feasible:
            outcomes.append(symmetrizer_attack(code, ch, cert, seed=args.seed + t, draws=args.draws))
        lines += [o.csv_row(code, args.seed + t) for o in outcomes]
    print("\n".join(lines))
    if args.out:
        _write(args.out, lines)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="avmac", description="AV-MAC symmetrizability, regions, codes and attacks")
    ap.add_argument("--version", action="version", version=f"avmac {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, caps=False, budgets=False):
        p.add_argument("--channel", required=True, help="builtin name or channel JSON file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)
        p.add_argument("--tol", type=float, default=DEFAULT_TOL)
        if caps:
            p.add_argument("--c1", type=float, default=0.0)
            p.add_argument("--c2", type=float, default=0.0)
            p.add_argument("--nats", action="store_true", help="read --c1/--c2 in nats")
        if budgets:
            p.add_argument("--p-restarts", type=int, default=256)
            p.add_argument("--nu", type=int, default=None)
        p.add_argument("--q-grid", type=int, default=128)

    p = sub.add_parser("symm", help="all four symmetrizability verdicts")
    common(p)
    p.set_defaults(func=cmd_symm)

    p = sub.add_parser("region", help="inner approximation of the capacity region")
    common(p, caps=True, budgets=True)
    p.add_argument("--thresholds", action="store_true", help="also report full-cooperation thresholds")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("dichotomy", help="deterministic region with conferencing")
    common(p, caps=True, budgets=True)
    p.set_defaults(func=cmd_dichotomy)

    p = sub.add_parser("nonconf", help="deterministic region without conferencing")
    common(p)
    p.set_defaults(func=cmd_nonconf)

    p = sub.add_parser("simulate", help="run the derandomization chain")
    common(p, caps=True)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--r1", type=float, default=0.5)
    p.add_argument("--r2", type=float, default=0.0)
    p.add_argument("--code-out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attack", help="attack random conference-free codes")
    common(p)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--m1", type=int, default=2)
    p.add_argument("--m2", type=int, default=2)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--draws", type=int, default=10_000)
    p.add_argument("--strategy", choices=["exhaustive", "greedy", "symmetrizer", "all"], default="all")
    p.add_argument("--kind", choices=list(KINDS), default="XY")
    p.add_argument("--decoder-state", type=int, default=None,
                   help="decode by ML for this fixed state instead of the uniform mixture")
    p.set_defaults(func=cmd_attack)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"avmac: error: {exc}", file=sys.stderr)
        return 2
    except ComputationError as exc:
        print(f"avmac: failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
