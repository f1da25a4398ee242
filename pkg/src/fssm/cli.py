"""Command-line entry point: ``fssm {discretize,verify,sweep,bench,image2d}``.

Every command echoes its resolved configuration to stderr as one JSON line
so that stdout carries only the command's data.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import verify as verify_mod
from .bench import run_bench, throughput_ratio
from .discretization import Method, discretize
from .errors import FSSMError
from .imaging import image2d
from .oracle import error_sweep
from .pgm import read_pgm, write_pgm
from .selection import load_weights

COMMANDS = ("discretize", "verify", "sweep", "bench", "image2d")
METHOD_TOKENS = [m.value for m in Method]


def fmt17(v: float) -> str:
    return format(float(v), ".17g")


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}") from None


def _method_list(text):
    out = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in out if t not in METHOD_TOKENS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {METHOD_TOKENS}")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--method", choices=METHOD_TOKENS, default=Method.FOH_EXACT.value)
    common.add_argument("--precision", choices=["f64", "f32"], default="f64")
    common.add_argument("--chunk", type=int, default=4096)
    common.add_argument("--workers", type=int, default=None, help="default: $FSSM_WORKERS or 1")
    common.add_argument("--out", default=None, help="output path (default: stdout where applicable)")

    parser = argparse.ArgumentParser(prog="fssm", description="First-order selective state space tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discretize", parents=[common], help="print discrete factors for one (delta, a, b)")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)

    p = sub.add_parser("verify", parents=[common], help="run every self-check suite")
    p.add_argument("--break-identity", action="store_true", help="test hook: scale bbar2 by 1.01 in the identity suite")

    p = sub.add_parser("sweep", parents=[common], help="cumulative error vs. bound over a delta sweep (CSV)")
    p.add_argument("--deltas", type=_float_list, default=[0.2, 0.1, 0.05, 0.025])
    p.add_argument("--methods", type=_method_list, default=[Method.ZOH.value, Method.FOH_EXACT.value])
    p.add_argument("--steps", type=int, default=100, help="tokens per run")

    p = sub.add_parser("bench", parents=[common], help="scan throughput (CSV)")
    p.add_argument("--T", dest="T_list", type=_int_list, default=[1 << 12, 1 << 14, 1 << 16])
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--D", type=int, default=4)
    p.add_argument("--methods", type=_method_list, default=METHOD_TOKENS)
    p.add_argument("--repeats", type=int, default=5)

    p = sub.add_parser("image2d", parents=[common], help="run the 2D scan on a binary PGM")
    p.add_argument("input", help="input P5 PGM")
    p.add_argument("--channels", type=int, default=4)
    p.add_argument("--state-dim", type=int, default=4)
    p.add_argument("--weights", default=None, help="weights blob shared by all four directions")
    return parser


def resolve(args, parser) -> dict:
    if args.workers is None:
        env = os.environ.get("FSSM_WORKERS")
        try:
            args.workers = int(env) if env else 1
        except ValueError:
            parser.error(f"FSSM_WORKERS must be an integer, got {env!r}")
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    if args.chunk < 1:
        parser.error("--chunk must be >= 1")
    if args.precision == "f32" and args.command != "bench":
        parser.error("--precision f32 is only supported by bench")
    if args.command == "discretize" and not args.delta > 0:
        parser.error(f"--delta must be > 0, got {args.delta}")
    if args.command == "sweep":
        if not args.deltas:
            parser.error("--deltas must list at least one value")
        if any(d <= 0 for d in args.deltas):
            parser.error("--deltas must all be > 0")
        if not args.methods:
            parser.error("--methods must list at least one method")
    if args.command == "bench" and (not args.T_list or min(args.T_list) < 1):
        parser.error("--T must list positive lengths")
    if args.command == "image2d" and not args.out:
        parser.error("image2d requires --out")
    return {k: v for k, v in sorted(vars(args).items())}


def _open_out(path):
    if path is None:
        return sys.stdout, False
    return open(path, "w", newline=""), True


def cmd_discretize(args, out) -> int:
    f = discretize(Method(args.method), args.delta, args.a, args.b)
    print(f"abar {float(f.abar):.12g}", file=out)
    if f.has_bbar2:
        print(f"bbar1 {float(f.bbar1):.12g}", file=out)
        print(f"bbar2 {float(f.bbar2):.12g}", file=out)
    else:
        print(f"bbar {float(f.bbar1):.12g}", file=out)
    return 0


def cmd_verify(args, out) -> int:
    results = verify_mod.run_all(seed=args.seed, break_identity=args.break_identity)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} ({r.seconds:.2f}s) {r.detail}", file=out)
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} suites passed", file=out)
    return 0 if n_pass == len(results) else 1


def write_sweep_csv(report, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["delta", "method", "max_abs_err", "bound", "slope_so_far"])
    for r in report.rows:
        w.writerow([fmt17(r.delta), r.method.value, fmt17(r.max_abs_err), fmt17(r.bound), fmt17(r.slope_so_far)])


def cmd_sweep(args, out) -> int:
    write_sweep_csv(error_sweep(args.deltas, args.methods, T=args.steps), out)
    return 0


def write_bench_csv(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["T", "method", "kernel", "workers", "tokens_per_sec"])
    for r in rows:
        w.writerow([r.T, r.method.value, r.kernel, r.workers, fmt17(r.tokens_per_sec)])


def cmd_bench(args, out) -> int:
    rows = run_bench(
        args.T_list,
        N=args.N,
        D=args.D,
        chunk=args.chunk,
        workers=args.workers,
        methods=args.methods,
        repeats=args.repeats,
        seed=args.seed,
        dtype=np.float32 if args.precision == "f32" else np.float64,
    )
    write_bench_csv(rows, out)
    for T, ratio in sorted(throughput_ratio(rows).items()):
        print(f"# T={T} fssm/foh-exact sequential throughput ratio {ratio:.3f}", file=sys.stderr)
    return 0


def cmd_image2d(args, out) -> int:
    img = read_pgm(args.input)
    weights = load_weights(args.weights) if args.weights else None
    result = image2d(
        img,
        args.seed,
        Method(args.method),
        channels=args.channels,
        state_dim=args.state_dim,
        weights=weights,
        workers=args.workers,
    )
    write_pgm(args.out, result)
    return 0


HANDLERS = {
    "discretize": cmd_discretize,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "bench": cmd_bench,
    "image2d": cmd_image2d,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = resolve(args, parser)
    print("# config " + json.dumps(config, default=str, sort_keys=True), file=sys.stderr)
    writes_file = args.command in ("sweep", "bench")
    try:
        out, close = _open_out(args.out) if writes_file else (sys.stdout, False)
        try:
            return HANDLERS[args.command](args, out)
        finally:
            if close:
                out.close()
    except (FSSMError, OSError) as exc:
        print(f"fssm {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
