"""Command-line entry point: ``oscint <subcommand> [options]``.

Exit codes: 0 when every verdict passes, 2 when any fails, 3 when some are
inconclusive and none fail, 1 for invalid input.
"""
from __future__ import annotations

import argparse
import sys

from .report import ConfigError, ExperimentConfig, emit, run


def _conditions(text: str) -> tuple:
    try:
        return tuple(tuple(int(v) for v in part.split(",")) for part in text.split(";") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"conditions look like '1,1;0,2', got {text!r}") from exc


def _int_pair(text: str) -> tuple:
    lo, hi = (int(v) for v in text.split(":"))
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oscint", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", dest="out_dir", default="oscint-out")
    common.add_argument("--format", dest="formats", action="append", choices=["json", "csv"],
                        help="repeatable; default writes both")
    common.add_argument("--print", dest="echo", action="store_true", help="also print summary JSON")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("analyze", parents=[common], help="Newton data and predicted decay of a phase")
    p.add_argument("--phase", required=True)

    p = sub.add_parser("resolve", parents=[common], help="stopping-time resolution near a root direction")
    p.add_argument("--phase", required=True, help="the polynomial H itself (string or file)")
    p.add_argument("--edge", type=int, default=0)
    p.add_argument("--root", type=int, default=0)
    p.add_argument("--j", type=int, default=-6)
    p.add_argument("--mu", default="1/16", help="power of two, e.g. 1/16")
    p.add_argument("--eps", type=float, default=0.125)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--max-depth", type=int, default=10)
    p.add_argument("--budget", type=int, default=4_000_000)
    p.add_argument("--samples", type=int, default=200_000)

    p = sub.add_parser("decay", parents=[common], help="operator-norm decay sweep in lambda")
    p.add_argument("--phase", required=True)
    p.add_argument("--cutoff", choices=["indicator", "bump"], default="bump")
    p.add_argument("--lambda-min", type=float, default=2.0 ** 8)
    p.add_argument("--lambda-max", type=float, default=2.0 ** 14)
    p.add_argument("--points", type=int, default=7)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--iters", type=int, default=400)
    p.add_argument("--slope-tol", type=float, default=0.03)

    p = sub.add_parser("sublevel", parents=[common], help="sublevel-set operator growth in mu")
    p.add_argument("--H", dest="phase", required=True)
    p.add_argument("--domain", default=None, help="inequality file or ';'-separated list; default the unit square")
    p.add_argument("--mu-min", type=float, default=2.0 ** -12)
    p.add_argument("--mu-max", type=float, default=2.0 ** -4)
    p.add_argument("--points", type=int, default=9)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--conditions", type=_conditions, required=True)

    p = sub.add_parser("decompose", parents=[common], help="curved-trapezoid decomposition of a domain")
    p.add_argument("--domain", required=True)

    p = sub.add_parser("profile", parents=[common], help="local norms on dyadic boxes against envelopes")
    p.add_argument("--phase", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=2.0 ** 10)
    p.add_argument("--j-range", type=_int_pair, default=(-4, -1), help="lo:hi")
    p.add_argument("--k-range", type=_int_pair, default=(-4, -1), help="lo:hi")
    p.add_argument("--cutoff", choices=["indicator", "bump"], default="bump")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = {k: v for k, v in vars(args).items() if k not in ("formats", "echo") and v is not None}
    return ExperimentConfig.from_dict(values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        report = run(cfg)
    except ConfigError as exc:
        print(f"oscint: error: {exc}", file=sys.stderr)
        return 1
    try:
        emit(report, tuple(args.formats or ("json", "csv")), cfg.out_dir)
    except OSError as exc:
        print(f"oscint: error: {exc}", file=sys.stderr)
        return 1
    if args.echo:
        print(report.to_json())
    for v in report.verdicts:
        print(f"{v.verdict.upper():<12} {v.name}: {v.comparison}")
    return report.exit_code()


if __name__ == "__main__":
    sys.exit(main())
