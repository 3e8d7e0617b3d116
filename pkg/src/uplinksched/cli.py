"""
Command-line experiment runner.

Every subcommand writes CSV files into ``--out`` and prints their paths.
On failure the last line on stderr is ``error: <kind>: <message>`` and the
exit status is non-zero.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import load_config, parse_config
from .errors import ParameterError, SchedulingError
from .experiments import (FIGURE_IDS, TABLE_IDS, asymptotic_summary, baseline_summary,
                          optimize_summary, run_figure, run_table, save)

EXIT_SCHEDULING = 2
EXIT_IO = 3


def _values(text: str | None):
    if text is None:
        return None
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ParameterError(f"--values must be comma-separated numbers, got {text!r}") from None
    if not vals:
        raise ParameterError("--values must not be empty")
    return [int(v) if v == int(v) else v for v in vals]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value experiment file")
    common.add_argument("--out", metavar="DIR", help="output directory (default: config 'output')")
    common.add_argument("--seed", type=int, help="base seed for random draws")
    common.add_argument("--solver", choices=("lp", "dp"), help="exact-cover solver")
    common.add_argument("--receiver", choices=("zf", "mrc"), help="linear receiver")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--plot", action="store_true", help="also render PNG files next to the CSV")

    parser = argparse.ArgumentParser(prog="uplinksched",
                                     description="Latency-optimal uplink scheduling experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("optimize", parents=[common], help="optimal policy for the configured population")
    sub.add_parser("asymptotic", parents=[common], help="large-population parameters and regime")
    sub.add_parser("baseline", parents=[common], help="proposed policy against random grouping")
    mc = sub.add_parser("montecarlo", parents=[common], help="exact versus approximate rate")
    mc.add_argument("--values", help="comma-separated antenna counts")
    tab = sub.add_parser("table", parents=[common], help="comparison table sweep")
    tab.add_argument("id", type=int, choices=TABLE_IDS)
    tab.add_argument("--values", help="comma-separated sweep values replacing the default axis")
    fig = sub.add_parser("figure", parents=[common], help="figure data")
    fig.add_argument("id", type=int, choices=FIGURE_IDS)
    fig.add_argument("--values", help="comma-separated sweep values replacing the default axis")
    return parser


def _config(args):
    cfg = load_config(args.config)
    if args.set:
        cfg = parse_config("\n".join(args.set), base=cfg)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.solver is not None:
        changes["solver"] = args.solver
    if args.receiver is not None:
        changes["receiver"] = args.receiver
    return cfg.replace(**changes) if changes else cfg


def run(args) -> list[Path]:
    cfg = _config(args)
    out = Path(args.out or cfg.output)
    if args.command == "optimize":
        tables = list(optimize_summary(cfg))
    elif args.command == "asymptotic":
        tables = [asymptotic_summary(cfg)]
    elif args.command == "baseline":
        tables = [baseline_summary(cfg)]
    elif args.command == "montecarlo":
        tables = [run_figure(cfg, 3, _values(args.values))]
    elif args.command == "table":
        tables = [run_table(cfg, args.id, values=_values(args.values))]
    else:
        tables = [run_figure(cfg, args.id, _values(args.values))]
    written = [save(t, out) for t in tables]
    if args.plot:
        from .plotting import render

        for t in tables:
            png = render(t, out)
            if png is not None:
                written.append(png)
    return written


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        for path in run(args):
            print(path)
    except SchedulingError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return EXIT_SCHEDULING
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
