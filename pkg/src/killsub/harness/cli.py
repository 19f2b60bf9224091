"""Command-line entry point.

Usage::

    killsub suite  [--config FILE] [--out DIR] [--seed N] [--tol-scale X]
    killsub verify [--config FILE] [--scenario NAME ...] [--out DIR] ...

``verify``, ``curvature``, ``geodesic``, ``foliate``, ``cylinder`` and
``sweep`` run the scenarios of that kind in the configuration (all of
them, or those named with ``--scenario``); ``suite`` runs every scenario
tagged ``regression``.  Without ``--config`` the built-in suite is used.

Exit status: 0 when every check passes, 1 when a check fails or a
scenario raises, 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import ConfigError
from .config import COMMANDS, builtin_config_path, load_config
from .suite import run_many, run_suite, worker_count

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _progress(report) -> None:
    status = "PASS" if report.passed else "FAIL"
    n_ok = sum(c.passed for c in report.checks)
    line = f"{status} {report.scenario}: {n_ok}/{len(report.checks)} checks ({report.wall_clock:.1f} s)"
    if report.error:
        line += f"  error: {report.error}"
    print(line, flush=True)
    for c in report.checks:
        if not c.passed:
            print(f"    failed {c.name}: value={c.value} threshold={c.threshold} ({c.relation})",
                  flush=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="killsub",
                                     description="Numerical checks for Killing submersions.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="YAML configuration (default: built-in suite)")
    common.add_argument("--out", default="killsub-out", help="output directory (default: killsub-out)")
    common.add_argument("--seed", type=int, default=None, help="override every scenario seed")
    common.add_argument("--tol-scale", type=float, default=1.0,
                        help="multiply every tolerance and check threshold (default: 1)")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, parents=[common], help=f"run the {cmd} scenarios of the config")
        p.add_argument("--scenario", action="append", default=None,
                       help="scenario name (repeatable; default: all of this kind)")
    sub.add_parser("suite", parents=[common], help="run all scenarios tagged 'regression'")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.tol_scale <= 0:
        print("config error: --tol-scale must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = load_config(args.config or builtin_config_path())
        if args.command == "suite":
            suite = run_suite(config, out=args.out, seed=args.seed, tol_scale=args.tol_scale,
                              progress=_progress)
            print(f"{suite.n_passed}/{suite.n_checks} checks passed in {len(suite.reports)} scenarios; "
                  f"reports in {args.out}")
            return EXIT_OK if suite.passed else EXIT_FAIL
        kind = [sc["name"] for sc in config.scenarios if sc["command"] == args.command]
        names = args.scenario or kind
        for n in names:
            sc = config.scenario(n)
            if sc["command"] != args.command:
                raise ConfigError(f"scenarios: {n!r} is a {sc['command']} scenario, not {args.command}")
        if not names:
            raise ConfigError(f"scenarios: no {args.command} scenario in {config.source}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    reports = run_many(config, names, out=args.out, seed=args.seed, tol_scale=args.tol_scale,
                       workers=worker_count(config), progress=_progress)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
