"""Command-line entry point.

Subcommands: fit, simulate, calibrate-prior, compare. Configuration comes
from a YAML file; --seed, --threads, --out and --replications override the
matching config fields. Any library error is reported as a single
"ERROR <code>: message" line on stderr with a nonzero exit status.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import GcstarError
from .harness import calibrate_prior_cmd, compare_cmd, fit_from_files
from .simulate import run_simulation_scenario

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gcstar",
        description="Bayesian structured additive regression for counts "
        "with a gamma-count likelihood.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, replications=False):
        p.add_argument("--config", required=True, help="YAML configuration file")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--threads", type=int, help="worker processes for replications")
        p.add_argument("--out", help="output directory")
        if replications:
            p.add_argument("--replications", type=int, help="override replication count")

    add_common(sub.add_parser("fit", help="fit configured model(s) to a CSV dataset"))
    add_common(
        sub.add_parser("simulate", help="run a simulation scenario"), replications=True
    )
    add_common(sub.add_parser("compare", help="prior x model comparison table"))

    cal = sub.add_parser("calibrate-prior", help="turn (u, a) into a prior parameter")
    cal.add_argument("--family", required=True, choices=["PC", "SD"])
    cal.add_argument("--u", type=float, required=True, help="threshold")
    cal.add_argument("--a", type=float, required=True, help="tail probability")
    return parser


def _overrides(args) -> dict:
    out = {}
    for key in ("seed", "threads", "replications"):
        if getattr(args, key, None) is not None:
            out[key] = getattr(args, key)
    if getattr(args, "out", None) is not None:
        out["out_dir"] = args.out
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "calibrate-prior":
            calibrate_prior_cmd(args.u, args.a, args.family)
            return 0
        config = load_config(args.config, **_overrides(args))
        if args.command == "fit":
            report = fit_from_files(config)
            with open(report.report_txt, "r", encoding="utf-8") as fh:
                sys.stdout.write(fh.read())
            print(f"report written to {report.report_csv}")
        elif args.command == "simulate":
            result = run_simulation_scenario(config)
            print(f"results written to {result.results_path}")
            print(f"aggregates written to {result.aggregates_path}")
        elif args.command == "compare":
            _, csv_path, txt_path = compare_cmd(config)
            with open(txt_path, "r", encoding="utf-8") as fh:
                sys.stdout.write(fh.read())
            print(f"table written to {csv_path}")
        return 0
    except GcstarError as exc:
        print(f"ERROR {exc.code}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
