from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List

from .config import parse_tolerance_overrides
from .constants import COMMANDS
from .errors import OnofriError
from .fixture_check import find_fixtures, run_fixture
from .runner import run_experiment, summarize
from .validate import ValidationError

HELP = {
    "identities": "Closed-form integrals, basic identities and the log-density identities",
    "duality": "Duality gap over seeded random admissible pairs",
    "deficit": "Whole-space Onofri deficit of random compactly supported fields",
    "lemma1": "Displacement inequality along radial Brenier maps",
    "epsilon": "Sweep of the one-parameter objective and its maximiser",
    "fd-evolve": "Rescaled fast diffusion towards the planar extremal",
    "minimize": "Constrained minimisation of the Onofri energy on a disk",
    "corollary": "Gradient-power corollary on random and extremal fields",
    "sphere": "Onofri functional on the sphere and its stereographic pullback",
}


def _print_validation(result) -> None:
    for warning in result.warnings:
        sys.stderr.write(f"WARNING: {warning}\n")
    for error in result.errors:
        sys.stderr.write(f"ERROR: {error}\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config file (defaults to data/experiments.yaml)")
    parser.add_argument("--n", type=int)
    parser.add_argument("--R", type=float, nargs="+", metavar="R")
    parser.add_argument("--resolution", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--out", help="Output directory (defaults to $ONOFRI_OUT or ./out)")
    parser.add_argument(
        "--tol",
        action="append",
        metavar="KEY=VALUE",
        help="Override one tolerance; repeatable",
    )
    parser.add_argument("--plot", action="store_true", help="Write SVG plots")
    parser.add_argument("--xlsx", action="store_true", help="Write a summary workbook")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onofri")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        _add_common(subparsers.add_parser(command, help=HELP[command]))

    fixture_parser = subparsers.add_parser("fixture-check", help="Run acceptance fixtures")
    fixture_parser.add_argument("--name")
    fixture_parser.add_argument("--all", action="store_true")
    fixture_parser.add_argument("--out", help="Base output directory for fixture runs")
    fixture_parser.add_argument(
        "--clean",
        action="store_true",
        help="Remove files written by the fixture runs",
    )
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "n": args.n,
        "R": args.R,
        "resolution": args.resolution,
        "seed": args.seed,
        "trials": args.trials,
        "output_dir": args.out,
        "plot": True if args.plot else None,
        "xlsx": True if args.xlsx else None,
        "tolerances": parse_tolerance_overrides(args.tol),
    }


def _run_command(args: argparse.Namespace) -> int:
    try:
        overrides = _overrides(args)
    except ValueError as exc:
        sys.stderr.write(f"ERROR: {exc}\n")
        return 2
    config_path = Path(args.config) if args.config else None
    try:
        paths, result, validation = run_experiment(args.command, config_path, overrides)
    except ValidationError as exc:
        _print_validation(exc.result)
        return 1
    except OnofriError as exc:
        sys.stderr.write(f"ERROR: {type(exc).__name__}: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"ERROR: Cannot write outputs: {exc}\n")
        return 2

    _print_validation(validation)
    for warning in result.warnings:
        sys.stderr.write(f"WARNING: {warning}\n")
    for row in result.failures:
        sys.stderr.write(
            f"FAIL {row.check} n={row.n} R={row.R:g}: lhs={row.lhs:.12g} rhs={row.rhs:.12g} "
            f"difference={row.difference:.3e} tolerance={row.tolerance:.3e}\n"
        )
    for path in paths:
        sys.stdout.write(f"Wrote {path}\n")
    sys.stdout.write(summarize(result.rows) + "\n")
    return 1 if result.failures else 0


def _fixture_check(args: argparse.Namespace) -> int:
    fixtures = find_fixtures()
    if not args.all:
        if not args.name:
            sys.stderr.write("ERROR: Provide --name or --all.\n")
            return 1
        fixtures = [fixture for fixture in fixtures if fixture.name == args.name]
        if not fixtures:
            sys.stderr.write(f"ERROR: No fixture named {args.name}\n")
            return 1

    output_root = Path(args.out) if args.out else None
    failed_count = 0
    generated: List[Path] = []
    for fixture in fixtures:
        try:
            result = run_fixture(fixture, output_root)
        except OSError as exc:
            sys.stderr.write(f"ERROR: Cannot write outputs for fixture {fixture.name}: {exc}\n")
            return 2
        generated.extend(result.written)
        if result.issues:
            failed_count += 1
            sys.stderr.write(f"FAIL fixture {fixture.name} ({fixture.command})\n")
            for issue in result.issues:
                sys.stderr.write(f" - {issue}\n")
        else:
            sys.stdout.write(f"OK fixture {fixture.name} ({fixture.command})\n")
            if result.warnings:
                sys.stderr.write(f"WARN fixture {fixture.name} ({fixture.command})\n")
                for warning in result.warnings:
                    sys.stderr.write(f" - {warning}\n")
    total = len(fixtures)
    sys.stdout.write(
        f"Fixture summary: {total - failed_count} passed, {failed_count} failed, {total} total.\n"
    )

    if args.clean and generated:
        removed = 0
        for path in sorted(set(generated)):
            if path.exists():
                path.unlink()
                removed += 1
        sys.stdout.write(f"Removed {removed} fixture output file(s).\n")

    return 1 if failed_count else 0


def run(argv: List[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 after --help
        return 2 if exc.code else 0
    if args.command == "fixture-check":
        return _fixture_check(args)
    return _run_command(args)


def main(argv: List[str] | None = None) -> int:
    return run(argv)
