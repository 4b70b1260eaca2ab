from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import NoReturn, Optional, Sequence

from .config import load_config
from .errors import BlowUpError, ConfigError, NSKError
from .oracles import SUITES, format_table, run_suites
from .runner import SimulationRunner, run_report
from .snapshots import ledger_to_gnuplot

logger = logging.getLogger("nsk_capillary")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_BLOWUP = 2


class CommandParser(argparse.ArgumentParser):
    """Usage errors exit with EXIT_INVALID; 2 is reserved for blow-up."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = CommandParser(
        prog="nsk-capillary",
        description="Nonlocal-capillarity compressible Navier-Stokes-Korteweg simulator and verification harness.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="Run a configured scenario")
    run_p.add_argument("config", type=Path, help="INI config file")
    run_p.add_argument("--out", type=Path, default=None, help="Output directory (overrides [output] dir and NSK_OUT_DIR)")

    check_p = sub.add_parser("check", help="Validate configs without running")
    check_p.add_argument("config", type=Path, nargs="+", help="INI config file(s)")

    oracle_p = sub.add_parser("oracle", help="Run brute-force oracle suites")
    oracle_p.add_argument("suite", choices=[*SUITES, "all"], help="Suite name")

    plot_p = sub.add_parser("ledger-plot", help="Convert a ledger CSV to a gnuplot data file")
    plot_p.add_argument("csv", type=Path, help="Ledger CSV")
    plot_p.add_argument("--out", type=Path, default=None, help="Target .dat file")
    return parser


def _configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _report_config_error(source: Path, exc: ConfigError) -> None:
    print(f"{source}: {len(exc.errors)} problem(s)", file=sys.stderr)
    for problem in exc.errors:
        print(f"  - {problem}", file=sys.stderr)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = load_config(args.config)
        runner = SimulationRunner(config, out_dir=args.out)
        result = runner.run()
    except ConfigError as exc:
        _report_config_error(args.config, exc)
        return EXIT_INVALID
    except BlowUpError as exc:
        logger.error("%s", exc)
        return EXIT_BLOWUP
    except NSKError as exc:
        logger.error("%s", exc)
        return EXIT_INVALID
    print(run_report(result), file=sys.stderr)
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    status = EXIT_OK
    for path in args.config:
        try:
            config = load_config(path)
        except ConfigError as exc:
            _report_config_error(path, exc)
            status = EXIT_INVALID
            continue
        print(f"{path}: ok ({config.scenario.generator}, {config.grid})", file=sys.stderr)
    return status


def cmd_oracle(args: argparse.Namespace) -> int:
    results = run_suites(args.suite)
    print(format_table(results), file=sys.stderr)
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVALID


def cmd_ledger_plot(args: argparse.Namespace) -> int:
    try:
        target = ledger_to_gnuplot(args.csv, args.out)
    except (OSError, NSKError, ValueError) as exc:
        logger.error("%s: %s", args.csv, exc)
        return EXIT_INVALID
    print(f"wrote {target}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "check": cmd_check, "oracle": cmd_oracle, "ledger-plot": cmd_ledger_plot}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(list(argv) if argv is not None else None)
    _configure_logging(args.verbose, args.quiet)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
