"""
Command-line entry point.

Usage:
  python -m velocity_turnpike solve    --scenario scenarios/double_integrator.json --method direct --out v.csv
  python -m velocity_turnpike sweep    --scenario scenarios/double_integrator_sweep.json --out results/
  python -m velocity_turnpike steady   --scenario scenarios/damped.json
  python -m velocity_turnpike turnpike --scenario scenarios/double_integrator_sweep.json --out report/

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 I/O error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from .cli import cmd_solve, cmd_steady, cmd_sweep, cmd_turnpike, load_scenario
from .config import get_settings, reset_settings
from .errors import NUMERICAL_ERRORS, VALIDATION_ERRORS, ConvergenceError
from .model import SolveMethod

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="velocity_turnpike",
        description="Optimal control and velocity-turnpike analysis for translation-symmetric systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    methods = [m.value for m in SolveMethod]

    def common(p: argparse.ArgumentParser, out_help: Optional[str]) -> None:
        p.add_argument("--scenario", required=True, type=Path, help="scenario file (JSON)")
        p.add_argument("--quiet", action="store_true", help="only log warnings and errors")
        if out_help:
            p.add_argument("--out", type=Path, help=out_help)

    p = sub.add_parser("solve", help="solve one horizon and write the trajectory CSV")
    common(p, "output CSV (default: standard output)")
    p.add_argument("--method", choices=methods, help="solver (default: analytic when available, else direct)")

    p = sub.add_parser("sweep", help="solve every horizon in ocp.T_sweep")
    common(p, "output directory (default: ./sweep)")
    p.add_argument("--method", choices=methods)

    p = sub.add_parser("steady", help="optimal velocity steady state")
    common(p, None)

    p = sub.add_parser("turnpike", help="turnpike and dissipativity report over the sweep")
    common(p, "output directory (default: ./turnpike)")
    p.add_argument("--method", choices=methods)
    return parser


def configure_logging(quiet: bool) -> None:
    level = logging.WARNING if quiet else getattr(logging, get_settings().log_level, logging.INFO)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def run(args: argparse.Namespace) -> None:
    scenario = load_scenario(args.scenario)
    if args.command == "solve":
        cmd_solve(scenario, args.method, args.out)
    elif args.command == "sweep":
        cmd_sweep(scenario, args.out or Path("sweep"), args.method)
    elif args.command == "steady":
        cmd_steady(scenario)
    elif args.command == "turnpike":
        cmd_turnpike(scenario, args.out or Path("turnpike"), args.method)


def main(argv: Optional[List[str]] = None) -> int:
    # Load environment variables from .env file in project root
    env_path = Path(__file__).resolve().parent.parent / ".env"
    load_dotenv(env_path)
    reset_settings()

    args = build_parser().parse_args(argv)
    configure_logging(args.quiet)
    logger.debug(f"Loading .env from: {env_path} (exists: {env_path.exists()})")

    try:
        run(args)
    except VALIDATION_ERRORS as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_INVALID
    except NUMERICAL_ERRORS as e:
        logger.error(f"Numerical failure: {e}")
        if isinstance(e, ConvergenceError) and e.history:
            logger.error(f"Residual history: {', '.join(f'{r:.3e}' for r in e.history[-10:])}")
        return EXIT_NUMERICAL
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
