#!/usr/bin/env python3
"""
unif3 - Main Entry Point
Version: 1.0.0

Command line front end of the local uniformization engine: run a problem file, check a trace
against its problem, or run a seeded fuzz campaign.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

# Add src directory to Python path for imports
src_dir = Path(__file__).parent
if str(src_dir) not in sys.path:
    sys.path.insert(0, str(src_dir))

from utils.logger import get_logger, setup_logging
from utils.exceptions import ApplicationError
from config.constants import (
    APP_DESCRIPTION, APP_NAME, APP_VERSION, EXIT_ERROR, EXIT_EXHAUSTED, EXIT_VERDICT,
    FUZZ_MODES, VERDICT_EXHAUSTED, VERDICT_NOT_IMPLEMENTED,
)
from config.settings import EngineSettings
from core.driver import check, fuzz, load_problem, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=APP_NAME, description=APP_DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--log-file", default=None, help="Log file (default: logs/unif3_DATE.log)")
    parser.add_argument("--config", default=None, help="JSON settings file")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Uniformize a problem file")
    run_parser.add_argument("problem", help="Problem file (.prob)")
    run_parser.add_argument("--max-steps", type=int, default=None)
    run_parser.add_argument("--precision", type=int, default=None)
    run_parser.add_argument("--trace", default=None, help="Also write the trace to this file")

    check_parser = commands.add_parser("check", help="Replay a trace against its problem")
    check_parser.add_argument("trace")
    check_parser.add_argument("problem")

    fuzz_parser = commands.add_parser("fuzz", help="Randomized run-and-check campaign")
    fuzz_parser.add_argument("--seed", type=int, default=1)
    fuzz_parser.add_argument("--count", type=int, default=10)
    fuzz_parser.add_argument("--mode", choices=FUZZ_MODES, default="r3")
    return parser


class Unif3App:
    """Main application class for the unif3 command line."""

    def __init__(self, out=None):
        self.out = out or sys.stdout
        self.settings: Optional[EngineSettings] = None
        self.logger = get_logger("main")

    def initialize_components(self, args: argparse.Namespace):
        """Load settings, then configure logging with the command line overrides."""
        self.settings = EngineSettings(args.config)
        if args.log_level:
            self.settings.set("logging.level", args.log_level)
        if args.log_file:
            self.settings.set("logging.file", args.log_file)
        setup_logging(self.settings)

    def _print(self, line: str):
        print(line, file=self.out)

    def run_problem(self, args: argparse.Namespace) -> int:
        problem = load_problem(args.problem)
        if args.max_steps is not None:
            problem.max_steps = args.max_steps
        if args.precision is not None:
            problem.precision = args.precision
        trace = run(problem, self.settings)
        for line in trace.lines:
            self._print(line)
        if args.trace:
            trace.write(args.trace)
            self.logger.info(f"Trace written to {args.trace}")
        if trace.verdict.kind == VERDICT_EXHAUSTED:
            return EXIT_EXHAUSTED
        if trace.verdict.kind == VERDICT_NOT_IMPLEMENTED:
            return EXIT_ERROR
        return EXIT_VERDICT

    def check_trace(self, args: argparse.Namespace) -> int:
        problem = load_problem(args.problem)
        try:
            lines = Path(args.trace).read_text(encoding="utf-8").splitlines()
        except OSError as e:
            self.logger.error(f"Cannot read trace: {e}")
            return EXIT_ERROR
        report = check(lines, problem, self.settings)
        for line in report.to_lines():
            self._print(line)
        return EXIT_VERDICT if report.ok else EXIT_ERROR

    def fuzz_campaign(self, args: argparse.Namespace) -> int:
        cases = fuzz(args.seed, args.count, args.mode, lambda: EngineSettings(args.config))
        failures = 0
        for case in cases:
            self._print(case.to_text())
            if case.error is not None or not case.report.ok:
                failures += 1
        self._print(f"fuzz: mode={args.mode} seed={args.seed} cases={len(cases)} failures={failures}")
        return EXIT_VERDICT if failures == 0 else EXIT_ERROR

    def run(self, argv: Optional[List[str]] = None) -> int:
        args = build_parser().parse_args(argv)
        try:
            self.initialize_components(args)
            if args.command == "run":
                return self.run_problem(args)
            if args.command == "check":
                return self.check_trace(args)
            return self.fuzz_campaign(args)
        except ApplicationError as e:
            self.logger.error(f"{e}")
            print(f"error: {e}", file=sys.stderr)
            return EXIT_ERROR
        except KeyboardInterrupt:
            print("\nInterrupted by user", file=sys.stderr)
            return EXIT_ERROR


def main(argv: Optional[List[str]] = None):
    """Application entry point."""
    sys.exit(Unif3App().run(argv))


if __name__ == "__main__":
    main()
