"""Subcommand dispatch and exit-code mapping."""

from __future__ import annotations

import logging
import sys
from typing import TextIO

from app.cli.suites import SUITES, acceptance_runs
from app.core.errors import NUMERICAL_ERRORS, ExpressionError, GBCheckError, ValidationError
from app.core.models import SuiteReport
from app.data.config import RunConfig

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_TOLERANCE = 4


def _print_report(report: SuiteReport, out: TextIO) -> None:
    for check in report.checks:
        print(f"  {check.line()}", file=out)
    print(report.summary, file=out)


def exit_code(exc: GBCheckError) -> int:
    if isinstance(exc, NUMERICAL_ERRORS):
        return EXIT_TOLERANCE
    return EXIT_VALIDATION


def run(config: RunConfig, out: TextIO | None = None) -> int:
    """
    Run one subcommand (or the acceptance suite) and map the outcome to an exit code.

    Returns:
        0 when every check passed, 3 for invalid input, 4 for a failed tolerance
        or a numerical failure.
    """
    out = out or sys.stdout
    try:
        config.validate()
        runs = acceptance_runs(config) if config.command == "all" else [config]
        for sub in runs:
            sub.validate()
    except (ValidationError, ExpressionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    failed = False
    for sub in runs:
        label = sub.command if sub.geometry is None else f"{sub.command} [{sub.geometry}]"
        print(label, file=out)
        try:
            report = SUITES[sub.command](sub)
        except GBCheckError as exc:
            code = exit_code(exc)
            print(f"  ✗ {type(exc).__name__}: {exc}", file=out)
            if code == EXIT_VALIDATION:
                print(f"error: {exc}", file=sys.stderr)
                return code
            log.error("%s failed: %s", label, exc)
            failed = True
            continue
        _print_report(report, out)
        failed = failed or not report.passed
    return EXIT_TOLERANCE if failed else EXIT_OK
