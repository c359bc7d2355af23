"""gbcheck - Main Command-Line Entry Point."""

from __future__ import annotations

import argparse
import logging
from typing import Optional, Sequence

from app.cli.commands import run
from app.core.presets import PRESETS
from app.core.stencils import SCHEMES
from app.data.config import TOLERANCES, RunConfig, parse_assignment, parse_list

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

DESCRIPTIONS = {
    "verify-algebra": "Chirality, supertrace routes, Pfaffians and the algebraic curvature ladder. "
    "Every check passes below the 'algebra' or 'pfaffian' tolerance.",
    "curvature": "Metric compatibility, torsion, Bianchi and normal-coordinate checks at sample "
    "points; writes a pointwise Euler form CSV.",
    "euler": "Pointwise Euler form map and the integrated Euler characteristic "
    "(0 on tori, 2 on the stereographic sphere).",
    "heat": "Local heat supertrace at small t, extrapolated to t = 0 and compared with the "
    "Euler form of the full connection; McKean-Singer on a small dense grid.",
    "mckean-singer": "Global heat supertrace Str exp(-tD²/2) on the finest dense grid under "
    "GBCHECK_MAX_DENSE_DOFS: zero and independent of t.",
    "weitzenbock": "Grid convergence order of the squared-Dirac Weitzenböck residual "
    "(at least 'weitzenbock_order').",
    "mc": "Mollified Monte Carlo heat diagonals, Lévy area moments and path diagnostics.",
    "orders": "Coupled-noise ε-order study, strong order in the step size and the "
    "first-moment drift check.",
    "ladder": "Curvature ladder: algebraic identity on random data and sampled supertraces "
    "built from Lévy areas.",
    "all": "Acceptance suite over the shipped presets; --quick reduces sizes.",
}


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--preset", choices=sorted(PRESETS), help="built-in geometry")
    source.add_argument("--spec", metavar="FILE", help="geometry spec file (.gbc)")
    parser.add_argument("--param", type=parse_assignment, action="append", metavar="NAME=VALUE",
                        help="preset parameter, e.g. amplitude=0.3 (repeatable)")
    parser.add_argument("--d", type=lambda s: parse_list(s, int), metavar="D[,D...]",
                        help="algebra dimensions")
    parser.add_argument("--N", type=lambda s: parse_list(s, int), metavar="N[,N...]",
                        help="grid points per axis")
    parser.add_argument("--t", type=parse_list, metavar="T[,T...]", help="heat times")
    parser.add_argument("--eps", type=parse_list, metavar="E[,E...]", help="epsilon values")
    parser.add_argument("--n", type=int, metavar="PATHS", help="Monte Carlo path count")
    parser.add_argument("--seed", type=int, default=0, help="top-level seed (default: 0)")
    parser.add_argument("--bandwidth", type=parse_list, metavar="BW[,BW...]",
                        help="mollifier bandwidths")
    parser.add_argument("--samples", type=int, help="random samples per algebraic check")
    parser.add_argument("--points", type=int, help="sample points per pointwise check")
    parser.add_argument("--steps", type=int, default=64, help="SDE steps per path (default: 64)")
    parser.add_argument("--derivative", choices=SCHEMES, help="first-derivative scheme")
    parser.add_argument("--drift-sign", type=float, default=1.0, choices=(1.0, -1.0),
                        help="sign of the ½b drift term (default: +1)")
    parser.add_argument("--tol", type=parse_assignment, action="append", metavar="NAME=VALUE",
                        help=f"tolerance override; names: {', '.join(TOLERANCES)}")
    parser.add_argument("--out", default="gbcheck-out", help="output directory for CSV reports")
    parser.add_argument("--quick", action="store_true", help="reduced sizes")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for INFO, -vv for DEBUG logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gbcheck",
        description="Numerical checks of the local Gauss-Bonnet-Chern theorem for "
        "metric-compatible connections with torsion.",
        epilog="Exit codes: 0 success, 2 usage error, 3 validation error, 4 tolerance failure. "
        "GBCHECK_MAX_DOFS, GBCHECK_MAX_DENSE_DOFS and GBCHECK_MAX_SECTION_DOFS override the "
        "grid memory caps.",
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, description in DESCRIPTIONS.items():
        sub = commands.add_parser(name, help=description.split(".")[0], description=description)
        _add_run_options(sub)
    return parser


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the command and return its exit code (argparse exits with 2)."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    return run(RunConfig.from_args(args))


if __name__ == "__main__":
    raise SystemExit(main())
