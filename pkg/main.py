"""
Energy-Casimir Reduction Toolkit - Main Entry Point

A command-line tool that reduces energy-Casimir functionals to the spatial
level, computes self-gravitating steady states, lifts them back to phase
space and verifies the identities and bounds that connect the two levels.
"""

import argparse
import sys
from typing import Callable, List, Optional

from config import Config
from errors import EXIT_CONFIG
from utils import app_logger, setup_logging

# Import all handlers
from handlers import (
    # Pipeline handlers
    reduce_command,
    solve_command,
    minimize_command,
    lift_command,
    rearrange_command,
    # Verification handlers
    verify_command,
    sweep_command,
)

Handler = Callable[[argparse.Namespace], int]


def _common_options() -> argparse.ArgumentParser:
    """Flags shared by every subcommand."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="model file (key = value lines)")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    common.add_argument("--mass", type=float, metavar="F", help="total mass M")
    common.add_argument("--k", type=float, metavar="F", help="Casimir polytrope Q(f) = f^(1+1/k)")
    common.add_argument("--n", type=float, metavar="F", help="spatial polytrope Phi(rho) = rho^(1+1/n)")
    common.add_argument("--grid-nodes", type=int, metavar="N", help="number of radial cells")
    common.add_argument("--tol", type=float, metavar="F", help="fixed-point tolerance")
    common.add_argument("--log-level", metavar="LEVEL", help="override CASIMIR_LOG_LEVEL")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="casimir-reduce",
        description="Energy-Casimir reduction, steady states and verification.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = _common_options()

    def add_command(name: str, handler: Handler, help_text: str) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, parents=[common], help=help_text, description=help_text)
        sub.set_defaults(handler=handler)
        return sub

    # --- Pipeline Commands ---
    add_command("reduce", reduce_command, "tabulate Q*, Phi*, Phi and g for a Casimir Q")
    add_command("solve", solve_command, "steady state of prescribed mass by shooting")
    add_command("minimize", minimize_command, "minimize the reduced functional directly")
    lift = add_command("lift", lift_command, "lift a steady state to phase space")
    lift.add_argument("--source", choices=("solve", "minimize"), default="solve",
                      help="state to lift (default: solve)")
    rearrange = add_command("rearrange", rearrange_command, "symmetric decreasing rearrangement")
    rearrange.add_argument("--density", metavar="PATH", help="density CSV (r_outer, rho columns)")

    # --- Verification Commands ---
    add_command("verify", verify_command, "run the acceptance suite")
    sweep = add_command("sweep", sweep_command, "solve a list of masses in parallel")
    sweep.add_argument("--masses", metavar="LIST", help="comma-separated masses (default: 0.25,0.5,1,2,4)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or "")
    # Validate configuration
    if not Config.validate():
        return EXIT_CONFIG

    app_logger.info(f"Running '{args.command}'...")
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
