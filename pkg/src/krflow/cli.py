"""
Command-line entry point: run, verify and sweep.

Exit codes: 0 all selected certificates pass, 1 a certificate failed,
2 invalid configuration, input file or usage, 3 solver failure.
"""
import argparse
import asyncio
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from src.krflow.commands import handle_run, handle_sweep, handle_verify
from src.krflow.models.config import MONITOR_NAMES, SCENARIO_NAMES
from src.krflow.models.report import CommandResult
from src.krflow.settings import get_settings

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class UsageError(Exception):
    """argparse reported a usage problem."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage()
        raise UsageError(message)


def _auto_or_float(value: str) -> Union[str, float]:
    if value == "auto":
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got '{value}'")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    """Flags that override keys of the run configuration (defaults come from the schema)."""
    parser.add_argument("--config", type=Path, help="JSON or TOML run configuration; flags override its keys")
    scenario = parser.add_argument_group("scenario")
    scenario.add_argument("--scenario", choices=SCENARIO_NAMES, help="Catalog scenario (default: generic_ample)")
    scenario.add_argument("--n", type=int, help="Complex dimension, 1 or 2 (default: 2)")
    scenario.add_argument("--N", type=int, help="Points per real axis, a power of two (default: 16)")
    scenario.add_argument("--t-end", dest="t_end", type=float, help="Simulation horizon (default: 10, or T)")
    scenario.add_argument("--a", type=float, help="homogeneous: omega_0 = a I (default: 2)")
    scenario.add_argument("--b", type=float, help="homogeneous: omega_inf = b I (default: 1)")
    scenario.add_argument("--T", type=float, help="finite_time: degeneration time (default: 1)")
    scenario.add_argument("--amplitude", type=float, help="Relative size of the random potentials (default: 0.05)")
    scenario.add_argument("--scenario-seed", dest="scenario_seed", type=int, help="Seed for scenario potentials (default: --seed)")
    schedule = parser.add_argument_group("schedule and monitors")
    schedule.add_argument("--dt-out", dest="dt_out", type=float, help="Uniform snapshot spacing (default: 0.5)")
    schedule.add_argument("--times", type=float, nargs="+", help="Explicit snapshot times (replaces --dt-out)")
    schedule.add_argument("--monitors", nargs="+", choices=MONITOR_NAMES, help="Monitors to evaluate (default: all)")
    schedule.add_argument("--C-u", dest="C_u", type=_auto_or_float, help="Sup-bound constant or 'auto' (default: auto)")
    schedule.add_argument("--C-v", dest="C_v", type=float, help="Denominator constant of Psi and Phi (default: 10)")
    flow = parser.add_argument_group("integrator")
    flow.add_argument("--sigma", type=float, help="Stability factor of the explicit step rule (default: 0.63)")
    flow.add_argument("--dt-max", dest="dt_max", type=float, help="Step size cap (default: 0.02)")
    flow.add_argument("--dt-fixed", dest="dt_fixed", type=float, help="Fixed step size, bypassing the rule")
    flow.add_argument("--eps-T", dest="eps_T", type=float, help="Stop-gap before a finite horizon (default: 1e-3)")
    output = parser.add_argument_group("output")
    output.add_argument("--checkpoint-every", dest="checkpoint_every", type=int, help="Checkpoint every k snapshots (default: final only)")
    output.add_argument("--output-dir", dest="output_dir", type=Path, help="Output directory (default: $KRFLOW_OUTPUT_ROOT/<scenario>_n<n>_N<N>)")
    output.add_argument("--seed", type=int, help="Seed for random scenario potentials (default: 7)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="krflow", description="Numerical laboratory for the normalized Kähler–Ricci flow on tori")
    parser.add_argument("--log-level", dest="log_level", help="Logging level (default: $KRFLOW_LOG_LEVEL or INFO)")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = commands.add_parser("run", help="Integrate a scenario and evaluate the certificates")
    _add_run_flags(run)

    verify = commands.add_parser("verify", help="Re-run the monitors on stored checkpoints")
    verify.add_argument("paths", nargs="+", help="Checkpoint files or directories")
    _add_run_flags(verify)

    sweep = commands.add_parser("sweep", help="Run a configuration across a parameter axis")
    sweep.add_argument("--axis", required=True, help="N, dt or a scenario parameter (a, b, T, amplitude, t_end, ...)")
    sweep.add_argument("--values", nargs="*", default=[], help="Axis values")
    sweep.add_argument("--jobs", type=int, default=1, help="Points run concurrently (default: 1)")
    _add_run_flags(sweep)
    return parser


def configure_logging(level: Optional[str] = None) -> None:
    """Configure the root logger once, from the flag or the settings."""
    name = (level or get_settings().log_level).upper()
    logging.basicConfig(level=getattr(logging, name, logging.INFO), format=LOG_FORMAT)


async def dispatch(command: str, arguments: Dict[str, Any]) -> CommandResult:
    """
    Route a parsed command to its handler.

    Args:
        command: run, verify or sweep
        arguments: Parsed flags

    Returns:
        CommandResult of the handler
    """
    if command == "run":
        return await handle_run(arguments)
    elif command == "verify":
        return await handle_verify(arguments)
    elif command == "sweep":
        return await handle_sweep(arguments)
    return CommandResult(exit_code=2, text=f"Unknown command: {command}")


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run the command and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"❌ {e}")
        return 2
    configure_logging(args.log_level)
    arguments = {key: value for key, value in vars(args).items() if key not in ("command", "log_level")}
    result = asyncio.run(dispatch(args.command, arguments))
    print(result.text)
    return result.exit_code
