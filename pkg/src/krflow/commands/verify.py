"""
verify command: re-run the monitors on stored checkpoints.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from src.krflow.background import build_scenario
from src.krflow.commands.config_loader import load_run_config
from src.krflow.commands.run import EXIT_CERTIFICATE, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, format_certificates
from src.krflow.errors import (
    CertificateAbort,
    CheckpointFormatError,
    ConfigError,
    KahlerLost,
    ScenarioInvariantError,
    UnsupportedDimensionError,
)
from src.krflow.estimates import MonitorSuite
from src.krflow.flow import restore_state
from src.krflow.models.config import RunConfig
from src.krflow.models.report import CommandResult, MonitorReport
from storage import Checkpoint, CheckpointStore, read_summary

logger = logging.getLogger(__name__)


def collect_checkpoints(paths: Sequence[str]) -> List[Path]:
    """
    Expand the given paths into checkpoint files.

    A directory contributes its *.krfl files, or those of its checkpoints/
    subdirectory (a run output directory).
    """
    files: List[Path] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            store_dir = path / "checkpoints" if (path / "checkpoints").is_dir() else path
            files.extend(CheckpointStore(store_dir).list())
        elif path.exists():
            files.append(path)
        else:
            raise ConfigError(f"no such checkpoint or directory: {path}")
    if not files:
        raise ConfigError("no checkpoint files found")
    return files


def find_summary(paths: Sequence[str]) -> Optional[Path]:
    """summary.json next to the first path, or one directory up (run_dir/checkpoints/...)."""
    first = Path(paths[0])
    start = first if first.is_dir() else first.parent
    for candidate in (start / "summary.json", start.parent / "summary.json"):
        if candidate.exists():
            return candidate
    return None


def verify_config(arguments: Dict[str, Any]) -> RunConfig:
    """Configuration from --config/--scenario, else from the stored run summary."""
    if arguments.get("config") or arguments.get("scenario"):
        return load_run_config(arguments)
    summary_path = find_summary(arguments["paths"])
    if summary_path is None:
        raise ConfigError("no scenario given and no summary.json found next to the checkpoints")
    try:
        summary = read_summary(summary_path)
    except (CheckpointFormatError, ValueError) as e:
        raise ConfigError(f"cannot read {summary_path}: {e}") from e
    logger.info(f"Using the configuration stored in {summary_path}")
    return load_run_config(arguments, base=summary.config.model_dump(mode="json", exclude={"output_dir"}))


def format_residuals(report: MonitorReport) -> str:
    """Console table of per-snapshot residual sup-norms."""
    keys = sorted({key for snap in report.snapshots for key in snap.residuals})
    if not keys:
        return "no residuals evaluated"
    lines = ["t".ljust(12) + "".join(key.ljust(24) for key in keys)]
    for snap in report.snapshots:
        cells = [f"{snap.residuals[key]:.3e}" if key in snap.residuals else "-" for key in keys]
        lines.append(f"{snap.t:<12.6g}" + "".join(cell.ljust(24) for cell in cells))
    return "\n".join(lines)


async def handle_verify(arguments: Dict[str, Any]) -> CommandResult:
    """
    Handle the verify command.

    Args:
        arguments: 'paths' (checkpoint files or directories) plus optional
            scenario flags or config file

    Returns:
        CommandResult: 0 when every applicable monitor is within tolerance,
        1 on a certificate failure, 2 on unreadable or mismatched checkpoints
    """
    try:
        files = collect_checkpoints(arguments.get("paths") or [])
        config = verify_config(arguments)
        store = CheckpointStore(files[0].parent)
        checkpoints: List[Checkpoint] = sorted((store.read(path) for path in files), key=lambda c: c.t)
        scenario = build_scenario(config.scenario, config.seed)
    except (ConfigError, CheckpointFormatError, ScenarioInvariantError, UnsupportedDimensionError) as e:
        logger.error(f"Error in handle_verify: {str(e)}")
        return CommandResult(exit_code=EXIT_USAGE, text=f"❌ {e}")
    except Exception as e:
        logger.error(f"Error in handle_verify: {str(e)}")
        raise

    for checkpoint in checkpoints:
        if (checkpoint.n, checkpoint.N) != (scenario.n, scenario.N):
            message = (
                f"{checkpoint.path}: checkpoint has n={checkpoint.n}, N={checkpoint.N} "
                f"but the scenario has n={scenario.n}, N={scenario.N}"
            )
            logger.error(f"Error in handle_verify: {message}")
            return CommandResult(exit_code=EXIT_USAGE, text=f"❌ {message}")

    suite = MonitorSuite(scenario, config.monitors, config.certificates, eps_T=config.flow.eps_T)
    exit_code = None
    error = None
    try:
        for checkpoint in checkpoints:
            state = restore_state(scenario, checkpoint.t, checkpoint.values, config.flow.positivity_floor)
            suite.observe(state)
    except KahlerLost as e:
        exit_code, error = EXIT_SOLVER, str(e)
    except CertificateAbort as e:
        exit_code, error = EXIT_CERTIFICATE, str(e)

    report = suite.finalize()
    if exit_code is None:
        exit_code = EXIT_OK if report.passed else EXIT_CERTIFICATE
    logger.info(f"Verified {len(checkpoints)} checkpoints of {scenario.name}: exit code {exit_code}")

    header = f"{'✅' if exit_code == EXIT_OK else '❌'} Verified {len(checkpoints)} checkpoints of {scenario.name}\n"
    if error:
        header += f"Error: {error}\n"
    return CommandResult(
        exit_code=exit_code,
        text=header + "\n" + format_residuals(report) + "\n\n" + format_certificates(report),
    )
