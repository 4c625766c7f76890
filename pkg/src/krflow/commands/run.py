"""
run command: integrate a scenario, evaluate the monitors and write the outputs.
"""
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from src.krflow.background import build_scenario
from src.krflow.commands.config_loader import load_run_config, resolve_output_dir
from src.krflow.errors import (
    CertificateAbort,
    ConfigError,
    HorizonReached,
    KahlerLost,
    ScenarioInvariantError,
    StepFailure,
    UnsupportedDimensionError,
)
from src.krflow.estimates import MonitorSuite
from src.krflow.flow import FlowState, run
from src.krflow.models.config import RunConfig
from src.krflow.models.report import CommandResult, MonitorReport, RunSummary
from storage import CheckpointStore, write_series, write_summary

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CERTIFICATE = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3


@dataclass
class RunOutcome:
    """Everything a finished (or failed) run produced."""
    summary: RunSummary
    report: MonitorReport
    snapshots: List[FlowState] = field(default_factory=list)
    output_dir: Optional[Path] = None


def resolve_config(config: RunConfig, t_end: float, output_dir: Path) -> RunConfig:
    """Pin the defaults a run actually used so the embedded config reproduces it."""
    scenario = config.scenario.model_copy(
        update={"t_end": t_end, "seed": config.scenario.seed if config.scenario.seed is not None else config.seed}
    )
    return config.model_copy(update={"scenario": scenario, "output_dir": output_dir})


def execute_run(config: RunConfig) -> RunOutcome:
    """
    Run one configuration end to end (synchronous; sweeps call it from worker threads).

    Args:
        config: Validated run configuration

    Returns:
        RunOutcome with the summary already written to disk

    Raises:
        ScenarioInvariantError, UnsupportedDimensionError: for invalid scenarios
    """
    started = time.perf_counter()
    output_dir = resolve_output_dir(config)
    scenario = build_scenario(config.scenario, config.seed)
    resolved = resolve_config(config, scenario.t_end, output_dir)
    schedule = config.schedule.resolve(scenario.t_end)
    suite = MonitorSuite(scenario, config.monitors, config.certificates, eps_T=config.flow.eps_T)
    store = CheckpointStore(output_dir / "checkpoints")
    checkpoints: List[str] = []
    written: Dict[int, float] = {}
    seen: List[FlowState] = []

    def checkpoint(index: int, state: FlowState) -> None:
        path = store.write(scenario.n, scenario.N, state.t, state.u.values, index=index)
        checkpoints.append(str(path))
        written[index] = state.t

    def on_snapshot(index: int, state: FlowState) -> None:
        seen.append(state)
        if config.checkpoint_every and index % config.checkpoint_every == 0:
            checkpoint(index, state)

    status, exit_code, error = "completed", None, None
    snapshots: List[FlowState] = []
    logger.info(f"Starting run of {scenario.name} into {output_dir}")
    try:
        snapshots = run(scenario, schedule, config.flow, monitors=[suite], on_snapshot=on_snapshot)
    except HorizonReached as e:
        snapshots = list(e.snapshots)
        status = "horizon_reached"
        logger.info(f"Run reached the horizon stop-gap at t={e.t:.6g}")
    except StepFailure as e:
        snapshots = list(e.snapshots)
        status, exit_code, error = "solver_failure", EXIT_SOLVER, str(e)
        if e.last_state is not None:
            e.checkpoint_path = store.write(scenario.n, scenario.N, e.last_state.t, e.last_state.u.values, index=len(snapshots))
            checkpoints.append(str(e.checkpoint_path))
            error = f"{error}; last good state saved to {e.checkpoint_path}"
    except KahlerLost as e:
        status, exit_code, error = "solver_failure", EXIT_SOLVER, str(e)
    except CertificateAbort as e:
        snapshots = list(seen)
        status, exit_code, error = "certificate_abort", EXIT_CERTIFICATE, str(e)

    report = suite.finalize()
    if snapshots and exit_code != EXIT_SOLVER:
        last_index = len(snapshots) - 1
        if written.get(last_index) != snapshots[-1].t:
            checkpoint(last_index, snapshots[-1])
    if exit_code is None:
        exit_code = EXIT_OK if report.passed else EXIT_CERTIFICATE

    write_series(output_dir / "series.csv", report)
    summary = RunSummary(
        config=resolved,
        scenario=scenario.name,
        status=status,
        exit_code=exit_code,
        passed=report.passed and exit_code == EXIT_OK,
        constants=report.constants,
        certificates=report.certificates,
        skipped=report.skipped,
        final_t=report.snapshots[-1].t if report.snapshots else None,
        snapshots=len(report.snapshots),
        checkpoints=checkpoints,
        wall_time=time.perf_counter() - started,
        error=error,
    )
    write_summary(output_dir / "summary.json", summary)
    logger.info(f"Run of {scenario.name} finished: {status}, exit code {exit_code}")
    return RunOutcome(summary=summary, report=report, snapshots=snapshots, output_dir=output_dir)


def format_certificates(report: MonitorReport) -> str:
    """Console table of certificate verdicts."""
    lines = [f"{'certificate':<28} {'verdict':<7} {'margin':>12}  witness"]
    for result in sorted(report.certificates, key=lambda c: c.name):
        witness = ""
        if result.witness is not None:
            witness = f"t={result.witness.t} idx={result.witness.index} value={result.witness.value:.6g}"
        verdict = "pass" if result.passed else "FAIL"
        lines.append(f"{result.name:<28} {verdict:<7} {result.margin:>12.3e}  {witness}")
    failed = report.failures()
    if failed:
        lines.append(f"failed: {', '.join(sorted(c.name for c in failed))}")
    for reason in report.skipped:
        lines.append(f"skipped: {reason}")
    return "\n".join(lines)


async def handle_run(arguments: Dict[str, Any]) -> CommandResult:
    """
    Handle the run command.

    Args:
        arguments: Parsed command-line arguments (flags and optional config file)

    Returns:
        CommandResult: 0 all certificates pass, 1 a certificate failed,
        2 invalid configuration or scenario, 3 solver failure
    """
    try:
        config = load_run_config(arguments)
        outcome = execute_run(config)
    except (ConfigError, ScenarioInvariantError, UnsupportedDimensionError) as e:
        logger.error(f"Error in handle_run: {str(e)}")
        return CommandResult(exit_code=EXIT_USAGE, text=f"❌ {e}")
    except Exception as e:
        logger.error(f"Error in handle_run: {str(e)}")
        raise

    summary = outcome.summary
    header = (
        f"{'✅' if summary.exit_code == EXIT_OK else '❌'} Run {summary.status}: {summary.scenario}, "
        f"{summary.snapshots} snapshots, final t={summary.final_t}\n"
        f"Output: {outcome.output_dir}\n"
    )
    if summary.error:
        header += f"Error: {summary.error}\n"
    return CommandResult(
        exit_code=summary.exit_code,
        text=header + "\n" + format_certificates(outcome.report),
        output_dir=str(outcome.output_dir),
    )
