"""
sweep command: run one configuration across a parameter axis and tabulate convergence.
"""
import asyncio
import copy
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from src.krflow.commands.config_loader import load_run_config, resolve_output_dir, set_dotted, validate_config
from src.krflow.commands.run import EXIT_CERTIFICATE, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, execute_run
from src.krflow.errors import ConfigError
from src.krflow.models.config import RunConfig, ScenarioConfig
from src.krflow.models.report import CommandResult
from storage import write_sweep

logger = logging.getLogger(__name__)

AXIS_KEYS = {"N": "scenario.N", "dt": "flow.dt_fixed"}
INTEGER_AXES = ("N", "n", "seed")


@dataclass
class SweepPoint:
    """One axis value and what its run produced."""
    value: float
    config: RunConfig
    status: str = "pending"
    exit_code: Optional[int] = None
    residuals: Dict[str, float] = field(default_factory=dict)
    margins: Dict[str, float] = field(default_factory=dict)
    final_u: Optional[np.ndarray] = None
    final_t: Optional[float] = None


def axis_key(axis: str) -> str:
    """Dotted config key swept by an axis name."""
    if axis in AXIS_KEYS:
        return AXIS_KEYS[axis]
    if axis in ScenarioConfig.model_fields and axis not in ("name", "B0", "B_inf", "psi0", "psi_inf"):
        return f"scenario.{axis}"
    raise ConfigError(f"unknown sweep axis '{axis}', expected N, dt or a scenario parameter")


def build_points(base: RunConfig, axis: str, values: Sequence[Any], root: Path) -> List[SweepPoint]:
    """
    One validated config per axis value, each writing to its own subdirectory.

    Raises:
        ConfigError: on an empty value list or a value the schema rejects
    """
    if not values:
        raise ConfigError("sweep needs at least one value")
    key = axis_key(axis)
    data = base.model_dump(mode="json")
    points = []
    for raw in values:
        value = int(raw) if axis in INTEGER_AXES else float(raw)
        point_data = copy.deepcopy(data)
        set_dotted(point_data, key, value)
        point_data["output_dir"] = str(root / f"{axis}_{value}")
        points.append(SweepPoint(value=value, config=validate_config(point_data)))
    return points


def run_point(point: SweepPoint) -> SweepPoint:
    """Execute one sweep point (runs in a worker thread)."""
    try:
        outcome = execute_run(point.config)
    except Exception as e:
        logger.error(f"Sweep point {point.value} failed: {str(e)}")
        point.status, point.exit_code = "error", EXIT_SOLVER
        return point
    point.status = outcome.summary.status
    point.exit_code = outcome.summary.exit_code
    for snap in outcome.report.snapshots:
        for key, value in snap.residuals.items():
            if not math.isnan(value):
                point.residuals[key] = max(point.residuals.get(key, 0.0), abs(value))
    point.margins = {c.name: c.margin for c in outcome.report.certificates}
    if outcome.snapshots:
        point.final_u = outcome.snapshots[-1].u.values
        point.final_t = outcome.snapshots[-1].t
    return point


async def run_points(points: List[SweepPoint], jobs: int) -> List[SweepPoint]:
    """Run the points concurrently, at most `jobs` at a time."""
    semaphore = asyncio.Semaphore(max(1, jobs))

    async def bounded(point: SweepPoint) -> SweepPoint:
        async with semaphore:
            return await asyncio.to_thread(run_point, point)

    return list(await asyncio.gather(*(bounded(p) for p in points)))


def _ratio(previous: Optional[float], current: Optional[float]) -> float:
    if previous is None or current is None or current == 0.0:
        return math.nan
    return previous / current


def u_difference_ratios(points: List[SweepPoint]) -> List[float]:
    """
    Successive-difference ratios |u_k - u_{k+1}| / |u_{k+1} - u_{k+2}| at the common final time.

    With step sizes halving along the points this tends to 2^p for a
    method of order p (16 for RK4).
    """
    ratios = [math.nan] * len(points)
    for k in range(len(points) - 2):
        a, b, c = points[k], points[k + 1], points[k + 2]
        if any(p.final_u is None for p in (a, b, c)) or len({a.final_t, b.final_t, c.final_t}) != 1:
            continue
        coarse = float(np.max(np.abs(a.final_u - b.final_u)))
        fine = float(np.max(np.abs(b.final_u - c.final_u)))
        ratios[k + 2] = _ratio(coarse, fine)
    return ratios


def sweep_rows(axis: str, points: List[SweepPoint]) -> List[tuple]:
    """Rows of sweep.csv: residual sup-norms, certificate margins and convergence ratios."""
    rows = []
    residual_keys = sorted({key for p in points for key in p.residuals})
    margin_keys = sorted({key for p in points for key in p.margins})
    for k, point in enumerate(points):
        previous = points[k - 1] if k > 0 else None
        for key in residual_keys:
            metric = point.residuals.get(key)
            ratio = _ratio(previous.residuals.get(key), metric) if previous else math.nan
            rows.append((axis, point.value, point.status, key, metric, ratio))
        for key in margin_keys:
            rows.append((axis, point.value, point.status, f"margin:{key}", point.margins.get(key), math.nan))
    if axis == "dt":
        for point, ratio in zip(points, u_difference_ratios(points)):
            metric = float(np.max(np.abs(point.final_u))) if point.final_u is not None else None
            rows.append((axis, point.value, point.status, "u_difference", metric, ratio))
    return rows


def sweep_exit_code(points: List[SweepPoint]) -> int:
    codes = {p.exit_code for p in points}
    if EXIT_SOLVER in codes:
        return EXIT_SOLVER
    if EXIT_CERTIFICATE in codes:
        return EXIT_CERTIFICATE
    return EXIT_OK


async def handle_sweep(arguments: Dict[str, Any]) -> CommandResult:
    """
    Handle the sweep command.

    Args:
        arguments: Run flags plus 'axis', 'values' and 'jobs'

    Returns:
        CommandResult: 0 when every point passes, 1 or 3 for the worst point,
        2 for an invalid axis, value list or configuration
    """
    try:
        base = load_run_config(arguments)
        axis = arguments.get("axis") or "N"
        root = resolve_output_dir(base) / f"sweep_{axis}"
        points = build_points(base, axis, arguments.get("values") or [], root)
    except ConfigError as e:
        logger.error(f"Error in handle_sweep: {str(e)}")
        return CommandResult(exit_code=EXIT_USAGE, text=f"❌ {e}")
    except Exception as e:
        logger.error(f"Error in handle_sweep: {str(e)}")
        raise

    jobs = int(arguments.get("jobs") or 1)
    logger.info(f"Sweeping {axis} over {[p.value for p in points]} with {jobs} jobs")
    points = await run_points(points, jobs)
    rows = sweep_rows(axis, points)
    path = write_sweep(root / "sweep.csv", rows)
    exit_code = sweep_exit_code(points)

    lines = [f"{'✅' if exit_code == EXIT_OK else '❌'} Sweep over {axis}: {len(points)} points, written to {path}"]
    for point in points:
        lines.append(f"  {axis}={point.value}: {point.status} (exit {point.exit_code})")
    ratio_rows = [r for r in rows if not math.isnan(r[5])]
    if ratio_rows:
        lines.append("")
        lines.append(f"{'value':<10} {'key':<28} {'ratio':>10}")
        for row in ratio_rows:
            lines.append(f"{row[1]!s:<10} {row[3]:<28} {row[5]:>10.3g}")
    return CommandResult(exit_code=exit_code, text="\n".join(lines), output_dir=str(root))
