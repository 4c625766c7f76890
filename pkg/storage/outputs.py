"""
Writers for the plot-ready run outputs: series.csv, sweep.csv and summary.json.
"""
import csv
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

from src.krflow.errors import CheckpointFormatError
from src.krflow.models.report import MonitorReport, RunSummary

logger = logging.getLogger(__name__)

SERIES_VERSION = "# krflow-series v1"
SWEEP_VERSION = "# krflow-sweep v1"

SERIES_COLUMNS = (
    "t",
    "sup_u",
    "sup_udot",
    "sup_v",
    "min_v",
    "sup_phi",
    "sup_Psi",
    "sup_negLapV",
    "sup_R_tw",
    "res_first_tderiv",
    "res_v_evolution",
    "res_scalar_trace",
    "res_scalar_flow",
    "res_gradient_defect",
    "res_laplacian",
    "res_schwarz_logphi",
    "dt",
)

SWEEP_COLUMNS = ("axis", "value", "status", "key", "metric", "ratio")


def _format(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def series_rows(report: MonitorReport) -> List[Dict[str, float]]:
    """Flatten snapshot diagnostics into rows keyed by SERIES_COLUMNS."""
    rows = []
    for snap in report.snapshots:
        merged = {**snap.values, **snap.residuals}
        row = {column: merged.get(column, math.nan) for column in SERIES_COLUMNS}
        row["t"] = snap.t
        row["dt"] = snap.dt if snap.dt is not None else math.nan
        rows.append(row)
    return rows


def write_series(path: Union[str, Path], report: MonitorReport) -> Path:
    """
    Write series.csv: a version comment row, the header, then one row per snapshot.

    Args:
        path: Output file
        report: Monitor report of the run

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        handle.write(SERIES_VERSION + "\n")
        writer = csv.writer(handle)
        writer.writerow(SERIES_COLUMNS)
        for row in series_rows(report):
            writer.writerow([_format(row[c]) for c in SERIES_COLUMNS])
    logger.info(f"Series written: {path} ({len(report.snapshots)} rows)")
    return path


def read_series(path: Union[str, Path]) -> List[Dict[str, float]]:
    """
    Read series.csv back into float rows.

    Raises:
        CheckpointFormatError: on a missing version row or a changed column set
    """
    path = Path(path)
    with path.open(newline="") as handle:
        first = handle.readline().strip()
        if first != SERIES_VERSION:
            raise CheckpointFormatError(f"{path} does not start with '{SERIES_VERSION}'")
        reader = csv.reader(handle)
        header = tuple(next(reader))
        if header != SERIES_COLUMNS:
            raise CheckpointFormatError(f"{path} has columns {header}, expected {SERIES_COLUMNS}")
        return [{c: float(v) for c, v in zip(header, row)} for row in reader]


def write_sweep(path: Union[str, Path], rows: Iterable[Sequence]) -> Path:
    """Write sweep.csv rows (axis, value, status, key, metric, ratio) after the version row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        handle.write(SWEEP_VERSION + "\n")
        writer = csv.writer(handle)
        writer.writerow(SWEEP_COLUMNS)
        count = 0
        for row in rows:
            writer.writerow([_format(v) for v in row])
            count += 1
    logger.info(f"Sweep written: {path} ({count} rows)")
    return path


def write_summary(path: Union[str, Path], summary: RunSummary) -> Path:
    """Write summary.json."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summary.model_dump_json(indent=2))
    logger.info(f"Summary written: {path}")
    return path


def read_summary(path: Union[str, Path]) -> RunSummary:
    """Load and validate summary.json (the embedded config is re-validated)."""
    return RunSummary.model_validate_json(Path(path).read_text())
