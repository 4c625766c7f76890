"""
Pydantic models for monitor output: per-snapshot diagnostics and certificates.
"""
import math
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from .config import RunConfig


class ReportModel(BaseModel):
    """Base for report models; infinities and NaN serialize as JSON constants."""
    model_config = ConfigDict(ser_json_inf_nan="constants")


class Witness(ReportModel):
    """Grid point and value where a certificate is tightest (or fails)."""
    index: List[int] = Field(default_factory=list)
    value: float
    t: Optional[float] = None


class CertificateResult(ReportModel):
    """Outcome of one bound certificate."""
    name: str
    passed: bool
    margin: float = Field(..., description="bound - observed; negative means failure")
    t: Optional[float] = None
    witness: Optional[Witness] = None
    detail: Optional[str] = None


class SnapshotDiagnostics(ReportModel):
    """Named diagnostics at one snapshot time."""
    t: float
    dt: Optional[float] = None
    values: Dict[str, float] = Field(default_factory=dict)
    residuals: Dict[str, float] = Field(default_factory=dict)
    paths: Dict[str, str] = Field(default_factory=dict)


class MonitorReport(ReportModel):
    """Time series of diagnostics plus certificate verdicts for one run."""
    scenario: str
    constants: Dict[str, float] = Field(default_factory=dict)
    snapshots: List[SnapshotDiagnostics] = Field(default_factory=list)
    certificates: List[CertificateResult] = Field(default_factory=list)
    skipped: List[str] = Field(default_factory=list)

    def skip(self, reason: str) -> None:
        if reason not in self.skipped:
            self.skipped.append(reason)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.certificates)

    def failures(self) -> List[CertificateResult]:
        return [c for c in self.certificates if not c.passed]

    def series(self, key: str) -> tuple:
        """(times, values) for a diagnostic or residual key; missing entries are skipped."""
        times, values = [], []
        for snap in self.snapshots:
            value = snap.values.get(key, snap.residuals.get(key))
            if value is not None and not math.isnan(value):
                times.append(snap.t)
                values.append(value)
        return times, values


class RunSummary(ReportModel):
    """Contents of summary.json; `config` reproduces the run."""
    format: str = "krflow-summary v1"
    config: RunConfig
    scenario: str
    status: str = Field(..., description="completed, horizon_reached, certificate_abort or solver_failure")
    exit_code: int
    passed: bool
    constants: Dict[str, Optional[float]] = Field(default_factory=dict)
    certificates: List[CertificateResult] = Field(default_factory=list)
    skipped: List[str] = Field(default_factory=list)
    final_t: Optional[float] = None
    snapshots: int = 0
    checkpoints: List[str] = Field(default_factory=list)
    wall_time: float = 0.0
    error: Optional[str] = None


class CommandResult(ReportModel):
    """Outcome of a command handler: exit code plus the text printed to the console."""
    exit_code: int
    text: str
    output_dir: Optional[str] = None
