"""
Models package for the flow laboratory.
"""
from .config import (
    CertificateConstants,
    FlowSettings,
    FourierMode,
    MatrixConfig,
    RunConfig,
    ScenarioConfig,
    ScheduleConfig,
    Tolerances,
)
from .report import CertificateResult, CommandResult, MonitorReport, RunSummary, SnapshotDiagnostics, Witness

__all__ = [
    "CertificateConstants",
    "FlowSettings",
    "FourierMode",
    "MatrixConfig",
    "RunConfig",
    "ScenarioConfig",
    "ScheduleConfig",
    "Tolerances",
    "CertificateResult",
    "CommandResult",
    "MonitorReport",
    "RunSummary",
    "SnapshotDiagnostics",
    "Witness",
]
