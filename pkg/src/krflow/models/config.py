"""
Pydantic models for scenario, integrator and run configuration.

All models reject unknown keys so that a typo in a config file is reported
instead of silently falling back to a default.
"""
import math
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCENARIO_NAMES = ("ke_fixed_point", "homogeneous", "generic_ample", "fibration", "finite_time", "inline")
MONITOR_NAMES = ("identities", "time_derivatives", "certificates", "schwarz", "fiberwise", "gradient", "laplacian")


class StrictModel(BaseModel):
    """Base model with a strict schema."""
    model_config = ConfigDict(extra="forbid")


class FourierMode(StrictModel):
    """One real Fourier mode c cos(k.x) + s sin(k.x) over the interleaved axes (x1, y1, ...)."""
    k: List[int] = Field(..., min_length=2, max_length=4)
    cos: float = 0.0
    sin: float = 0.0


class MatrixConfig(StrictModel):
    """Constant Hermitian matrix given by real and imaginary parts."""
    real: List[List[float]]
    imag: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def _square(self):
        size = len(self.real)
        if any(len(row) != size for row in self.real):
            raise ValueError("matrix must be square")
        if self.imag is not None and (len(self.imag) != size or any(len(row) != size for row in self.imag)):
            raise ValueError("imaginary part must match the real part's shape")
        return self


class ScenarioConfig(StrictModel):
    """Catalog scenario name with parameters, or inline background data."""
    name: str = Field(default="generic_ample", description="Catalog name or 'inline'")
    n: int = Field(default=2, ge=1, le=2, description="Complex dimension")
    N: int = Field(default=16, ge=8, description="Points per real axis (power of two)")
    t_end: Optional[float] = Field(default=None, gt=0, description="Simulation horizon (default: scenario's own)")
    a: float = Field(default=2.0, gt=0, description="homogeneous: omega_0 = a I")
    b: float = Field(default=1.0, gt=0, description="homogeneous: omega_inf = b I")
    T: float = Field(default=1.0, gt=0, description="finite_time: requested degeneration time")
    amplitude: Optional[float] = Field(default=None, ge=0, lt=0.8, description="Relative size of i ddbar psi")
    seed: Optional[int] = Field(default=None, description="Seed for random potentials (default: run seed)")
    B0: Optional[MatrixConfig] = None
    B_inf: Optional[MatrixConfig] = None
    psi0: List[FourierMode] = Field(default_factory=list)
    psi_inf: List[FourierMode] = Field(default_factory=list)
    log_omega_offset: float = Field(default=0.0, description="log Omega = psi_inf + offset")

    @field_validator("name")
    @classmethod
    def _known_name(cls, value: str) -> str:
        if value not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario '{value}', expected one of {', '.join(SCENARIO_NAMES)}")
        return value

    @field_validator("N")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value & (value - 1):
            raise ValueError(f"N must be a power of two, got {value}")
        return value

    @model_validator(mode="after")
    def _inline_complete(self):
        if self.name == "inline" and (self.B0 is None or self.B_inf is None):
            raise ValueError("inline scenarios need B0 and B_inf")
        for mode in self.psi0 + self.psi_inf:
            if len(mode.k) != 2 * self.n:
                raise ValueError(f"mode wavevector {mode.k} must have {2 * self.n} components")
        return self


class FlowSettings(StrictModel):
    """Integrator constants."""
    sigma: float = Field(default=0.9 * 2.8 / 4, gt=0, description="Stability factor in dt = sigma / (lambda_max K^2)")
    dt_max: float = Field(default=0.02, gt=0, description="Upper cap on the step size")
    dt_fixed: Optional[float] = Field(default=None, gt=0, description="Fixed step (convergence sweeps)")
    eps_T: float = Field(default=1e-3, gt=0, description="Stop-gap before a finite horizon")
    max_halvings: int = Field(default=20, ge=0)
    positivity_floor: float = Field(default=1e-10, gt=0)


class Tolerances(StrictModel):
    """Certificate tolerances."""
    u_upper: float = 1e-6
    udot_decay: float = 1e-6
    volume_decay: float = 1e-6
    identity: float = 1e-8
    time_difference: float = Field(default=1.0, gt=0, description="Finite-difference residuals may reach time_difference * h1 * h2 * scale")
    gradient_defect: float = 1e-6
    laplacian_residual: float = 1e-5
    schwarz: float = 1e-4
    fiber_chain: float = 1e-8
    cauchy_schwarz: float = 1e-10
    phi_floor: float = 1e-6
    plateau: float = 0.05
    plateau_floor: float = Field(default=0.5, ge=0, description="Plateau changes are measured against max(|ref|, plateau_floor * peak |value| over the run)")
    plateau_start: float = Field(default=5.0, ge=0, description="Plateau window is [max(plateau_start, t_end/2), t_end]")
    finite_time_slack: float = 0.2
    finite_time_udot: float = 1e-4


class CertificateConstants(StrictModel):
    """Constants in force for the bound certificates."""
    C_u: Union[Literal["auto"], float] = "auto"
    C_v: float = Field(default=10.0, description="Denominator constant of Psi and Phi")
    A_schwarz: float = Field(default=10.0, gt=0, description="Constant A of the Schwarz combination log phi - A v; must exceed C_bis")
    tolerances: Tolerances = Field(default_factory=Tolerances)


class ScheduleConfig(StrictModel):
    """Snapshot schedule: uniform spacing or explicit times."""
    dt_out: Optional[float] = Field(default=0.5, gt=0)
    times: Optional[List[float]] = None

    @field_validator("times")
    @classmethod
    def _increasing(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None:
            if not value:
                raise ValueError("explicit schedule must not be empty")
            if any(b <= a for a, b in zip(value, value[1:])) or value[0] < 0:
                raise ValueError("schedule must be increasing and start at t >= 0")
        return value

    @model_validator(mode="after")
    def _has_times(self):
        if self.times is None and self.dt_out is None:
            raise ValueError("schedule needs dt_out or times")
        return self

    def resolve(self, t_end: float) -> List[float]:
        """Concrete output times within [0, t_end]."""
        if self.times is not None:
            return [t for t in self.times if t <= t_end + 1e-12]
        count = int(math.floor(t_end / self.dt_out + 1e-9))
        times = [i * self.dt_out for i in range(count + 1)]
        if t_end - times[-1] > 1e-9:
            times.append(t_end)
        return times


class RunConfig(StrictModel):
    """Fully resolved run configuration (embedded in summary.json)."""
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    monitors: List[str] = Field(default_factory=lambda: list(MONITOR_NAMES))
    flow: FlowSettings = Field(default_factory=FlowSettings)
    certificates: CertificateConstants = Field(default_factory=CertificateConstants)
    output_dir: Optional[Path] = None
    checkpoint_every: int = Field(default=0, ge=0, description="Write a checkpoint every k snapshots (0: final only)")
    seed: int = Field(default=7, description="Seed for random scenario potentials")

    @field_validator("monitors")
    @classmethod
    def _known_monitors(cls, value: List[str]) -> List[str]:
        unknown = [m for m in value if m not in MONITOR_NAMES]
        if unknown:
            raise ValueError(f"unknown monitors {unknown}, expected a subset of {', '.join(MONITOR_NAMES)}")
        return value
