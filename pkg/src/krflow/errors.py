"""
Exception types raised by the flow laboratory.

Every error carries enough context (time, grid point, value) to be reported
without re-running the computation that produced it.
"""
from typing import Any, Optional, Sequence


class KrflowError(Exception):
    """Base class for all laboratory errors."""


class DataCorruptionError(KrflowError, ValueError):
    """Raised when a field contains non-finite values."""


class PositivityError(KrflowError, ValueError):
    """Raised when a field flagged as a metric is not positive definite."""

    def __init__(self, message: str, index: Optional[tuple] = None, eigenvalue: Optional[float] = None):
        super().__init__(message)
        self.index = index
        self.eigenvalue = eigenvalue


class KahlerLost(PositivityError):
    """Raised when the evolving form leaves the Kähler cone."""

    def __init__(self, t: float, index: Optional[tuple], eigenvalue: Optional[float]):
        super().__init__(
            f"Kähler positivity lost at t={t:.6g}: min eigenvalue {eigenvalue:.3e} at grid point {index}",
            index=index,
            eigenvalue=eigenvalue,
        )
        self.t = t


class UnsupportedDimensionError(KrflowError, ValueError):
    """Raised when an operation is requested in a complex dimension it does not support."""


class UnsupportedCaseError(KrflowError, ValueError):
    """Raised when a monitor is requested for a scenario it does not apply to."""


class HorizonError(KrflowError, ValueError):
    """Raised when the background form is requested beyond the horizon T."""


class ScenarioInvariantError(KrflowError, ValueError):
    """Raised when background data violates a scenario invariant."""


class InsufficientData(KrflowError):
    """Raised when a time-derivative monitor lacks neighbouring snapshots."""


class CertificateAbort(KrflowError):
    """Raised when a certificate precondition fails at runtime (e.g. C_v - v < 1)."""


class DomainError(KrflowError, ValueError):
    """Raised when an oracle is evaluated outside its domain."""


class CheckpointFormatError(KrflowError, ValueError):
    """Raised when a checkpoint file is truncated or has a bad header."""


class HorizonReached(KrflowError):
    """Raised when the next step would cross T - eps_T."""

    def __init__(self, t: float, snapshots: Sequence[Any] = (), last_state: Any = None):
        super().__init__(f"Horizon reached at t={t:.6g}")
        self.t = t
        self.snapshots = list(snapshots)
        self.last_state = last_state


class StepFailure(KrflowError):
    """Raised when a step keeps failing after all dt halvings."""

    def __init__(self, message: str, last_state: Any = None, snapshots: Sequence[Any] = ()):
        super().__init__(message)
        self.last_state = last_state
        self.snapshots = list(snapshots)
        self.checkpoint_path = None


class ConfigError(KrflowError, ValueError):
    """Raised when a run configuration cannot be read or fails validation."""
