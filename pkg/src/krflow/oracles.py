"""
Independent ground truth for the flow: the spatially homogeneous ODE (two
independent solvers), the Kähler–Einstein fixed point and a randomized check
of the pointwise Hermitian algebra.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad

from src.krflow.errors import DomainError
from src.krflow.hermitian import hermitian_pairing_array, trace_pair_array, wedge_ratio_array

logger = logging.getLogger(__name__)

QUAD_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class HomogeneousTrajectory:
    """Samples of the homogeneous solution u(t) with omega_0 = a I, omega_inf = b I, log Omega = -c0."""
    a: float
    b: float
    c0: float
    n: int
    t: np.ndarray
    u: np.ndarray
    udot: np.ndarray
    udot_dot: np.ndarray

    def value_at(self, t: float) -> float:
        """u at one of the sample times."""
        k = int(np.argmin(np.abs(self.t - t)))
        if abs(self.t[k] - t) > 1e-12:
            raise KeyError(f"t={t} is not a sample time")
        return float(self.u[k])


@dataclass(frozen=True)
class FixedPointReference:
    """Expected constant fields at the Kähler–Einstein fixed point."""
    u: float
    R_tw: float
    phi: float
    v: float


@dataclass(frozen=True)
class FuzzReport:
    """Outcome of the randomized algebra check."""
    passed: bool
    count: int
    worst_wedge_error: float
    worst_cauchy_schwarz: float


def _background_level(a: float, b: float, t) -> np.ndarray:
    return b + np.exp(-np.asarray(t, dtype=np.float64)) * (a - b)


def _check_domain(a: float, b: float, t_samples: np.ndarray) -> None:
    if a <= 0:
        raise DomainError(f"a must be positive, got {a}")
    level = _background_level(a, b, t_samples)
    if np.any(level <= 0):
        k = int(np.argmin(level))
        raise DomainError(f"b + e^(-t)(a - b) = {level[k]:.3e} <= 0 at t={t_samples[k]:.6g}")


def _forcing(a: float, b: float, c0: float, n: int):
    def f(t: float) -> float:
        return n * math.log(b + math.exp(-t) * (a - b)) + c0

    def f_prime(t: float) -> float:
        decay = math.exp(-t) * (a - b)
        return -n * decay / (b + decay)

    return f, f_prime


def solve_homogeneous(a: float, b: float, c0: float, n: int, t_samples: Sequence[float]) -> HomogeneousTrajectory:
    """
    Homogeneous solution by quadrature: u(t) = e^{-t} int_0^t e^s [n log(b + e^{-s}(a - b)) + c0] ds.

    Args:
        a, b: omega_0 = a I, omega_inf = b I
        c0: Constant forcing (minus the log Omega offset)
        n: Complex dimension
        t_samples: Non-negative sample times

    Returns:
        HomogeneousTrajectory with u, udot and udot_dot from the ODE

    Raises:
        DomainError: if the background level b + e^{-t}(a - b) is not positive on the samples
    """
    t = np.asarray(t_samples, dtype=np.float64)
    _check_domain(a, b, t)
    f, f_prime = _forcing(a, b, c0, n)
    u = np.empty_like(t)
    for k, tk in enumerate(t):
        if tk == 0.0:
            u[k] = 0.0
            continue
        # substitute s = tk - r so the integrand e^{-r} f(tk - r) stays bounded
        integral, error = quad(
            lambda r: math.exp(-r) * f(tk - r), 0.0, tk,
            epsabs=QUAD_TOLERANCE, epsrel=QUAD_TOLERANCE, limit=200,
        )
        u[k] = integral
    udot = np.array([f(tk) for tk in t]) - u
    udot_dot = np.array([f_prime(tk) for tk in t]) - udot
    return HomogeneousTrajectory(a=a, b=b, c0=c0, n=n, t=t, u=u, udot=udot, udot_dot=udot_dot)


def solve_homogeneous_rk4(
    a: float, b: float, c0: float, n: int, t_samples: Sequence[float], dt: float = 1e-4
) -> HomogeneousTrajectory:
    """
    Homogeneous solution by classical RK4 on udot = n log(b + e^{-t}(a - b)) + c0 - u.

    Steps land exactly on each sample time.

    Raises:
        DomainError: as solve_homogeneous
    """
    t = np.asarray(t_samples, dtype=np.float64)
    _check_domain(a, b, t)
    if np.any(np.diff(t) < 0):
        raise ValueError("sample times must be non-decreasing")
    f, f_prime = _forcing(a, b, c0, n)

    def rhs(time: float, value: float) -> float:
        return f(time) - value

    u = np.empty_like(t)
    time, value = 0.0, 0.0
    for k, target in enumerate(t):
        while time < target - 1e-15:
            h = min(dt, target - time)
            k1 = rhs(time, value)
            k2 = rhs(time + 0.5 * h, value + 0.5 * h * k1)
            k3 = rhs(time + 0.5 * h, value + 0.5 * h * k2)
            k4 = rhs(time + h, value + h * k3)
            value += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            time += h
        time = float(target)
        u[k] = value
    udot = np.array([f(tk) for tk in t]) - u
    udot_dot = np.array([f_prime(tk) for tk in t]) - udot
    return HomogeneousTrajectory(a=a, b=b, c0=c0, n=n, t=t, u=u, udot=udot, udot_dot=udot_dot)


def ke_fixed_point_reference(B, n: int, log_omega: Optional[float] = None) -> FixedPointReference:
    """
    Invariants of the stationary solution omega_0 = omega_inf = B with Omega = det B.

    Args:
        B: Constant positive definite metric (n x n)
        n: Complex dimension
        log_omega: Constant log Omega, checked against log det B when given

    Returns:
        (u = 0, R_tw = -n, phi = n, v = 0)

    Raises:
        DomainError: if B is not positive definite or Omega differs from det B
    """
    B = np.asarray(B, dtype=np.complex128).reshape(n, n)
    eig = np.linalg.eigvalsh(B)
    if eig[0] <= 0:
        raise DomainError(f"B is not positive definite (min eigenvalue {eig[0]:.3e})")
    if log_omega is not None:
        log_det = float(np.sum(np.log(eig)))
        if abs(log_det - log_omega) > 1e-12 * (1.0 + abs(log_det)):
            raise DomainError(f"log Omega = {log_omega} differs from log det B = {log_det}; not a fixed point")
    return FixedPointReference(u=0.0, R_tw=-float(n), phi=float(n), v=0.0)


def algebra_fuzzer(seed: int = 7, count: int = 10_000, tolerance: float = 1e-12) -> FuzzReport:
    """
    Randomized check of the 2 x 2 wedge/trace chain and the Cauchy–Schwarz floor.

    Draws `count` positive Hermitian g and Hermitian alpha, then checks
    (g ^ alpha)/g^2 = tr(g^{-1} alpha)/2 and tr(g^{-1} alpha)^2 <= 2 |alpha|_g^2,
    both relative to 1 + the size of the terms.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((count, 2, 2)) + 1j * rng.standard_normal((count, 2, 2))
    g = X @ np.conj(np.swapaxes(X, -1, -2)) + 0.1 * np.eye(2)
    Y = rng.standard_normal((count, 2, 2)) + 1j * rng.standard_normal((count, 2, 2))
    alpha = 0.5 * (Y + np.conj(np.swapaxes(Y, -1, -2)))

    trace = trace_pair_array(g, alpha)
    ratio = wedge_ratio_array(g, alpha)
    wedge_error = np.abs(ratio - 0.5 * trace) / (1.0 + np.abs(trace))
    norm2 = hermitian_pairing_array(np.linalg.inv(g), alpha, alpha)
    cs_excess = (trace ** 2 - 2.0 * norm2) / (1.0 + trace ** 2 + norm2)

    worst_wedge = float(np.max(wedge_error))
    worst_cs = float(np.max(cs_excess))
    passed = worst_wedge <= tolerance and worst_cs <= tolerance
    logger.info(
        f"Algebra fuzzer (seed {seed}, {count} samples): wedge error {worst_wedge:.2e}, "
        f"Cauchy–Schwarz excess {worst_cs:.2e}, {'pass' if passed else 'FAIL'}"
    )
    return FuzzReport(passed=passed, count=count, worst_wedge_error=worst_wedge, worst_cauchy_schwarz=worst_cs)
