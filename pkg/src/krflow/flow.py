"""
Parabolic complex Monge-Ampère integrator.

The unknown is the potential u with omega~_t = omega_t + i ddbar u and

    du/dt = log det(omega_t + i ddbar u) - log Omega - u,    u(0) = 0,

integrated by classical RK4 with a curvature-adapted explicit step size.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np

from src.krflow.background import Scenario, background_velocity, interpolate_background
from src.krflow.errors import (
    DataCorruptionError,
    HorizonReached,
    KahlerLost,
    PositivityError,
    StepFailure,
)
from src.krflow.grid import ScalarField, check_resolution, fiber_average, levi_form_array
from src.krflow.hermitian import (
    POSITIVITY_FLOOR,
    HermitianField,
    check_positive,
    laplacian,
    log_det,
    trace_pair,
)
from src.krflow.models.config import FlowSettings

logger = logging.getLogger(__name__)

Monitor = Callable[["FlowState"], None]


@dataclass(frozen=True, eq=False)
class FlowState:
    """Coherent (u, du/dt, omega~) triple at time t."""
    t: float
    u: ScalarField
    udot: ScalarField
    g_tilde: HermitianField
    step_count: int = 0
    dt_current: float = 0.0


def _project(s: Scenario, values: np.ndarray) -> np.ndarray:
    if s.invariant_directions:
        return fiber_average(s.spec, values, s.invariant_directions)
    return values


def rhs(s: Scenario, u: ScalarField, t: float, floor: float = POSITIVITY_FLOOR) -> tuple:
    """
    Evaluate the potential equation.

    Args:
        s: Scenario
        u: Potential at time t
        t: Time
        floor: Relative positivity floor for omega~

    Returns:
        (udot, g_tilde)

    Raises:
        KahlerLost: if omega_t + i ddbar u is not positive definite
    """
    omega_t = interpolate_background(s, t)
    g_values = omega_t.values + levi_form_array(s.spec, u.values)
    try:
        check_positive(g_values, floor)
        g_tilde = HermitianField(s.spec, g_values, metric=True)
    except PositivityError as e:
        raise KahlerLost(t, e.index, e.eigenvalue) from e
    udot_values = log_det(g_tilde).values - s.log_Omega.values - u.values
    return ScalarField(s.spec, _project(s, udot_values)), g_tilde


def second_time_derivative(s: Scenario, state: FlowState) -> ScalarField:
    """d(udot)/dt = -e^{-t} <g~, omega_0 - omega_inf> + Lap(udot) - udot."""
    drift = s.omega0 - s.omega_inf
    values = (
        -math.exp(-state.t) * trace_pair(state.g_tilde, drift).values
        + laplacian(state.g_tilde, state.udot).values
        - state.udot.values
    )
    return ScalarField(s.spec, _project(s, values))


def metric_velocity(s: Scenario, state: FlowState) -> HermitianField:
    """d(omega~)/dt = -e^{-t}(omega_0 - omega_inf) + i ddbar udot."""
    return HermitianField(
        s.spec, background_velocity(s, state.t) + levi_form_array(s.spec, state.udot.values)
    )


def stability_dt(s: Scenario, g_tilde: HermitianField, flow: FlowSettings) -> float:
    """
    Explicit step size sigma / max_x lambda_max(D g~^{-1} D), capped by dt_max.

    D = diag(K_j) with K_j = N/2 on active complex directions and 0 on
    invariant ones, which reduces to sigma / (lambda_max(g~^{-1}) K^2) when
    every direction is active.
    """
    spec = s.spec
    K = np.full(spec.n, spec.N / 2.0)
    K[list(s.invariant_directions)] = 0.0
    if not np.any(K):
        return flow.dt_max
    m = np.linalg.inv(g_tilde.values)
    scaled = m * np.outer(K, K)
    lam = float(np.max(np.linalg.eigvalsh(scaled)[..., -1]))
    return min(flow.sigma / lam, flow.dt_max)


def initial_state(s: Scenario, floor: float = POSITIVITY_FLOOR) -> FlowState:
    """State at t = 0 with u = 0."""
    u = ScalarField.constant(s.spec, 0.0)
    udot, g_tilde = rhs(s, u, 0.0, floor)
    return FlowState(t=0.0, u=u, udot=udot, g_tilde=g_tilde)


def restore_state(s: Scenario, t: float, values: np.ndarray, floor: float = POSITIVITY_FLOOR) -> FlowState:
    """Rebuild a coherent state from stored potential values (udot is recomputed)."""
    u = ScalarField(s.spec, np.asarray(values, dtype=np.float64).reshape(s.spec.shape))
    udot, g_tilde = rhs(s, u, t, floor)
    return FlowState(t=t, u=u, udot=udot, g_tilde=g_tilde)


def _rk4(s: Scenario, state: FlowState, dt: float, floor: float) -> FlowState:
    t, u = state.t, state.u.values
    k1 = state.udot.values
    k2, _ = rhs(s, ScalarField(s.spec, u + 0.5 * dt * k1), t + 0.5 * dt, floor)
    k3, _ = rhs(s, ScalarField(s.spec, u + 0.5 * dt * k2.values), t + 0.5 * dt, floor)
    k4, _ = rhs(s, ScalarField(s.spec, u + dt * k3.values), t + dt, floor)
    u_new = u + (dt / 6.0) * (k1 + 2.0 * k2.values + 2.0 * k3.values + k4.values)
    u_next = ScalarField(s.spec, _project(s, u_new))
    udot, g_tilde = rhs(s, u_next, t + dt, floor)
    return FlowState(
        t=t + dt,
        u=u_next,
        udot=udot,
        g_tilde=g_tilde,
        step_count=state.step_count + 1,
        dt_current=dt,
    )


def step(
    s: Scenario,
    state: FlowState,
    flow: Optional[FlowSettings] = None,
    dt: Optional[float] = None,
    t_target: Optional[float] = None,
) -> FlowState:
    """
    Advance one RK4 step.

    The step size is `dt` if given, else flow.dt_fixed, else the stability
    rule; it is shortened to land exactly on `t_target` and on T - eps_T.

    Args:
        s: Scenario
        state: Coherent state
        flow: Integrator settings
        dt: Explicit step size (overrides the rule)
        t_target: Time the step must not overshoot

    Returns:
        New coherent state

    Raises:
        HorizonReached: if the state already sits at T - eps_T
        StepFailure: after max_halvings failed retries
    """
    flow = flow or FlowSettings()
    stop = s.horizon_stop(flow.eps_T)
    if state.t >= stop - 1e-12:
        raise HorizonReached(state.t, last_state=state)

    if dt is None:
        dt = flow.dt_fixed if flow.dt_fixed is not None else stability_dt(s, state.g_tilde, flow)
    limit = min(stop, t_target) if t_target is not None else stop
    dt = min(dt, limit - state.t)

    for attempt in range(flow.max_halvings + 1):
        try:
            return _rk4(s, state, dt, flow.positivity_floor)
        except (KahlerLost, DataCorruptionError, FloatingPointError) as e:
            logger.warning(f"Step from t={state.t:.6g} with dt={dt:.3e} rejected ({e}); halving")
            dt *= 0.5
    raise StepFailure(
        f"step from t={state.t:.6g} failed after {flow.max_halvings} halvings",
        last_state=state,
    )


def run(
    s: Scenario,
    schedule: Sequence[float],
    flow: Optional[FlowSettings] = None,
    monitors: Iterable[Monitor] = (),
    dt: Optional[float] = None,
    initial: Optional[FlowState] = None,
    on_snapshot: Optional[Callable[[int, FlowState], None]] = None,
) -> List[FlowState]:
    """
    Integrate from u(0) = 0 (or `initial`) and emit snapshots at the scheduled times.

    Args:
        s: Scenario
        schedule: Increasing output times
        flow: Integrator settings
        monitors: Callables fed every snapshot in order
        dt: Fixed step size (convergence sweeps)
        initial: Start state (restart from a checkpoint)
        on_snapshot: Called with (index, state) after the monitors

    Returns:
        Snapshots at the scheduled times

    Raises:
        HorizonReached: with the snapshots so far, the last one at T - eps_T
        StepFailure: with the snapshots so far and the last good state
    """
    flow = flow or FlowSettings()
    times = list(schedule)
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("schedule must be strictly increasing")
    state = initial or initial_state(s, flow.positivity_floor)
    if times and times[0] < state.t - 1e-12:
        raise ValueError(f"schedule starts at {times[0]} before the initial time {state.t}")
    monitors = list(monitors)
    snapshots: List[FlowState] = []

    def emit(snap: FlowState) -> None:
        check_resolution(snap.udot, f"udot at t={snap.t:.4g}")
        snapshots.append(snap)
        for monitor in monitors:
            monitor(snap)
        if on_snapshot is not None:
            on_snapshot(len(snapshots) - 1, snap)
        logger.info(f"Snapshot {len(snapshots) - 1} at t={snap.t:.6g} ({snap.step_count} steps)")

    logger.info(f"Run {s.name}: {len(times)} scheduled snapshots up to t={times[-1] if times else 0:.6g}")
    try:
        for target in times:
            while state.t < target - 1e-12:
                state = step(s, state, flow, dt=dt, t_target=target)
            # land exactly on the scheduled time
            state = replace(state, t=target) if abs(state.t - target) <= 1e-12 else state
            emit(state)
    except HorizonReached as e:
        if not snapshots or snapshots[-1].t < state.t:
            emit(state)
        logger.info(f"Run {s.name} stopped at the horizon stop-gap t={state.t:.6g}")
        raise HorizonReached(state.t, snapshots=snapshots, last_state=state) from e
    except StepFailure as e:
        e.snapshots = list(snapshots)
        logger.error(f"Run {s.name} failed at t={state.t:.6g}: {e}")
        raise
    return snapshots
