"""
Evolution identities along the flow, evaluated as pointwise residuals.

Time derivatives are analytic wherever the flow provides them (udot, the
second time derivative, the metric velocity). The checks against the actual
trajectory difference udot across neighbouring snapshots instead.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.krflow.background import Scenario
from src.krflow.errors import InsufficientData
from src.krflow.flow import FlowState, metric_velocity, second_time_derivative
from src.krflow.grid import ScalarField, levi_form_array
from src.krflow.hermitian import (
    HermitianField,
    hermitian_pairing,
    laplacian,
    ricci_and_scalar,
    trace_pair,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Kinematics:
    """Analytic time derivatives and derived fields shared by all monitors of one snapshot."""
    state: FlowState
    udot_dot: ScalarField
    g_dot: HermitianField
    v: ScalarField
    v_dot: ScalarField
    phi_T: ScalarField
    factor: float


def v_factor(s: Scenario, t: float) -> float:
    """1 - e^{t - T}, exactly 1 when T is infinite."""
    if not s.finite_horizon:
        return 1.0
    return 1.0 - math.exp(t - s.T_horizon)


def v_field(s: Scenario, state: FlowState) -> ScalarField:
    """v = (1 - e^{t-T}) udot + u (v = udot + u when T is infinite)."""
    return state.udot * v_factor(s, state.t) + state.u


def kinematics(s: Scenario, state: FlowState) -> Kinematics:
    """Compute the analytic derivatives of a coherent state once."""
    udot_dot = second_time_derivative(s, state)
    factor = v_factor(s, state.t)
    v = v_field(s, state)
    if s.finite_horizon:
        decay = math.exp(state.t - s.T_horizon)
        v_dot = state.udot * (1.0 - decay) + udot_dot * factor
    else:
        v_dot = udot_dot + state.udot
    return Kinematics(
        state=state,
        udot_dot=udot_dot,
        g_dot=metric_velocity(s, state),
        v=v,
        v_dot=v_dot,
        phi_T=trace_pair(state.g_tilde, s.omega_T),
        factor=factor,
    )


def residual_v_evolution(s: Scenario, state: FlowState, kin: Optional[Kinematics] = None) -> ScalarField:
    """(d/dt - Lap) v - [-n + <g~, omega_T>]."""
    kin = kin or kinematics(s, state)
    lap_v = laplacian(state.g_tilde, kin.v)
    return ScalarField(s.spec, kin.v_dot.values - lap_v.values + s.n - kin.phi_T.values)


def scalar_curvature_identities(
    s: Scenario,
    state: FlowState,
    kin: Optional[Kinematics] = None,
    udot_dot: Optional[ScalarField] = None,
) -> tuple:
    """
    Twisted scalar curvature and its two trace identities.

    With the analytic udot_dot the two residuals agree algebraically; pass a
    differenced udot_dot (finite_difference_udot) to test R_tw + n + d/dt(udot + u) = 0
    against the computed trajectory.

    Returns:
        (R_tw, residual_trace, residual_flow) where
        residual_trace = R_tw - [e^{-t} <g~, omega_0 - omega_inf> - Lap udot - n] and
        residual_flow = R_tw - [-n - (udot_dot + udot)]
    """
    if udot_dot is None:
        kin = kin or kinematics(s, state)
        udot_dot = kin.udot_dot
    g = state.g_tilde
    _, R_tw = ricci_and_scalar(g, s.B_inf)
    drift = trace_pair(g, s.omega0 - s.omega_inf)
    lap_udot = laplacian(g, state.udot)
    trace_form = math.exp(-state.t) * drift.values - lap_udot.values - s.n
    flow_form = -s.n - (udot_dot.values + state.udot.values)
    return (
        R_tw,
        ScalarField(s.spec, R_tw.values - trace_form),
        ScalarField(s.spec, R_tw.values - flow_form),
    )


def residual_exp_udot(s: Scenario, state: FlowState, kin: Optional[Kinematics] = None) -> ScalarField:
    """(d/dt - Lap)(e^t udot) + <g~, omega_0 - omega_inf>."""
    kin = kin or kinematics(s, state)
    g = state.g_tilde
    growth = math.exp(state.t)
    heat = growth * (kin.udot_dot.values + state.udot.values - laplacian(g, state.udot).values)
    return ScalarField(s.spec, heat + trace_pair(g, s.omega0 - s.omega_inf).values)


def residual_potential_decrease(s: Scenario, state: FlowState, kin: Optional[Kinematics] = None) -> ScalarField:
    """(d/dt - Lap)((1 - e^t) udot + u) - [-n + <g~, omega_0>]."""
    kin = kin or kinematics(s, state)
    g = state.g_tilde
    growth = math.exp(state.t)
    w = state.udot * (1.0 - growth) + state.u
    w_dot = state.udot.values * (1.0 - growth) + (1.0 - growth) * kin.udot_dot.values
    heat = w_dot - laplacian(g, w).values
    return ScalarField(s.spec, heat + s.n - trace_pair(g, s.omega0).values)


def residual_ricci_form(s: Scenario, state: FlowState, kin: Optional[Kinematics] = None) -> tuple:
    """
    Twisted Ricci form against the potential: Ric_tw + i ddbar(u + udot) + omega_inf.

    Returns:
        (form residual as a HermitianField, trace residual R_tw + Lap(u + udot) + <g~, omega_inf>)
    """
    g = state.g_tilde
    ric_tw, R_tw = ricci_and_scalar(g, s.B_inf)
    potential = state.u + state.udot
    form = ric_tw.values + levi_form_array(s.spec, potential.values) + s.omega_inf.values
    trace = R_tw.values + laplacian(g, potential).values + trace_pair(g, s.omega_inf).values
    return HermitianField(s.spec, form), ScalarField(s.spec, trace)


def three_point_derivative(prev: FlowState, prev_values: np.ndarray, state: FlowState, values: np.ndarray, nxt: FlowState, next_values: np.ndarray) -> np.ndarray:
    """Second-order time derivative at the middle snapshot from possibly uneven neighbours."""
    h1, h2 = state.t - prev.t, nxt.t - state.t
    if h1 <= 0 or h2 <= 0:
        raise InsufficientData(f"snapshots at {prev.t}, {state.t}, {nxt.t} are not strictly increasing")
    return (
        -(h2 / (h1 * (h1 + h2))) * prev_values
        + ((h2 - h1) / (h1 * h2)) * values
        + (h1 / (h2 * (h1 + h2))) * next_values
    )


def difference_spacing(prev: FlowState, state: FlowState, nxt: FlowState) -> float:
    """h1 * h2 of a snapshot triple; the three-point truncation error is h1 h2 / 6 times the third derivative."""
    return (state.t - prev.t) * (nxt.t - state.t)


def finite_difference_udot(prev: Optional[FlowState], state: FlowState, nxt: Optional[FlowState]) -> ScalarField:
    """
    udot_dot at the middle snapshot from centered differences of udot.

    Raises:
        InsufficientData: without both neighbouring snapshots
    """
    if prev is None or nxt is None:
        raise InsufficientData("first t-derivative check needs snapshots on both sides")
    fd = three_point_derivative(prev, prev.udot.values, state, state.udot.values, nxt, nxt.udot.values)
    return ScalarField(state.u.spec, fd)


def residual_first_tderiv(
    s: Scenario,
    prev: Optional[FlowState],
    state: FlowState,
    nxt: Optional[FlowState],
    kin: Optional[Kinematics] = None,
) -> ScalarField:
    """
    Finite-difference udot_dot minus [Lap udot - e^{-t} <g~, omega_0 - omega_inf> - udot].

    Raises:
        InsufficientData: without both neighbouring snapshots
    """
    fd = finite_difference_udot(prev, state, nxt)
    kin = kin or kinematics(s, state)
    return ScalarField(s.spec, fd.values - kin.udot_dot.values)


def residual_volume_evolution(
    s: Scenario,
    prev: Optional[FlowState],
    state: FlowState,
    nxt: Optional[FlowState],
    kin: Optional[Kinematics] = None,
) -> ScalarField:
    """
    (d/dt - Lap) w + w + |d omega~/dt|^2 with w = udot_dot + udot.

    d/dt w is differenced across neighbouring snapshots.

    Raises:
        InsufficientData: without both neighbouring snapshots
    """
    if prev is None or nxt is None:
        raise InsufficientData("volume evolution check needs snapshots on both sides")
    kin = kin or kinematics(s, state)
    w = kin.udot_dot + state.udot
    w_prev = second_time_derivative(s, prev) + prev.udot
    w_next = second_time_derivative(s, nxt) + nxt.udot
    w_dot = three_point_derivative(prev, w_prev.values, state, w.values, nxt, w_next.values)
    g = state.g_tilde
    speed = hermitian_pairing(g, kin.g_dot, kin.g_dot)
    return ScalarField(s.spec, w_dot - laplacian(g, w).values + w.values + speed.values)


def sup_abs(f) -> float:
    """Sup-norm of a scalar or Hermitian field."""
    return float(np.max(np.abs(f.values)))
