"""
Gradient and Laplacian monitors for v along the flow.

Both use the quotient trick with the denominator C_v - v, which must stay
at least 1; a violation aborts the certificates with a hint to raise C_v.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.krflow.background import Scenario
from src.krflow.errors import CertificateAbort, UnsupportedCaseError
from src.krflow.estimates.identities import Kinematics, kinematics
from src.krflow.flow import FlowState
from src.krflow.grid import ScalarField, argext, gradient_z, levi_form_array
from src.krflow.hermitian import (
    HermitianField,
    christoffel,
    covariant_hessians,
    gradient_pairing,
    hermitian_pairing,
    laplacian,
    raised_pairing,
    ricci_and_scalar,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GradientResult:
    """Gradient diagnostics of v."""
    Psi: ScalarField
    grad_norm2: ScalarField
    defect: ScalarField
    twist_pairing: ScalarField
    mixed_gap: ScalarField
    psi_plus_phi: ScalarField

    @property
    def deviation(self) -> ScalarField:
        """Defect minus its exact value -B_inf(grad v, gradbar v)."""
        return self.defect + self.twist_pairing


@dataclass(frozen=True, eq=False)
class LaplacianResult:
    """Laplacian diagnostics of v (infinite horizon only)."""
    lap_v: ScalarField
    Phi: ScalarField
    residual: ScalarField
    identity_residual: ScalarField
    cauchy_schwarz_gap: ScalarField
    R_tw: ScalarField
    combination: ScalarField


def check_denominator(s: Scenario, v: ScalarField, C_v: float, t: float) -> ScalarField:
    """
    C_v - v, asserted >= 1.

    Raises:
        CertificateAbort: naming the worst grid point and suggesting a larger C_v
    """
    denominator = C_v - v.values
    index = argext(denominator, "min")
    worst = float(denominator[index])
    if worst < 1.0:
        needed = C_v + (1.0 - worst)
        raise CertificateAbort(
            f"C_v - v = {worst:.4g} < 1 at grid point {index}, t={t:.4g}; "
            f"raise certificates.C_v to at least {math.ceil(needed)}"
        )
    return ScalarField(s.spec, denominator)


def gradient_monitor(s: Scenario, state: FlowState, C_v: float = 10.0, kin: Optional[Kinematics] = None) -> GradientResult:
    """
    Evolution of |grad v|^2 and the quotient Psi = |grad v|^2 / (C_v - v).

    defect = (d/dt - Lap)|grad v|^2
             - [|grad v|^2 - |grad grad v|^2 - |grad gradbar v|^2 + 2 Re(grad phi, grad v)],
    whose exact value for the twisted flow is -B_inf(grad v, gradbar v).
    d/dt uses the analytic metric velocity.

    Raises:
        CertificateAbort: if C_v - v < 1 somewhere
    """
    kin = kin or kinematics(s, state)
    g = state.g_tilde
    v = kin.v
    denominator = check_denominator(s, v, C_v, state.t)
    hess = covariant_hessians(g, v, christoffel(g))
    grad_v = hess.grad
    norm2 = hess.grad_norm2

    grad_vdot = gradient_z(kin.v_dot)
    norm2_dot = 2.0 * gradient_pairing(g, grad_vdot, grad_v).real - raised_pairing(g, kin.g_dot.values, grad_v).values
    heat = norm2_dot - laplacian(g, norm2).values

    grad_phi = gradient_z(kin.phi_T)
    cross = 2.0 * gradient_pairing(g, grad_phi, grad_v).real
    bracket = norm2.values - hess.h20_norm2.values - hess.h11_norm2.values + cross
    defect = heat - bracket
    twist = raised_pairing(g, s.B_inf, grad_v)

    grad_norm2 = gradient_z(norm2)
    mixed = np.abs(gradient_pairing(g, grad_v, grad_norm2))
    mixed_bound = math.sqrt(2.0) * norm2.values * np.sqrt(hess.h20_norm2.values + hess.h11_norm2.values)

    Psi = norm2.values / denominator.values
    return GradientResult(
        Psi=ScalarField(s.spec, Psi),
        grad_norm2=norm2,
        defect=ScalarField(s.spec, defect),
        twist_pairing=twist,
        mixed_gap=ScalarField(s.spec, mixed - mixed_bound),
        psi_plus_phi=ScalarField(s.spec, Psi + kin.phi_T.values),
    )


def laplacian_monitor(s: Scenario, state: FlowState, C_v: float = 10.0, kin: Optional[Kinematics] = None) -> LaplacianResult:
    """
    Evolution of Lap v and the quotient Phi = (C_v - Lap v) / (C_v - v).

    residual = (d/dt - Lap)(Lap v) - [Lap v + (Ric_tw, i ddbar v)_g~ + Lap phi]
    identity_residual = Lap v + R_tw + phi
    cauchy_schwarz_gap = (Lap v)^2 / n - |grad gradbar v|^2, expected <= 0

    Raises:
        UnsupportedCaseError: for finite-horizon scenarios
        CertificateAbort: if C_v - v < 1 somewhere
    """
    if s.finite_horizon:
        raise UnsupportedCaseError(f"laplacian monitor needs an infinite horizon, {s.name} has T={s.T_horizon:.4g}")
    kin = kin or kinematics(s, state)
    g = state.g_tilde
    v = kin.v
    denominator = check_denominator(s, v, C_v, state.t)

    hess_v = HermitianField(s.spec, levi_form_array(s.spec, v.values))
    lap_v = laplacian(g, v)
    lap_v_dot = -hermitian_pairing(g, kin.g_dot, hess_v).values + laplacian(g, kin.v_dot).values
    heat = lap_v_dot - laplacian(g, lap_v).values
    ric_tw, R_tw = ricci_and_scalar(g, s.B_inf)
    expected = lap_v.values + hermitian_pairing(g, ric_tw, hess_v).values + laplacian(g, kin.phi_T).values

    h11_norm2 = hermitian_pairing(g, hess_v, hess_v).values
    norm2 = raised_pairing(g, g.values, gradient_z(v)).values
    Phi = (C_v - lap_v.values) / denominator.values
    Psi = norm2 / denominator.values
    return LaplacianResult(
        lap_v=lap_v,
        Phi=ScalarField(s.spec, Phi),
        residual=ScalarField(s.spec, heat - expected),
        identity_residual=ScalarField(s.spec, lap_v.values + R_tw.values + kin.phi_T.values),
        cauchy_schwarz_gap=ScalarField(s.spec, lap_v.values ** 2 / s.n - h11_norm2),
        R_tw=R_tw,
        combination=ScalarField(s.spec, Phi + 2.0 * Psi + 2.0 * kin.phi_T.values),
    )
