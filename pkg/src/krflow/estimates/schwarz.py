"""
Parabolic Schwarz monitors: phi = <g~, omega_T> against the reference map,
the second fundamental form H of that map and the fiberwise volume chain.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.krflow.background import Scenario, reference_connection, target_curvature_bound
from src.krflow.errors import UnsupportedCaseError, UnsupportedDimensionError
from src.krflow.estimates.identities import Kinematics, kinematics
from src.krflow.flow import FlowState
from src.krflow.grid import ScalarField, gradient_z
from src.krflow.hermitian import (
    HermitianField,
    christoffel,
    gradient_pairing,
    hermitian_pairing,
    laplacian,
    wedge_density_array,
)
from src.krflow.models.report import CertificateResult, Witness

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SchwarzResult:
    """Schwarz diagnostics of one snapshot; points outside `mask` (phi <= floor) are not asserted."""
    phi: ScalarField
    logphi_residual: ScalarField
    phi_excess: ScalarField
    H: ScalarField
    twist_defect: ScalarField
    gradient_gap: ScalarField
    mask: np.ndarray
    C_bis: float


@dataclass(frozen=True, eq=False)
class FiberwiseResult:
    """Fiber volume ratio from the trace chain and from direct restriction."""
    chain: ScalarField
    direct: ScalarField

    @property
    def mismatch(self) -> ScalarField:
        return self.chain - self.direct


def second_fundamental_form(s: Scenario, state: FlowState) -> ScalarField:
    """
    H = g~^{i pbar} g~^{j qbar} (omega_T)_{a bbar} D^a_{ij} conj(D^b_{pq}) with
    D = Gamma(g~) - Gamma_ref, the covariant Hessian of the linear reference map.
    """
    if s.reference_map is None:
        raise UnsupportedCaseError(f"{s.name} has no reference map; H is not applicable")
    g = state.g_tilde
    m = np.linalg.inv(g.values)
    D = christoffel(g).values - reference_connection(s)
    W = s.omega_T.values
    H = np.einsum("...pi,...qj,...ija,...ab,...pqb->...", m, m, D, W, np.conj(D)).real
    return ScalarField(s.spec, H)


def schwarz_monitor(
    s: Scenario,
    state: FlowState,
    kin: Optional[Kinematics] = None,
    phi_floor: float = 1e-6,
) -> SchwarzResult:
    """
    Evaluate the Schwarz inequalities at one snapshot.

    logphi_residual = (d/dt - Lap) log phi - (C_bis phi + 1), expected <= 0;
    phi_excess = (d/dt - Lap) phi - (phi - H + C_bis phi^2), expected <= 0, and
    equal to the twist defect -(B_inf, omega_T)_g~ when the reference is flat.
    d/dt phi = -(d omega~/dt, omega_T)_g~ is analytic.

    Raises:
        UnsupportedCaseError: without a reference map, or when omega_T vanishes
    """
    C_bis = target_curvature_bound(s)
    if C_bis is None:
        raise UnsupportedCaseError(f"{s.name} has no reference map for the Schwarz monitor")
    kin = kin or kinematics(s, state)
    g = state.g_tilde
    phi = kin.phi_T
    mask = phi.values > phi_floor
    if not np.any(mask):
        raise UnsupportedCaseError(f"phi <= {phi_floor} everywhere at t={state.t:.4g} (omega_T vanishes)")

    phi_dot = -hermitian_pairing(g, kin.g_dot, s.omega_T).values
    safe_phi = np.maximum(phi.values, phi_floor)
    log_phi = ScalarField(s.spec, np.log(safe_phi))
    log_heat = phi_dot / safe_phi - laplacian(g, log_phi).values
    logphi_residual = log_heat - (C_bis * phi.values + 1.0)

    H = second_fundamental_form(s, state)
    heat = phi_dot - laplacian(g, phi).values
    phi_excess = heat - (phi.values - H.values + C_bis * phi.values ** 2)
    twist_defect = -hermitian_pairing(g, s.omega_T, HermitianField.constant(s.spec, s.B_inf)).values

    grad_phi = gradient_z(phi)
    grad_phi_norm2 = gradient_pairing(g, grad_phi, grad_phi).real
    gradient_gap = H.values - grad_phi_norm2 / (2.0 * safe_phi)

    return SchwarzResult(
        phi=phi,
        logphi_residual=ScalarField(s.spec, logphi_residual),
        phi_excess=ScalarField(s.spec, phi_excess),
        H=H,
        twist_defect=ScalarField(s.spec, twist_defect),
        gradient_gap=ScalarField(s.spec, gradient_gap),
        mask=mask,
        C_bis=C_bis,
    )


def fiberwise_ratio(s: Scenario, state: FlowState) -> FiberwiseResult:
    """
    Fiber volume ratio omega~/omega_0 restricted to the second factor, two ways.

    chain = (1/2) <g~, omega_T> (2 det g~) / (omega_0 ^ omega_T density);
    direct = g~_{2 2bar} / (omega_0)_{2 2bar}.

    Raises:
        UnsupportedDimensionError: for n != 2
        UnsupportedCaseError: unless the reference map is the projection
    """
    if s.n != 2:
        raise UnsupportedDimensionError(f"fiberwise ratio needs n = 2, got n = {s.n}")
    if s.reference_map != "projection":
        raise UnsupportedCaseError(f"{s.name} is not a fibration")
    g = state.g_tilde.values
    phi = np.einsum("...ij,...ji->...", np.linalg.inv(g), s.omega_T.values).real
    det = np.linalg.det(g).real
    density = wedge_density_array(s.omega0.values, s.omega_T.values)
    chain = 0.5 * phi * (2.0 * det) / density
    direct = g[..., 1, 1].real / s.omega0.values[..., 1, 1].real
    return FiberwiseResult(chain=ScalarField(s.spec, chain), direct=ScalarField(s.spec, direct))


def schwarz_combination(
    times: Sequence[float],
    sup_Q: Sequence[float],
    min_v: Sequence[float],
    A: float,
    C_bis: float,
    n: int,
    tolerance: float = 1e-4,
) -> CertificateResult:
    """
    Maximum principle for Q = log phi - A v.

    (d/dt - Lap) Q <= A n + 1 - (A - C_bis) phi, so a new maximum of Q needs
    phi <= (A n + 1)/(A - C_bis) and therefore
    sup Q(t) <= max(sup Q(t_0), log((A n + 1)/(A - C_bis)) - A inf_{s <= t} min v(s)).

    Raises:
        UnsupportedCaseError: when A <= C_bis or the series is empty
    """
    if A <= C_bis:
        raise UnsupportedCaseError(f"A = {A:.6g} must exceed C_bis = {C_bis:.6g}")
    if not times:
        raise UnsupportedCaseError("no Schwarz snapshots recorded")
    ceiling = math.log((A * n + 1.0) / (A - C_bis))
    lowest = math.inf
    worst_margin, worst_k, worst_bound = math.inf, 0, math.nan
    for k, (q, v_min) in enumerate(zip(sup_Q, min_v)):
        lowest = min(lowest, v_min)
        bound = max(sup_Q[0], ceiling - A * lowest)
        margin = bound + tolerance * (1.0 + abs(bound)) - q
        if margin < worst_margin:
            worst_margin, worst_k, worst_bound = margin, k, bound
    return CertificateResult(
        name="schwarz_combination",
        passed=worst_margin >= 0.0,
        margin=worst_margin,
        t=times[worst_k],
        witness=Witness(value=sup_Q[worst_k], t=times[worst_k]),
        detail=f"A = {A:.6g}, C_bis = {C_bis:.6g}, bound {worst_bound:.6g}",
    )
