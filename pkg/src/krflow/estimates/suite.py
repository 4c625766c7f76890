"""
Monitor registry: evaluates the selected monitors on every snapshot and
accumulates diagnostics and certificate verdicts into a MonitorReport.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.krflow.background import Scenario, compute_C_u, target_curvature_bound
from src.krflow.errors import CertificateAbort, InsufficientData, UnsupportedCaseError, UnsupportedDimensionError
from src.krflow.estimates.certificates import (
    bounded_above,
    certificate_u_upper,
    certificate_udot_decay,
    certificate_udot_exp_decay,
    certificate_volume_decay,
    finite_time_certificates,
    plateau,
    pointwise_certificate,
    residual_certificate,
)
from src.krflow.estimates.identities import (
    difference_spacing,
    finite_difference_udot,
    kinematics,
    residual_exp_udot,
    residual_first_tderiv,
    residual_potential_decrease,
    residual_ricci_form,
    residual_v_evolution,
    residual_volume_evolution,
    scalar_curvature_identities,
    sup_abs,
)
from src.krflow.estimates.regularity import gradient_monitor, laplacian_monitor
from src.krflow.estimates.schwarz import fiberwise_ratio, schwarz_combination, schwarz_monitor
from src.krflow.flow import FlowState
from src.krflow.grid import ScalarField, argext
from src.krflow.hermitian import laplacian, min_eigenvalues
from src.krflow.models.config import MONITOR_NAMES, CertificateConstants
from src.krflow.models.report import CertificateResult, MonitorReport, SnapshotDiagnostics, Witness

logger = logging.getLogger(__name__)

PLATEAU_KEYS = ("sup_phi", "sup_Psi", "sup_grad_v", "sup_negLapV", "sup_R_tw", "sup_abs_v")


def masked_certificate(name: str, observed: np.ndarray, bound: np.ndarray, mask: np.ndarray, t: float) -> CertificateResult:
    """observed <= bound wherever mask holds."""
    gap = np.where(mask, np.broadcast_to(bound, observed.shape) - observed, np.inf)
    index = argext(gap, "min")
    margin = float(gap[index])
    return CertificateResult(
        name=name,
        passed=margin >= 0.0,
        margin=margin,
        t=t,
        witness=Witness(index=list(index), value=float(observed[index]), t=t),
    )


class MonitorSuite:
    """
    Stateful monitor driver fed one snapshot at a time (usable directly as a flow monitor).

    Snapshot-local monitors run immediately; finite-difference checks run for
    the middle of each window of three snapshots; sequence certificates run in
    finalize().
    """

    def __init__(
        self,
        s: Scenario,
        monitors: Sequence[str] = MONITOR_NAMES,
        constants: Optional[CertificateConstants] = None,
        C_u: Optional[float] = None,
        eps_T: float = 1e-3,
    ):
        """
        Initialize the suite.

        Args:
            s: Scenario being integrated
            monitors: Selected monitor names
            constants: Certificate constants and tolerances
            C_u: Resolved sup-bound constant (computed from the scenario when None)
            eps_T: Horizon stop-gap, used when computing C_u
        """
        self.s = s
        self.monitors = set(monitors)
        self.constants = constants or CertificateConstants()
        self.tol = self.constants.tolerances
        if C_u is None:
            C_u = compute_C_u(s, eps_T) if self.constants.C_u == "auto" else float(self.constants.C_u)
        self.C_u = C_u
        self.C_bis = target_curvature_bound(s)
        self.report = MonitorReport(
            scenario=s.name,
            constants={
                "C_u": C_u,
                "C_v": self.constants.C_v,
                "A_schwarz": self.constants.A_schwarz,
                "C_bis": self.C_bis if self.C_bis is not None else math.nan,
                "T_horizon": s.T_horizon,
            },
        )
        self._worst: Dict[str, CertificateResult] = {}
        self._window: List[tuple] = []
        self._witness_volume: List[tuple] = []

    # --- bookkeeping ---

    def _record(self, result: Optional[CertificateResult]) -> None:
        if result is None:
            return
        current = self._worst.get(result.name)
        if current is None or result.margin < current.margin:
            self._worst[result.name] = result

    def _skip(self, reason: str) -> None:
        if reason not in self.report.skipped:
            logger.warning(f"Monitor skipped: {reason}")
        self.report.skip(reason)

    def __call__(self, state: FlowState) -> None:
        self.observe(state)

    # --- per snapshot ---

    def observe(self, state: FlowState) -> SnapshotDiagnostics:
        """Evaluate snapshot-local monitors and the finite-difference checks of the previous snapshot."""
        s, tol, t = self.s, self.tol, state.t
        kin = kinematics(s, state)
        g = state.g_tilde
        diag = SnapshotDiagnostics(t=t, dt=state.dt_current or None)
        values = diag.values

        lap_v = laplacian(g, kin.v)
        volume = kin.udot_dot.values + state.udot.values
        values.update(
            sup_u=float(np.max(state.u.values)),
            sup_udot=float(np.max(state.udot.values)),
            min_udot=float(np.min(state.udot.values)),
            sup_v=float(np.max(kin.v.values)),
            min_v=float(np.min(kin.v.values)),
            sup_abs_v=sup_abs(kin.v),
            sup_phi=float(np.max(kin.phi_T.values)),
            sup_negLapV=float(np.max(-lap_v.values)),
            min_eig_g=float(np.min(min_eigenvalues(g.values))),
            max_volume=float(np.max(volume)),
        )
        self._witness_volume.append(argext(volume, "max"))

        R_tw, res_trace, _ = scalar_curvature_identities(s, state, kin)
        values["sup_R_tw"] = float(np.max(R_tw.values))
        diag.paths["time_derivative"] = "analytic"

        if "identities" in self.monitors:
            self._identities(state, kin, diag, R_tw, res_trace)
        if "certificates" in self.monitors:
            self._record(certificate_u_upper(s, state, self.C_u, tol.u_upper))
            self._record(certificate_udot_decay(s, state, self.C_u, tol.udot_decay))
        if "schwarz" in self.monitors:
            self._schwarz(state, kin, diag)
        if "fiberwise" in self.monitors:
            self._fiberwise(state, diag)
        if "gradient" in self.monitors:
            self._gradient(state, kin, diag)
        if "laplacian" in self.monitors:
            self._laplacian(state, kin, diag)

        self.report.snapshots.append(diag)

        self._window.append((state, kin, diag))
        if len(self._window) == 3:
            self._time_derivatives(*self._window)
            self._window.pop(0)
        return diag

    def _identities(self, state, kin, diag, R_tw, res_trace) -> None:
        s, tol, t = self.s, self.tol, state.t
        scale = 1.0 + max(s.n, sup_abs(state.udot), sup_abs(kin.udot_dot), sup_abs(R_tw), sup_abs(kin.phi_T))
        growth = math.exp(t)
        res_v = residual_v_evolution(s, state, kin)
        res_exp = residual_exp_udot(s, state, kin)
        res_pot = residual_potential_decrease(s, state, kin)
        res_form, res_ricci_trace = residual_ricci_form(s, state, kin)
        checks = {
            "res_v_evolution": (res_v, scale),
            "res_scalar_trace": (res_trace, scale),
            "res_exp_udot": (res_exp, scale * growth),
            "res_potential_decrease": (res_pot, scale * growth),
            "res_ricci_form": (res_form, scale),
            "res_ricci_trace": (res_ricci_trace, scale),
        }
        for key, (residual, allowed_scale) in checks.items():
            diag.residuals[key] = sup_abs(residual)
            self._record(residual_certificate(key[4:], residual, tol.identity, allowed_scale, t))

    def _schwarz(self, state, kin, diag) -> None:
        s, tol, t = self.s, self.tol, state.t
        try:
            result = schwarz_monitor(s, state, kin, tol.phi_floor)
        except UnsupportedCaseError as e:
            self._skip(f"schwarz: {e}")
            return
        mask = result.mask
        diag.residuals["res_schwarz_logphi"] = float(np.max(result.logphi_residual.values[mask]))
        diag.values["sup_H"] = float(np.max(result.H.values))
        diag.values["max_schwarz_twist_defect"] = float(np.max(result.twist_defect.values))
        diag.values["min_schwarz_gradient_gap"] = float(np.min(result.gradient_gap.values[mask]))
        diag.values["max_phi_excess"] = float(np.max(result.phi_excess.values[mask]))
        Q = np.log(result.phi.values[mask]) - self.constants.A_schwarz * kin.v.values[mask]
        diag.values["sup_schwarz_Q"] = float(np.max(Q))
        self._record(masked_certificate("schwarz_logphi", result.logphi_residual.values, tol.schwarz, mask, t))
        phi = result.phi.values
        self._record(masked_certificate("schwarz_phi", result.phi_excess.values, tol.schwarz * (1.0 + phi), mask, t))

    def _fiberwise(self, state, diag) -> None:
        try:
            result = fiberwise_ratio(self.s, state)
        except (UnsupportedCaseError, UnsupportedDimensionError) as e:
            self._skip(f"fiberwise: {e}")
            return
        diag.values["sup_fiber_ratio"] = float(np.max(result.direct.values))
        diag.residuals["res_fiber_chain"] = sup_abs(result.mismatch)
        scale = 1.0 + sup_abs(result.direct)
        self._record(residual_certificate("fiber_chain", result.mismatch, self.tol.fiber_chain, scale, state.t))

    def _guarded(self, monitor, state, kin):
        try:
            return monitor(self.s, state, self.constants.C_v, kin)
        except CertificateAbort as e:
            self._record(CertificateResult(name="cv_guard", passed=False, margin=-1.0, t=state.t, detail=str(e)))
            self.report.certificates = list(self._worst.values())
            raise

    def _gradient(self, state, kin, diag) -> None:
        tol, t = self.tol, state.t
        result = self._guarded(gradient_monitor, state, kin)
        norm2 = result.grad_norm2.values
        diag.values["sup_Psi"] = float(np.max(result.Psi.values))
        diag.values["sup_grad_v"] = math.sqrt(max(float(np.max(norm2)), 0.0))
        diag.values["sup_Psi_plus_phi"] = float(np.max(result.psi_plus_phi.values))
        diag.values["max_mixed_gap"] = float(np.max(result.mixed_gap.values))
        diag.residuals["res_gradient_defect"] = sup_abs(result.deviation)
        allowed = tol.gradient_defect * (1.0 + norm2)
        self._record(
            pointwise_certificate("gradient_defect_exact", ScalarField(self.s.spec, np.abs(result.deviation.values)), allowed, t)
        )
        self._record(pointwise_certificate("gradient_defect_sign", result.defect, allowed, t))

    def _laplacian(self, state, kin, diag) -> None:
        tol, t = self.tol, state.t
        if self.s.finite_horizon:
            self._skip("laplacian: finite-horizon scenario")
            return
        result = self._guarded(laplacian_monitor, state, kin)
        lap = result.lap_v.values
        diag.values["sup_Phi"] = float(np.max(result.Phi.values))
        diag.values["sup_Phi_combination"] = float(np.max(result.combination.values))
        diag.residuals["res_laplacian"] = sup_abs(result.residual)
        diag.residuals["res_laplacian_identity"] = sup_abs(result.identity_residual)
        self._record(
            pointwise_certificate(
                "laplacian_evolution", ScalarField(self.s.spec, np.abs(result.residual.values)),
                tol.laplacian_residual * (1.0 + np.abs(lap)), t,
            )
        )
        scale = 1.0 + max(sup_abs(result.lap_v), sup_abs(result.R_tw))
        self._record(residual_certificate("laplacian_identity", result.identity_residual, tol.identity, scale, t))
        self._record(
            pointwise_certificate("cauchy_schwarz", result.cauchy_schwarz_gap, tol.cauchy_schwarz * (1.0 + lap ** 2), t)
        )

    def _time_derivatives(self, before, middle, after) -> None:
        selected = self.monitors & {"identities", "time_derivatives"}
        if not selected:
            return
        s, tol = self.s, self.tol
        prev, (state, kin, diag), nxt = before[0], middle, after[0]
        try:
            fd = finite_difference_udot(prev, state, nxt)
            checks = {}
            if "identities" in selected:
                _, _, res_flow = scalar_curvature_identities(s, state, kin, udot_dot=fd)
                checks["res_scalar_flow"] = res_flow
            if "time_derivatives" in selected:
                checks["res_first_tderiv"] = residual_first_tderiv(s, prev, state, nxt, kin)
                checks["res_volume_evolution"] = residual_volume_evolution(s, prev, state, nxt, kin)
        except InsufficientData as e:
            self._skip(f"time_derivatives: {e}")
            return
        diag.paths["finite_difference"] = "centered"
        for key, residual in checks.items():
            diag.residuals[key] = sup_abs(residual)

        if s.finite_horizon:
            self._skip("time_derivatives: finite horizon, differenced residuals reported only")
            return
        # three-point truncation error is h1 h2 / 6 times the third time derivative
        allowed = tol.time_difference * difference_spacing(prev, state, nxt) + tol.identity
        scale = 1.0 + max(s.n, sup_abs(state.udot), sup_abs(kin.udot_dot))
        for key, residual in checks.items():
            self._record(residual_certificate(key[4:], residual, allowed, scale, state.t))

    # --- whole run ---

    def finalize(self) -> MonitorReport:
        """Run the sequence certificates and return the report."""
        s, tol = self.s, self.tol
        times = [snap.t for snap in self.report.snapshots]

        def track(key: str) -> list:
            return [snap.values.get(key, math.nan) for snap in self.report.snapshots]

        if self.monitors & {"identities", "time_derivatives"} and len(times) < 3:
            self._skip("time_derivatives: fewer than 3 snapshots")
        if "certificates" in self.monitors and times:
            self._record(
                certificate_volume_decay(times, track("max_volume"), tol.volume_decay, self._witness_volume)
            )
            self._record(
                certificate_udot_exp_decay(times, track("sup_udot"), track("max_volume"), tol.volume_decay)
            )
            if s.finite_horizon:
                for result in finite_time_certificates(
                    s, times, track("min_v"), track("sup_abs_v"), track("min_udot"),
                    tol.finite_time_slack, tol.finite_time_udot,
                ):
                    self._record(result)
            else:
                self._boundedness(times)
        if "schwarz" in self.monitors:
            self._combination()
        fiber = self.report.series("sup_fiber_ratio")
        if "fiberwise" in self.monitors and len(fiber[0]) > 1:
            t_start = max(tol.plateau_start, fiber[0][-1] / 2.0)
            self._record(bounded_above("fiber_ratio", *fiber, t_start, tol.plateau, tol.plateau_floor))

        self.report.certificates = list(self._worst.values())
        for result in self.report.certificates:
            if result.passed:
                logger.info(f"Certificate {result.name}: pass (margin {result.margin:.3e})")
            else:
                logger.warning(f"Certificate {result.name}: FAIL (margin {result.margin:.3e}, witness {result.witness})")
        return self.report

    def _combination(self) -> None:
        snaps = [snap for snap in self.report.snapshots if "sup_schwarz_Q" in snap.values]
        if not snaps:
            return
        try:
            result = schwarz_combination(
                [snap.t for snap in snaps],
                [snap.values["sup_schwarz_Q"] for snap in snaps],
                [snap.values["min_v"] for snap in snaps],
                self.constants.A_schwarz,
                self.C_bis,
                self.s.n,
                self.tol.schwarz,
            )
        except UnsupportedCaseError as e:
            self._skip(f"schwarz_combination: {e}")
            return
        self._record(result)

    def _boundedness(self, times: List[float]) -> None:
        s, tol = self.s, self.tol
        t_start = max(tol.plateau_start, times[-1] / 2.0)
        if times[-1] <= t_start:
            self._skip(f"plateau: run ends at t={times[-1]:.4g}, before the window start {tol.plateau_start:.4g}")
            return
        for key in PLATEAU_KEYS:
            key_times, series = self.report.series(key)
            if not series:
                continue
            result = plateau(key, key_times, series, t_start, tol.plateau, tol.plateau_floor)
            if result is None:
                self._skip(f"plateau_{key}: fewer than two snapshots in the window")
            self._record(result)
        if float(np.min(min_eigenvalues(s.omega_inf.values))) > 0.0:
            R_end = self.report.snapshots[-1].values["sup_R_tw"]
            allowed = tol.plateau * s.n
            self._record(
                CertificateResult(
                    name="twisted_einstein_limit",
                    passed=abs(R_end + s.n) <= allowed,
                    margin=allowed - abs(R_end + s.n),
                    t=times[-1],
                    witness=Witness(value=R_end, t=times[-1]),
                    detail=f"sup R_tw = {R_end:.6g}, limit {-s.n}",
                )
            )
