"""
Unit tests for the evolution identities, certificates and monitors.
"""
import math
from types import SimpleNamespace

import numpy as np
import pytest

from src.krflow.background import fibration, finite_time, generic_ample, homogeneous, ke_fixed_point
from src.krflow.errors import CertificateAbort, InsufficientData, UnsupportedCaseError, UnsupportedDimensionError
from src.krflow.estimates import (
    MonitorSuite,
    bounded_above,
    certificate_udot_decay,
    certificate_udot_exp_decay,
    certificate_volume_decay,
    fiberwise_ratio,
    finite_time_certificates,
    gradient_monitor,
    kinematics,
    laplacian_monitor,
    plateau,
    residual_exp_udot,
    residual_first_tderiv,
    residual_potential_decrease,
    residual_ricci_form,
    residual_v_evolution,
    scalar_curvature_identities,
    schwarz_monitor,
    second_fundamental_form,
    v_field,
)
from src.krflow.estimates.certificates import pointwise_certificate, residual_certificate
from src.krflow.estimates.identities import finite_difference_udot, sup_abs, three_point_derivative
from src.krflow.estimates.regularity import check_denominator
from src.krflow.estimates.schwarz import schwarz_combination
from src.krflow.flow import initial_state, run, step
from src.krflow.grid import GridSpec, ScalarField
from src.krflow.hermitian import HermitianField
from src.krflow.models.config import CertificateConstants, FlowSettings, Tolerances


@pytest.fixture(scope="module")
def generic_state():
    """generic_ample on a small grid, a few steps into the flow."""
    s = generic_ample(2, 8, seed=4)
    state = initial_state(s)
    for _ in range(3):
        state = step(s, state, FlowSettings())
    return s, state


class TestIdentities:
    """Tests for the analytic evolution identities."""

    def test_fixed_point_values(self):
        """Test v = 0 and R_tw = -n at the fixed point."""
        s = ke_fixed_point(2, 8)
        state = initial_state(s)
        kin = kinematics(s, state)
        R_tw, res_trace, res_flow = scalar_curvature_identities(s, state, kin)
        assert np.allclose(R_tw.values, -2.0)
        assert np.max(np.abs(kin.v.values)) == 0.0
        assert sup_abs(res_trace) < 1e-12 and sup_abs(res_flow) < 1e-12

    def test_identities_hold_to_roundoff(self, generic_state):
        """Test every analytic identity vanishes to roundoff on generic data."""
        s, state = generic_state
        kin = kinematics(s, state)
        R_tw, res_trace, res_flow = scalar_curvature_identities(s, state, kin)
        form, trace = residual_ricci_form(s, state, kin)
        residuals = [
            residual_v_evolution(s, state, kin),
            res_trace,
            res_flow,
            residual_exp_udot(s, state, kin),
            residual_potential_decrease(s, state, kin),
            form,
            trace,
        ]
        for residual in residuals:
            assert sup_abs(residual) < 1e-9

    def test_v_field(self):
        """Test v = udot + u at infinite T and the horizon factor at finite T."""
        s = homogeneous(2.0, 1.0, n=1, N=8)
        assert np.allclose(v_field(s, initial_state(s)).values, math.log(2.0))
        s_T = finite_time(1.0, n=1, N=8)
        state = step(s_T, initial_state(s_T), FlowSettings())
        factor = 1.0 - math.exp(state.t - s_T.T_horizon)
        v = v_field(s_T, state)
        assert np.allclose(v.values, factor * state.udot.values + state.u.values)
        assert np.array_equal(kinematics(s_T, state).v.values, v.values)

    def test_flow_residual_follows_supplied_second_derivative(self, generic_state):
        """Test the twisted-equivalence residual moves one for one with the udot_dot it is given."""
        s, state = generic_state
        kin = kinematics(s, state)
        _, _, analytic = scalar_curvature_identities(s, state, kin)
        shifted = ScalarField(s.spec, kin.udot_dot.values + 0.25)
        _, _, residual = scalar_curvature_identities(s, state, kin, udot_dot=shifted)
        assert np.allclose(residual.values - analytic.values, 0.25)

    def test_differenced_udot_converges_at_second_order(self):
        """Test centered differences of udot approach the analytic udot_dot about 4x per halving of h."""
        s = generic_ample(2, 8, seed=4)
        errors = []
        for h in (0.02, 0.01):
            prev, state, nxt = run(s, [0.0, 0.3 - h, 0.3, 0.3 + h], dt=h / 4)[1:]
            errors.append(sup_abs(residual_first_tderiv(s, prev, state, nxt)))
            fd = finite_difference_udot(prev, state, nxt)
            _, _, res_flow = scalar_curvature_identities(s, state, udot_dot=fd)
            assert sup_abs(res_flow) == pytest.approx(errors[-1], abs=1e-9)
        assert errors[1] > 0.0
        assert 3.0 <= errors[0] / errors[1] <= 5.0

    def test_finite_difference_needs_neighbours(self, generic_state):
        """Test the time-derivative checks refuse a missing neighbour."""
        s, state = generic_state
        with pytest.raises(InsufficientData):
            residual_first_tderiv(s, None, state, state)

    def test_three_point_derivative_uneven(self):
        """Test the uneven three-point formula is exact on quadratics."""
        times = [0.0, 1.0, 3.0]
        values = [np.array([t ** 2]) for t in times]
        snaps = [SimpleNamespace(t=t) for t in times]
        derivative = three_point_derivative(snaps[0], values[0], snaps[1], values[1], snaps[2], values[2])
        assert derivative[0] == pytest.approx(2.0)

    def test_three_point_derivative_rejects_repeats(self):
        """Test repeated times are insufficient data."""
        snaps = [SimpleNamespace(t=t) for t in (0.0, 1.0, 1.0)]
        with pytest.raises(InsufficientData):
            three_point_derivative(snaps[0], 0.0, snaps[1], 0.0, snaps[2], 0.0)


class TestCertificates:
    """Tests for the bound certificates."""

    def test_pointwise_certificate(self):
        """Test margin and witness of a pointwise bound."""
        spec = GridSpec(1, 8)
        values = np.zeros(spec.shape)
        values[1, 2] = 0.9
        result = pointwise_certificate("demo", ScalarField(spec, values), 1.0, t=0.5)
        assert result.passed
        assert result.margin == pytest.approx(0.1)
        assert result.witness.index == [1, 2]
        failing = pointwise_certificate("demo", ScalarField(spec, values), 0.5)
        assert not failing.passed and failing.margin == pytest.approx(-0.4)

    def test_residual_certificate_on_tensor(self):
        """Test tensor residuals reduce over their matrix indices."""
        spec = GridSpec(2, 8)
        values = np.zeros(spec.shape + (2, 2), dtype=np.complex128)
        values[0, 1, 2, 3, 0, 1] = 1e-3
        values[0, 1, 2, 3, 1, 0] = 1e-3
        result = residual_certificate("demo", HermitianField(spec, values), 1e-2, 1.0)
        assert result.passed
        assert result.witness.index == [0, 1, 2, 3]

    def test_udot_decay_waits_for_t(self):
        """Test the udot decay bound is only asserted from t = 0.1."""
        s = homogeneous(2.0, 1.0, n=1, N=8)
        state = initial_state(s)
        assert certificate_udot_decay(s, state, C_u=0.7) is None

    def test_volume_decay(self):
        """Test an increasing e^t max(udot_dot + udot) fails with its time."""
        times = [0.0, 1.0, 2.0]
        decreasing = [-1.0, -1.0, -1.0]
        assert certificate_volume_decay(times, decreasing).passed
        increasing = [0.0, 0.5, 0.5 / math.e]
        result = certificate_volume_decay(times, increasing)
        assert not result.passed
        assert result.t == 1.0
        assert certificate_volume_decay([0.0], [1.0]).margin == math.inf

    def test_udot_exp_decay(self):
        """Test e^t max udot must not grow once the volume quantity is non-positive."""
        times = [0.0, 1.0, 2.0, 3.0]
        shrinking = [math.exp(-t) * 0.5 for t in times]
        assert certificate_udot_exp_decay(times, shrinking, [-1.0] * 4).passed
        growing = [0.1, 0.1, 0.1, 0.1]
        assert not certificate_udot_exp_decay(times, growing, [-1.0] * 4).passed
        assert certificate_udot_exp_decay(times, growing, [1.0] * 4).passed
        assert certificate_udot_exp_decay([0.0, 0.5], [0.1, 0.1], [-1.0, -1.0]).margin == math.inf

    def test_finite_time_certificates(self):
        """Test v and udot lower bounds before a finite horizon."""
        s = finite_time(1.0, n=1, N=8)
        times = [0.0, 0.1, 0.5, 0.9]
        results = finite_time_certificates(s, times, [0.0, -0.1, -0.2, -0.3], [0.0, 0.1, 0.2, 1.0], [0.0, -0.1, -0.2, -0.3])
        names = {r.name: r for r in results}
        assert set(names) == {"finite_time_v_lower", "finite_time_v_bounded", "finite_time_udot_lower"}
        assert names["finite_time_v_lower"].passed
        assert not names["finite_time_v_bounded"].passed

    def test_finite_time_certificates_need_horizon(self):
        """Test the finite-time bounds refuse an infinite horizon."""
        with pytest.raises(UnsupportedCaseError):
            finite_time_certificates(ke_fixed_point(1, 8), [0.0], [0.0], [0.0], [0.0])

    def test_plateau_and_bounded_above(self):
        """Test plateau windows and non-growth."""
        times = [4.0, 5.0, 7.5, 10.0]
        flat = [9.0, 2.0, 2.04, 1.97]
        assert plateau("x", times, flat, 5.0).passed
        assert not plateau("x", times, [2.0, 2.0, 2.5, 2.0], 5.0).passed
        assert plateau("x", times, flat, 10.0) is None
        assert bounded_above("x", times, [0.0, 2.0, 1.0, 0.5], 5.0).passed
        assert not bounded_above("x", times, [0.0, 2.0, 3.0, 0.5], 5.0).passed

    def test_plateau_scaled_to_peak(self):
        """Test a quantity settling near zero is held to its own scale, not an absolute floor."""
        times = [0.0, 5.0, 7.5, 10.0]
        assert not plateau("x", times, [0.4, 0.01, 0.04, 0.01], 5.0).passed
        assert plateau("x", times, [0.4, 0.01, 0.005, 0.002], 5.0).passed
        assert plateau("x", times, [0.0, 0.0, 0.0, 0.0], 5.0).passed


class TestSchwarz:
    """Tests for the Schwarz monitors."""

    def test_fixed_point(self):
        """Test phi = n, H = 0 and the phi excess equals the twist defect for a flat reference."""
        s = ke_fixed_point(2, 8)
        result = schwarz_monitor(s, initial_state(s))
        assert np.allclose(result.phi.values, 2.0)
        assert np.max(np.abs(result.H.values)) < 1e-14
        assert np.allclose(result.logphi_residual.values, -1.0)
        assert np.allclose(result.phi_excess.values, result.twist_defect.values)
        assert result.C_bis == 0.0

    def test_no_reference_map(self, generic_state):
        """Test the monitor is not applicable without a reference map."""
        s, state = generic_state
        with pytest.raises(UnsupportedCaseError):
            schwarz_monitor(s, state)
        with pytest.raises(UnsupportedCaseError):
            second_fundamental_form(s, state)

    def test_fiberwise_chain(self):
        """Test the trace chain equals the direct fiber ratio on the fibration."""
        s = fibration(2, 8)
        state = initial_state(s)
        for _ in range(2):
            state = step(s, state, FlowSettings())
        result = fiberwise_ratio(s, state)
        assert sup_abs(result.mismatch) < 1e-10
        assert np.all(result.direct.values > 0)

    def test_fiberwise_not_applicable(self, generic_state):
        """Test the fiber ratio needs a fibration on a surface."""
        s, state = generic_state
        with pytest.raises(UnsupportedCaseError):
            fiberwise_ratio(s, state)
        s1 = homogeneous(2.0, 1.0, n=1, N=8)
        with pytest.raises(UnsupportedDimensionError):
            fiberwise_ratio(s1, initial_state(s1))

    def test_combination_bound(self):
        """Test sup(log phi - A v) stays below the maximum-principle ceiling."""
        times = [0.0, 1.0, 2.0]
        assert schwarz_combination(times, [0.5, 0.6, 0.7], [0.0, 0.0, 0.0], 10.0, 0.0, 2).passed
        failing = schwarz_combination(times, [0.5, 0.6, 0.8], [0.0, 0.0, 0.0], 10.0, 0.0, 2)
        assert not failing.passed
        assert failing.witness.t == 2.0
        # a lower v lifts the ceiling by A * |min v|
        assert schwarz_combination(times, [0.5, 0.6, 0.8], [0.0, -0.01, -0.01], 10.0, 0.0, 2).passed

    def test_combination_needs_large_A(self):
        """Test A must exceed the target curvature bound."""
        with pytest.raises(UnsupportedCaseError):
            schwarz_combination([0.0], [0.5], [0.0], 1.0, 2.0, 2)


class TestRegularity:
    """Tests for the gradient and Laplacian monitors."""

    def test_denominator_guard(self):
        """Test C_v - v < 1 aborts with a suggested C_v."""
        s = homogeneous(2.0, 1.0, n=1, N=8)
        state = initial_state(s)
        kin = kinematics(s, state)
        with pytest.raises(CertificateAbort) as excinfo:
            check_denominator(s, kin.v, 1.5, state.t)
        assert "raise certificates.C_v" in str(excinfo.value)
        assert np.all(check_denominator(s, kin.v, 10.0, state.t).values >= 1.0)

    def test_gradient_fixed_point(self):
        """Test everything vanishes for v = 0."""
        s = ke_fixed_point(2, 8)
        result = gradient_monitor(s, initial_state(s))
        assert sup_abs(result.Psi) == 0.0
        assert sup_abs(result.deviation) < 1e-14

    def test_gradient_defect_is_twist_pairing(self):
        """Test the gradient defect equals -B_inf(grad v, gradbar v) on generic data."""
        s = generic_ample(2, 16, seed=4)
        state = step(s, initial_state(s), FlowSettings())
        result = gradient_monitor(s, state)
        allowed = 1e-6 * (1.0 + result.grad_norm2.values)
        assert np.all(np.abs(result.deviation.values) <= allowed)
        assert np.all(result.defect.values <= allowed)

    def test_laplacian_identities(self, generic_state):
        """Test Lap v + R_tw + phi = 0 and the Cauchy–Schwarz floor."""
        s, state = generic_state
        result = laplacian_monitor(s, state)
        assert sup_abs(result.identity_residual) < 1e-9
        lap = result.lap_v.values
        assert np.all(result.cauchy_schwarz_gap.values <= 1e-10 * (1.0 + lap ** 2))

    def test_laplacian_needs_infinite_horizon(self):
        """Test the Laplacian monitor refuses finite-horizon scenarios."""
        s = finite_time(1.0, n=1, N=8)
        with pytest.raises(UnsupportedCaseError):
            laplacian_monitor(s, initial_state(s))


class TestMonitorSuite:
    """Tests for the monitor registry."""

    def test_fixed_point_passes(self):
        """Test all certificates pass on the fixed point."""
        s = ke_fixed_point(1, 8, t_end=1.0)
        suite = MonitorSuite(s)
        run(s, [0.0, 0.5, 1.0], monitors=[suite])
        report = suite.finalize()
        assert report.passed
        assert report.constants["C_u"] == 0.0
        assert [snap.values["sup_R_tw"] for snap in report.snapshots] == pytest.approx([-1.0] * 3)
        assert any(reason.startswith("fiberwise") for reason in report.skipped)
        assert "res_first_tderiv" in report.snapshots[1].residuals
        assert "res_scalar_flow" in report.snapshots[1].residuals
        names = {c.name for c in report.certificates}
        assert {"scalar_flow", "first_tderiv", "volume_evolution", "schwarz_combination"} <= names

    def test_sparse_snapshots_skip_time_derivatives(self):
        """Test fewer than three snapshots mark the finite-difference checks skipped."""
        s = ke_fixed_point(1, 8, t_end=1.0)
        suite = MonitorSuite(s)
        run(s, [0.0, 1.0], monitors=[suite])
        report = suite.finalize()
        assert report.passed
        assert "time_derivatives: fewer than 3 snapshots" in report.skipped

    def test_time_difference_certificates(self):
        """Test differenced residuals are certified against h1 * h2 and fail under a tight tolerance."""
        s = homogeneous(2.0, 1.0, n=1, N=8)
        snaps = run(s, [0.0, 0.5, 1.0])
        tight = CertificateConstants(tolerances=Tolerances(time_difference=1e-6))
        loose_suite = MonitorSuite(s, monitors=["time_derivatives"])
        tight_suite = MonitorSuite(s, monitors=["time_derivatives"], constants=tight)
        for snap in snaps:
            loose_suite.observe(snap)
            tight_suite.observe(snap)
        loose = {c.name: c for c in loose_suite.finalize().certificates}
        assert loose["first_tderiv"].passed and loose["volume_evolution"].passed
        strict = {c.name: c for c in tight_suite.finalize().certificates}
        assert not strict["first_tderiv"].passed

    def test_finite_horizon_reports_differences_only(self):
        """Test differenced residuals are reported but not certified before a finite horizon."""
        s = finite_time(1.0, n=1, N=8)
        suite = MonitorSuite(s, monitors=["time_derivatives"])
        run(s, [0.0, 0.2, 0.4], monitors=[suite])
        report = suite.finalize()
        assert "res_first_tderiv" in report.snapshots[1].residuals
        assert "first_tderiv" not in {c.name for c in report.certificates}
        assert "time_derivatives: finite horizon, differenced residuals reported only" in report.skipped

    def test_cv_guard_aborts(self):
        """Test a too-small C_v aborts with a failing cv_guard certificate."""
        s = ke_fixed_point(1, 8, t_end=1.0)
        suite = MonitorSuite(s, constants=CertificateConstants(C_v=0.5))
        with pytest.raises(CertificateAbort):
            run(s, [0.0], monitors=[suite])
        names = {c.name: c for c in suite.report.certificates}
        assert not names["cv_guard"].passed
        assert [c.name for c in suite.report.failures()] == ["cv_guard"]

    def test_selected_monitors_only(self, generic_state):
        """Test unselected monitors leave no diagnostics."""
        s, state = generic_state
        suite = MonitorSuite(s, monitors=["identities"], C_u=1.0)
        diag = suite.observe(state)
        assert "res_scalar_trace" in diag.residuals
        assert "sup_Psi" not in diag.values
        assert suite.finalize().passed
