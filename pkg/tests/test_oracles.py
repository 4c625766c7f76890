"""
Unit tests for the independent oracles.
"""
import math

import numpy as np
import pytest

from src.krflow.errors import DomainError
from src.krflow.oracles import (
    algebra_fuzzer,
    ke_fixed_point_reference,
    solve_homogeneous,
    solve_homogeneous_rk4,
)


class TestHomogeneousOracle:
    """Tests for the homogeneous ODE solvers."""

    def test_closed_form_when_a_equals_b(self):
        """Test u = (n log b + c0)(1 - e^{-t}) for constant forcing."""
        t = [0.0, 0.5, 2.0]
        traj = solve_homogeneous(1.5, 1.5, 0.2, 2, t)
        forcing = 2 * math.log(1.5) + 0.2
        expected = forcing * (1.0 - np.exp(-np.array(t)))
        assert np.allclose(traj.u, expected, atol=1e-12)
        assert np.allclose(traj.udot, forcing * np.exp(-np.array(t)), atol=1e-12)

    def test_two_solvers_agree(self):
        """Test quadrature and RK4 at dt = 1e-4 agree to 1e-9."""
        t = [0.0, 0.5, 1.0, 5.0]
        quad_traj = solve_homogeneous(2.0, 1.0, 0.0, 1, t)
        rk4_traj = solve_homogeneous_rk4(2.0, 1.0, 0.0, 1, t, dt=1e-4)
        assert np.max(np.abs(quad_traj.u - rk4_traj.u)) < 1e-9

    @pytest.mark.parametrize("a,b,c0,n", [(2.0, 1.0, 0.0, 1), (3.0, 2.0, 0.1, 2)])
    def test_quadrature_differentiates_to_ode(self, a, b, c0, n):
        """Test five-point differences of the quadrature u reproduce udot and udot_dot to 1e-8."""
        h = 1e-2
        for t in (0.5, 1.0, 2.0, 5.0):
            stencil = [t - 2 * h, t - h, t, t + h, t + 2 * h]
            traj = solve_homogeneous(a, b, c0, n, stencil)
            weights = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * h)
            assert float(weights @ traj.u) == pytest.approx(traj.udot[2], abs=1e-8)
            assert float(weights @ traj.udot) == pytest.approx(traj.udot_dot[2], abs=1e-8)

    def test_starts_at_zero_with_log_a_velocity(self):
        """Test u(0) = 0 and udot(0) = n log a + c0."""
        traj = solve_homogeneous(2.0, 1.0, 0.0, 1, [0.0])
        assert traj.u[0] == 0.0
        assert traj.udot[0] == pytest.approx(math.log(2.0))

    def test_value_at(self):
        """Test lookup by sample time."""
        traj = solve_homogeneous(2.0, 1.0, 0.0, 1, [0.0, 1.0])
        assert traj.value_at(1.0) == traj.u[1]
        with pytest.raises(KeyError):
            traj.value_at(0.5)

    def test_domain_errors(self):
        """Test a non-positive background level is rejected."""
        with pytest.raises(DomainError):
            solve_homogeneous(0.0, 1.0, 0.0, 1, [0.0, 1.0])
        with pytest.raises(DomainError):
            solve_homogeneous(0.5, -1.0, 0.0, 1, [0.0, 1.0])
        with pytest.raises(DomainError):
            solve_homogeneous_rk4(0.5, -1.0, 0.0, 1, [0.0, 1.0])


class TestFixedPointReference:
    """Tests for the Kähler–Einstein fixed point reference."""

    def test_values(self):
        """Test u = 0, R_tw = -n, phi = n, v = 0."""
        ref = ke_fixed_point_reference(np.eye(2), 2, log_omega=0.0)
        assert (ref.u, ref.R_tw, ref.phi, ref.v) == (0.0, -2.0, 2.0, 0.0)

    def test_wrong_volume_form(self):
        """Test a volume form other than det B is not a fixed point."""
        with pytest.raises(DomainError):
            ke_fixed_point_reference(np.eye(2), 2, log_omega=0.5)

    def test_indefinite_metric(self):
        """Test an indefinite B is rejected."""
        with pytest.raises(DomainError):
            ke_fixed_point_reference(np.diag([1.0, -1.0]), 2)


class TestAlgebraFuzzer:
    """Tests for the randomized algebra check."""

    def test_passes(self):
        """Test the wedge/trace chain and the Cauchy–Schwarz floor hold on random samples."""
        report = algebra_fuzzer(seed=7, count=2000)
        assert report.passed
        assert report.count == 2000
        assert report.worst_wedge_error <= 1e-12
        assert report.worst_cauchy_schwarz <= 1e-12

    def test_deterministic(self):
        """Test the same seed gives the same report."""
        assert algebra_fuzzer(seed=3, count=500) == algebra_fuzzer(seed=3, count=500)
