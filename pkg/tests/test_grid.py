"""
Unit tests for the periodic spectral grid.
"""
import numpy as np
import pytest

from src.krflow.errors import DataCorruptionError
from src.krflow.grid import (
    GridSpec,
    ScalarField,
    argext,
    complex_hessian,
    fiber_average,
    fourier_derivative,
    gradient_z,
    holomorphic_hessian,
    is_invariant_along,
    levi_form_array,
    reduce,
    spectral_tail_fraction,
)


@pytest.fixture
def spec2():
    return GridSpec(2, 8)


class TestGridSpec:
    """Tests for grid parameters."""

    def test_shape_and_axes(self):
        """Test that a surface grid has four interleaved real axes."""
        spec = GridSpec(2, 16)
        assert spec.ndim == 4
        assert spec.shape == (16, 16, 16, 16)
        assert spec.size == 16 ** 4
        assert (spec.x_axis(1), spec.y_axis(1)) == (2, 3)

    @pytest.mark.parametrize("n, N", [(3, 16), (0, 16), (1, 12), (1, 4)])
    def test_invalid_parameters(self, n, N):
        """Test that unsupported dimensions and non-power-of-two sizes are rejected."""
        with pytest.raises(ValueError):
            GridSpec(n, N)


class TestScalarField:
    """Tests for scalar fields."""

    def test_rejects_non_finite(self):
        """Test that NaN values raise DataCorruptionError."""
        spec = GridSpec(1, 8)
        values = np.zeros(spec.shape)
        values[3, 4] = np.nan
        with pytest.raises(DataCorruptionError) as excinfo:
            ScalarField(spec, values)
        assert "(3, 4)" in str(excinfo.value)

    def test_rejects_wrong_shape(self):
        """Test that a field must match the grid shape."""
        with pytest.raises(ValueError):
            ScalarField(GridSpec(1, 8), np.zeros((8, 4)))

    def test_arithmetic(self):
        """Test that fields combine with fields and scalars."""
        spec = GridSpec(1, 8)
        a = ScalarField.constant(spec, 2.0)
        b = ScalarField.constant(spec, 3.0)
        assert np.all((a + b).values == 5.0)
        assert np.all((1.0 - a).values == -1.0)
        assert np.all((a * b / 2.0).values == 3.0)
        assert np.all((-a).values == -2.0)

    def test_mixing_grids_fails(self):
        """Test that fields on different grids cannot be combined."""
        with pytest.raises(ValueError):
            ScalarField.constant(GridSpec(1, 8), 1.0) + ScalarField.constant(GridSpec(1, 16), 1.0)


class TestDerivatives:
    """Tests for spectral derivatives."""

    def test_fourier_derivative_of_sine(self, spec2):
        """Test d/dy1 sin(2 y1) = 2 cos(2 y1) to roundoff."""
        f = ScalarField.from_function(spec2, lambda x1, y1, x2, y2: np.sin(2 * y1))
        expected = ScalarField.from_function(spec2, lambda x1, y1, x2, y2: 2 * np.cos(2 * y1))
        assert np.max(np.abs(fourier_derivative(f, 1).values - expected.values)) < 1e-12

    def test_axis_out_of_range(self):
        """Test that a derivative along a missing axis is rejected."""
        f = ScalarField.constant(GridSpec(1, 8), 1.0)
        with pytest.raises(ValueError):
            fourier_derivative(f, 2)

    def test_levi_form_of_cosine(self, spec2):
        """Test d^2/dz dzbar cos(x1) = -cos(x1) / 4 on the diagonal, zero elsewhere."""
        f = ScalarField.from_function(spec2, lambda x1, y1, x2, y2: np.cos(x1))
        hess = levi_form_array(spec2, f.values)
        assert np.max(np.abs(hess[..., 0, 0] + 0.25 * f.values)) < 1e-12
        assert np.max(np.abs(hess[..., 1, 1])) < 1e-12
        assert np.max(np.abs(hess[..., 0, 1])) < 1e-12

    def test_complex_hessian_is_hermitian(self, spec2):
        """Test that the complex Hessian of a mixed mode is Hermitian."""
        f = ScalarField.from_function(spec2, lambda x1, y1, x2, y2: np.sin(x1 + y2) + np.cos(y1 - x2))
        hess = complex_hessian(f).values
        assert np.allclose(hess, np.conj(np.swapaxes(hess, -1, -2)), atol=1e-14)

    def test_gradient_z_of_exponential_mode(self):
        """Test d/dz cos(x) = -sin(x) / 2."""
        spec = GridSpec(1, 8)
        f = ScalarField.from_function(spec, lambda x, y: np.cos(x))
        grad = gradient_z(f)
        assert grad.shape == spec.shape + (1,)
        assert np.max(np.abs(grad[..., 0] + 0.5 * np.sin(spec.coordinates()[0]))) < 1e-12

    def test_holomorphic_hessian_symmetric(self, spec2):
        """Test that d^2 f / dz^i dz^j is complex symmetric."""
        f = ScalarField.from_function(spec2, lambda x1, y1, x2, y2: np.cos(x1 - y2))
        hess = holomorphic_hessian(f)
        assert np.allclose(hess[..., 0, 1], hess[..., 1, 0])


class TestReductions:
    """Tests for reductions, witnesses and resolution diagnostics."""

    def test_reduce_kinds(self):
        """Test max, min, sup-norm and mean."""
        spec = GridSpec(1, 8)
        f = ScalarField.from_function(spec, lambda x, y: np.cos(x) - 2.0)
        assert reduce(f, "max") == pytest.approx(-1.0)
        assert reduce(f, "min") == pytest.approx(-3.0)
        assert reduce(f, "sup-norm") == pytest.approx(3.0)
        assert reduce(f, "mean") == pytest.approx(-2.0)
        with pytest.raises(ValueError):
            reduce(f, "median")

    def test_argext_returns_grid_index(self):
        """Test that argext names the grid point of the extremum."""
        spec = GridSpec(1, 8)
        values = np.zeros(spec.shape)
        values[2, 5] = 7.0
        assert argext(ScalarField(spec, values), "max") == (2, 5)
        assert argext(-values, "min") == (2, 5)

    def test_spectral_tail_fraction(self):
        """Test that low modes have no tail energy and the highest modes do."""
        spec = GridSpec(1, 16)
        low = ScalarField.from_function(spec, lambda x, y: np.cos(x))
        high = ScalarField.from_function(spec, lambda x, y: np.cos(7 * x))
        assert spectral_tail_fraction(low) < 1e-20
        assert spectral_tail_fraction(high) > 0.5
        assert spectral_tail_fraction(ScalarField.constant(spec, 3.0)) == 0.0

    def test_fiber_average_and_invariance(self, spec2):
        """Test averaging over the second complex direction removes its dependence."""
        f = ScalarField.from_function(spec2, lambda x1, y1, x2, y2: np.cos(x1) + np.sin(y2))
        averaged = fiber_average(spec2, f.values, [1])
        assert is_invariant_along(spec2, averaged, 1)
        assert not is_invariant_along(spec2, f.values, 1)
        assert is_invariant_along(spec2, f.values - np.sin(spec2.coordinates()[3]), 1)
        assert fiber_average(spec2, f.values, []) is f.values
