"""
Pointwise Hermitian-form algebra and Kähler-geometry kernels.

Component convention: a (1,1)-form i a_{jk} dz^j ^ dzbar^k is stored as the
matrix A[..., j, k] = a_{jk}. With M = A^{-1} the inverse-metric components are
g^{k lbar} = M[l, k], so every contraction below is a plain matrix product in
M. Norms follow the complex conventions: Laplacian = g^{j ibar} d_j d_ibar.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.krflow.errors import PositivityError, UnsupportedDimensionError
from src.krflow.grid import (
    GridSpec,
    ScalarField,
    dz_symbol,
    forward,
    gradient_z,
    holomorphic_hessian,
    inverse,
    levi_form_array,
)

logger = logging.getLogger(__name__)

# min eigenvalue must exceed this multiple of the mean trace for a metric
POSITIVITY_FLOOR = 1e-10


def _hermitize(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values + np.conj(np.swapaxes(values, -1, -2)))


def min_eigenvalues(values: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of each Hermitian matrix in a stack."""
    return np.linalg.eigvalsh(values)[..., 0]


def check_positive(values: np.ndarray, floor: float = POSITIVITY_FLOOR) -> np.ndarray:
    """
    Validate pointwise positive definiteness.

    Args:
        values: Hermitian stack, shape grid + (n, n)
        floor: Relative eigenvalue floor (times the mean trace)

    Returns:
        Array of pointwise minimum eigenvalues

    Raises:
        PositivityError: naming the worst grid point and its eigenvalue
    """
    lam = min_eigenvalues(values)
    mean_trace = float(np.mean(np.trace(values, axis1=-2, axis2=-1).real))
    threshold = floor * max(abs(mean_trace), 1e-300)
    worst = np.unravel_index(np.argmin(lam), lam.shape)
    worst_value = float(lam[worst])
    if not np.isfinite(worst_value) or worst_value <= threshold:
        index = tuple(int(i) for i in worst)
        raise PositivityError(
            f"form is not positive definite: min eigenvalue {worst_value:.3e} at grid point {index}",
            index=index,
            eigenvalue=worst_value,
        )
    return lam


@dataclass(frozen=True, eq=False)
class HermitianField:
    """Pointwise n x n Hermitian matrix field; `metric=True` asserts positive definiteness."""
    spec: GridSpec
    values: np.ndarray
    metric: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        expected = self.spec.shape + (self.spec.n, self.spec.n)
        if values.shape != expected:
            raise ValueError(f"hermitian field shape {values.shape} does not match {expected}")
        object.__setattr__(self, "values", _hermitize(values))
        if self.metric:
            check_positive(self.values)

    @classmethod
    def constant(cls, spec: GridSpec, matrix, metric: bool = False) -> "HermitianField":
        matrix = np.asarray(matrix, dtype=np.complex128).reshape(spec.n, spec.n)
        values = np.broadcast_to(matrix, spec.shape + (spec.n, spec.n)).copy()
        return cls(spec, values, metric=metric)

    def as_metric(self) -> "HermitianField":
        return HermitianField(self.spec, self.values, metric=True)

    def entry(self, j: int, k: int) -> np.ndarray:
        return self.values[..., j, k]

    def __add__(self, other: "HermitianField") -> "HermitianField":
        return HermitianField(self.spec, self.values + other.values)

    def __sub__(self, other: "HermitianField") -> "HermitianField":
        return HermitianField(self.spec, self.values - other.values)

    def scaled(self, factor: float) -> "HermitianField":
        return HermitianField(self.spec, factor * self.values)

    def sup_norm(self) -> float:
        """Largest entry modulus over the grid."""
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class ConnectionField:
    """Christoffel symbols of a Kähler metric: values[..., i, j, k] = Gamma^k_{ij}."""
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "values", 0.5 * (values + np.swapaxes(values, -3, -2)))


@dataclass(frozen=True, eq=False)
class CovariantHessians:
    """Second covariant derivatives of a scalar and their norms."""
    h20: np.ndarray
    h11: HermitianField
    grad: np.ndarray
    grad_norm2: ScalarField
    h20_norm2: ScalarField
    h11_norm2: ScalarField


def _metric_inverse(g: HermitianField) -> np.ndarray:
    if not g.metric:
        check_positive(g.values)
    return np.linalg.inv(g.values)


# --- array-level kernels (shared with the algebra fuzzer) ---

def trace_pair_array(g: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """tr(g^{-1} alpha) for stacks of matrices."""
    return np.einsum("...ij,...ji->...", np.linalg.inv(g), alpha).real


def wedge_density_array(omega: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Top-degree density of omega ^ alpha for 2 x 2 stacks."""
    return (
        omega[..., 0, 0] * alpha[..., 1, 1]
        + omega[..., 1, 1] * alpha[..., 0, 0]
        - omega[..., 0, 1] * alpha[..., 1, 0]
        - omega[..., 1, 0] * alpha[..., 0, 1]
    ).real


def wedge_ratio_array(omega: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """(omega ^ alpha) / omega^2 for 2 x 2 stacks, omega^2 density = 2 det omega."""
    det = (omega[..., 0, 0] * omega[..., 1, 1] - omega[..., 0, 1] * omega[..., 1, 0]).real
    return wedge_density_array(omega, alpha) / (2.0 * det)


def hermitian_pairing_array(m: np.ndarray, alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """(alpha, beta)_g = tr(M alpha M beta) with M = g^{-1}."""
    return np.einsum("...ab,...bc,...cd,...da->...", m, alpha, m, beta).real


# --- field operations ---

def trace_pair(g: HermitianField, alpha: HermitianField) -> ScalarField:
    """
    Trace pairing <g, alpha> = tr(g^{-1} alpha).

    Args:
        g: Metric field
        alpha: Any Hermitian field on the same grid

    Returns:
        Pointwise trace as a scalar field
    """
    m = _metric_inverse(g)
    return ScalarField(g.spec, np.einsum("...ij,...ji->...", m, alpha.values).real)


def log_det(g: HermitianField) -> ScalarField:
    """Pointwise log determinant of a metric."""
    if not g.metric:
        check_positive(g.values)
    _, logabs = np.linalg.slogdet(g.values)
    return ScalarField(g.spec, logabs)


def wedge_ratio(omega: HermitianField, alpha: HermitianField) -> ScalarField:
    """
    Density ratio (omega ^ alpha) / omega^2 on complex surfaces.

    Computed from the explicit 2 x 2 wedge expansion; equals half the trace
    pairing tr(omega^{-1} alpha).
    """
    if omega.spec.n != 2:
        raise UnsupportedDimensionError(f"wedge_ratio needs n = 2, got n = {omega.spec.n}")
    if not omega.metric:
        check_positive(omega.values)
    return ScalarField(omega.spec, wedge_ratio_array(omega.values, alpha.values))


def hermitian_pairing(g: HermitianField, alpha: HermitianField, beta: HermitianField) -> ScalarField:
    """(alpha, beta)_g = g^{j bbar} g^{a kbar} alpha_{j kbar} beta_{a bbar}."""
    m = _metric_inverse(g)
    return ScalarField(g.spec, hermitian_pairing_array(m, alpha.values, beta.values))


def gradient_pairing(g: HermitianField, a_grad: np.ndarray, b_grad: np.ndarray) -> np.ndarray:
    """
    (grad a, grad b) = g^{j ibar} a_j b_ibar for real a, b given their dz-gradients.

    Returns a complex array; 2 Re of it is the real pairing used in the estimates.
    """
    m = _metric_inverse(g)
    return np.einsum("...ij,...j,...i->...", m, a_grad, np.conj(b_grad))


def raised_pairing(g: HermitianField, b: np.ndarray, grad: np.ndarray) -> ScalarField:
    """B(grad v, grad v bar) with both indices raised: q^H B q, q = g^{-1} grad v."""
    m = _metric_inverse(g)
    q = np.einsum("...ij,...j->...i", m, grad)
    b = np.asarray(b, dtype=np.complex128)
    if b.ndim == 2:
        value = np.einsum("...j,jk,...k->...", np.conj(q), b, q)
    else:
        value = np.einsum("...j,...jk,...k->...", np.conj(q), b, q)
    return ScalarField(g.spec, value.real)


def christoffel(g: HermitianField) -> ConnectionField:
    """
    Christoffel symbols Gamma^k_{ij} = g^{k lbar} d_i g_{j lbar}.

    Args:
        g: Smooth periodic metric

    Returns:
        ConnectionField symmetric in (i, j)
    """
    spec = g.spec
    m = _metric_inverse(g)
    hat = forward(spec, g.values)
    dg = np.stack(
        [inverse(spec, hat * dz_symbol(spec, i)[..., None, None]) for i in range(spec.n)],
        axis=-3,
    )
    # dg[..., i, j, l] = d_i g_{j lbar}; Gamma^k_{ij} = sum_l dg[i, j, l] M[l, k]
    gamma = np.einsum("...ijl,...lk->...ijk", dg, m)
    return ConnectionField(spec, gamma)


def covariant_hessians(g: HermitianField, v: ScalarField, gamma: Optional[ConnectionField] = None) -> CovariantHessians:
    """
    Covariant Hessians of v and their norms with respect to g.

    Args:
        g: Metric
        v: Real scalar
        gamma: Precomputed Christoffel symbols of g (optional)

    Returns:
        CovariantHessians with v_{;ij}, v_{i jbar}, dz-gradient and the norms
        |grad v|^2, |grad grad v|^2, |grad gradbar v|^2
    """
    m = _metric_inverse(g)
    if gamma is None:
        gamma = christoffel(g)
    grad = gradient_z(v)
    h20 = holomorphic_hessian(v) - np.einsum("...ijk,...k->...ij", gamma.values, grad)
    h11_values = levi_form_array(v.spec, v.values)
    grad_norm2 = np.einsum("...ij,...j,...i->...", m, grad, np.conj(grad)).real
    # |v_{;ij}|^2 = sum M[i',i] M[j',j] V[i,j] conj(V[i',j'])
    h20_norm2 = np.einsum("...pi,...ij,...qj,...pq->...", m, h20, m, np.conj(h20)).real
    h11_norm2 = hermitian_pairing_array(m, h11_values, h11_values)
    return CovariantHessians(
        h20=h20,
        h11=HermitianField(v.spec, h11_values),
        grad=grad,
        grad_norm2=ScalarField(v.spec, grad_norm2),
        h20_norm2=ScalarField(v.spec, h20_norm2),
        h11_norm2=ScalarField(v.spec, h11_norm2),
    )


def ricci_and_scalar(g: HermitianField, twist) -> tuple:
    """
    Twisted Ricci form and scalar curvature.

    Ric = -i ddbar log det g, Ric_tw = Ric - B_inf, R_tw = <g, Ric_tw>.

    Args:
        g: Metric
        twist: Constant Hermitian matrix B_inf

    Returns:
        (ric_tw, R_tw)
    """
    spec = g.spec
    ric = -levi_form_array(spec, log_det(g).values)
    twist = np.asarray(twist, dtype=np.complex128).reshape(spec.n, spec.n)
    ric_tw = HermitianField(spec, ric - twist)
    return ric_tw, trace_pair(g, ric_tw)


def laplacian(g: HermitianField, f: ScalarField) -> ScalarField:
    """Complex Laplacian g^{j kbar} d_j d_kbar f."""
    m = _metric_inverse(g)
    hess = levi_form_array(f.spec, f.values)
    return ScalarField(f.spec, np.einsum("...ij,...ji->...", m, hess).real)
