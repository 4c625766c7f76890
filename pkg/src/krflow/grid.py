"""
Periodic spectral field engine on the torus (R^{2n}) / (2 pi Z)^{2n}.

Real axes are stored interleaved and row-major: (x^1, y^1, ..., x^n, y^n),
with z^j = x^j + i y^j. All derivatives are computed by FFT, multiplication by
the integer wavenumber symbol, and inverse FFT. Odd-order factors drop the
Nyquist mode; same-axis second derivatives keep it (-k^2).
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Literal, Union

import numpy as np
import scipy.fft

from src.krflow.errors import DataCorruptionError
from src.krflow.settings import get_settings

logger = logging.getLogger(__name__)

ReduceKind = Literal["max", "min", "sup-norm", "mean"]

# energy fraction above which the top third of wavenumbers counts as under-resolved
TAIL_WARNING_THRESHOLD = 1e-8


@dataclass(frozen=True)
class GridSpec:
    """Grid parameters: complex dimension n and points per real axis N."""
    n: int
    N: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"complex dimension must be 1 or 2, got {self.n}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two and at least 8, got {self.N}")

    @property
    def ndim(self) -> int:
        """Number of real axes (2n)."""
        return 2 * self.n

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.ndim

    @property
    def size(self) -> int:
        return self.N ** self.ndim

    @property
    def axes(self) -> tuple:
        return tuple(range(self.ndim))

    def x_axis(self, j: int) -> int:
        """Real-axis index of x^j (0-based complex direction j)."""
        return 2 * j

    def y_axis(self, j: int) -> int:
        """Real-axis index of y^j."""
        return 2 * j + 1

    def coordinates(self) -> tuple:
        """Meshgrid of the real coordinates, each of shape `self.shape`."""
        x = 2.0 * np.pi * np.arange(self.N) / self.N
        return np.meshgrid(*([x] * self.ndim), indexing="ij")


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real scalar sampled on the periodic grid."""
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.spec.shape:
            raise ValueError(f"field shape {values.shape} does not match grid {self.spec.shape}")
        if not np.all(np.isfinite(values)):
            bad = np.unravel_index(np.argmin(np.isfinite(values)), values.shape)
            raise DataCorruptionError(f"non-finite value in scalar field at grid point {tuple(int(i) for i in bad)}")
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, spec: GridSpec, value: float) -> "ScalarField":
        return cls(spec, np.full(spec.shape, float(value)))

    @classmethod
    def from_function(cls, spec: GridSpec, fn: Callable[..., np.ndarray]) -> "ScalarField":
        """Sample fn(x1, y1, ..., xn, yn) on the grid."""
        coords = spec.coordinates()
        return cls(spec, np.broadcast_to(fn(*coords), spec.shape).astype(np.float64))

    def _other(self, other):
        if isinstance(other, ScalarField):
            if other.spec != self.spec:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.spec, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.spec, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.spec, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.spec, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.spec, self.values / self._other(other))

    def __neg__(self):
        return ScalarField(self.spec, -self.values)


# --- spectral symbols ---

@lru_cache(maxsize=32)
def _wavenumbers(N: int) -> tuple:
    """Integer wavenumbers (full, and with the Nyquist mode zeroed for odd derivatives)."""
    k = np.fft.fftfreq(N, d=1.0 / N)
    k_odd = k.copy()
    k_odd[N // 2] = 0.0
    return k, k_odd


def _along(spec: GridSpec, axis: int, k: np.ndarray) -> np.ndarray:
    shape = [1] * spec.ndim
    shape[axis] = spec.N
    return k.reshape(shape)


@lru_cache(maxsize=64)
def first_symbol(spec: GridSpec, axis: int) -> np.ndarray:
    """Symbol of d/d(axis): i k with the Nyquist mode removed."""
    _, k_odd = _wavenumbers(spec.N)
    return 1j * _along(spec, axis, k_odd)


@lru_cache(maxsize=64)
def second_symbol(spec: GridSpec, axis: int) -> np.ndarray:
    """Symbol of d^2/d(axis)^2: -k^2, Nyquist kept."""
    k, _ = _wavenumbers(spec.N)
    return -_along(spec, axis, k) ** 2


@lru_cache(maxsize=64)
def dz_symbol(spec: GridSpec, j: int) -> np.ndarray:
    """Symbol of d/dz^j = (d/dx^j - i d/dy^j) / 2."""
    return 0.5 * (first_symbol(spec, spec.x_axis(j)) - 1j * first_symbol(spec, spec.y_axis(j)))


@lru_cache(maxsize=64)
def dzbar_symbol(spec: GridSpec, j: int) -> np.ndarray:
    """Symbol of d/dzbar^j = (d/dx^j + i d/dy^j) / 2."""
    return 0.5 * (first_symbol(spec, spec.x_axis(j)) + 1j * first_symbol(spec, spec.y_axis(j)))


@lru_cache(maxsize=64)
def levi_symbol(spec: GridSpec, j: int, k: int) -> np.ndarray:
    """Symbol of d^2/dz^j dzbar^k."""
    if j == k:
        return 0.25 * (second_symbol(spec, spec.x_axis(j)) + second_symbol(spec, spec.y_axis(j)))
    return dz_symbol(spec, j) * dzbar_symbol(spec, k)


@lru_cache(maxsize=64)
def holomorphic_symbol(spec: GridSpec, i: int, j: int) -> np.ndarray:
    """Symbol of d^2/dz^i dz^j."""
    if i == j:
        xa, ya = spec.x_axis(j), spec.y_axis(j)
        return 0.25 * (
            second_symbol(spec, xa)
            - 2j * first_symbol(spec, xa) * first_symbol(spec, ya)
            - second_symbol(spec, ya)
        )
    return dz_symbol(spec, i) * dz_symbol(spec, j)


def forward(spec: GridSpec, values: np.ndarray) -> np.ndarray:
    """FFT over the grid axes; trailing axes (tensor indices) are carried along."""
    return scipy.fft.fftn(values, axes=spec.axes, workers=get_settings().fft_workers)


def inverse(spec: GridSpec, hat: np.ndarray) -> np.ndarray:
    return scipy.fft.ifftn(hat, axes=spec.axes, workers=get_settings().fft_workers)


def _expand(symbol: np.ndarray, trailing: int) -> np.ndarray:
    return symbol.reshape(symbol.shape + (1,) * trailing)


def apply_symbol(spec: GridSpec, values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    """Apply a Fourier multiplier to a (possibly tensor-valued, complex) grid array."""
    trailing = values.ndim - spec.ndim
    return inverse(spec, forward(spec, values) * _expand(symbol, trailing))


# --- operations ---

def fourier_derivative(f: ScalarField, axis: int) -> ScalarField:
    """
    Spectral derivative of a real field along one real axis.

    Args:
        f: Band-limited periodic field
        axis: Real-axis index (0 = x^1, 1 = y^1, ...)

    Returns:
        df/d(axis) as a new field
    """
    if not 0 <= axis < f.spec.ndim:
        raise ValueError(f"axis {axis} out of range for n={f.spec.n}")
    out = apply_symbol(f.spec, f.values, first_symbol(f.spec, axis))
    return ScalarField(f.spec, out.real)


def gradient_z(f: ScalarField) -> np.ndarray:
    """All holomorphic first derivatives d f / dz^j, stacked on a trailing axis (complex)."""
    spec = f.spec
    hat = forward(spec, f.values)
    parts = [inverse(spec, hat * dz_symbol(spec, j)) for j in range(spec.n)]
    return np.stack(parts, axis=-1)


def holomorphic_hessian(f: ScalarField) -> np.ndarray:
    """Complex-symmetric field of d^2 f / dz^i dz^j, shape grid + (n, n)."""
    spec = f.spec
    hat = forward(spec, f.values)
    out = np.empty(spec.shape + (spec.n, spec.n), dtype=np.complex128)
    for i in range(spec.n):
        for j in range(i, spec.n):
            out[..., i, j] = inverse(spec, hat * holomorphic_symbol(spec, i, j))
            out[..., j, i] = out[..., i, j]
    return out


def levi_form_array(spec: GridSpec, values: np.ndarray) -> np.ndarray:
    """Hermitian array of d^2 f / dz^j dzbar^k for a real field given as raw values."""
    hat = forward(spec, values)
    out = np.empty(spec.shape + (spec.n, spec.n), dtype=np.complex128)
    for j in range(spec.n):
        out[..., j, j] = inverse(spec, hat * levi_symbol(spec, j, j)).real
        for k in range(j + 1, spec.n):
            out[..., j, k] = inverse(spec, hat * levi_symbol(spec, j, k))
            out[..., k, j] = np.conj(out[..., j, k])
    return 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))


def complex_hessian(f: ScalarField):
    """
    Complex Hessian i ddbar f as a Hermitian field with entries d^2 f / dz^j dzbar^k.

    Args:
        f: Smooth periodic real field

    Returns:
        HermitianField (not flagged as a metric)
    """
    from src.krflow.hermitian import HermitianField

    return HermitianField(f.spec, levi_form_array(f.spec, f.values))


def reduce(f: ScalarField, kind: ReduceKind) -> float:
    """Exact reduction over all grid points."""
    if kind == "max":
        return float(np.max(f.values))
    if kind == "min":
        return float(np.min(f.values))
    if kind == "sup-norm":
        return float(np.max(np.abs(f.values)))
    if kind == "mean":
        return float(np.mean(f.values))
    raise ValueError(f"unknown reduction: {kind}")


def argext(f: Union[ScalarField, np.ndarray], kind: Literal["max", "min"]) -> tuple:
    """Grid index of the extreme value (witness location)."""
    values = f.values if isinstance(f, ScalarField) else f
    flat = np.argmax(values) if kind == "max" else np.argmin(values)
    return tuple(int(i) for i in np.unravel_index(flat, values.shape))


def spectral_tail_fraction(f: ScalarField) -> float:
    """
    Fraction of fluctuation energy carried by the top third of wavenumbers.

    A mode counts as "top third" when any of its wavenumber components exceeds N/3.
    The mean mode is excluded from the total.
    """
    spec = f.spec
    energy = np.abs(forward(spec, f.values)) ** 2
    energy.flat[0] = 0.0
    total = float(energy.sum())
    if total <= 1e-300:
        return 0.0
    k, _ = _wavenumbers(spec.N)
    mask = np.zeros(spec.shape, dtype=bool)
    for axis in spec.axes:
        mask |= np.abs(_along(spec, axis, k)) > spec.N / 3.0
    return float(energy[mask].sum() / total)


def check_resolution(f: ScalarField, label: str) -> float:
    """Log a resolution warning when the spectral tail is too heavy; returns the fraction."""
    fraction = spectral_tail_fraction(f)
    if fraction > TAIL_WARNING_THRESHOLD:
        logger.warning(f"Resolution warning for {label}: spectral tail fraction {fraction:.2e} at N={f.spec.N}")
    return fraction


def fiber_average(spec: GridSpec, values: np.ndarray, directions: Iterable[int]) -> np.ndarray:
    """Average over both real axes of each listed complex direction (result broadcast back)."""
    axes = tuple(a for j in directions for a in (spec.x_axis(j), spec.y_axis(j)))
    if not axes:
        return values
    mean = np.mean(values, axis=axes, keepdims=True)
    return np.broadcast_to(mean, values.shape).copy()


def is_invariant_along(spec: GridSpec, values: np.ndarray, j: int, tol: float = 1e-13) -> bool:
    """True when the field has no Fourier content with nonzero wavenumber along direction j."""
    scale = max(float(np.max(np.abs(values))), 1.0)
    averaged = fiber_average(spec, values, [j])
    return bool(np.max(np.abs(values - averaged)) <= tol * scale)
