"""
Scenario definitions: background forms omega_0, omega_inf, volume density Omega,
the interpolation omega_t, the horizon T and derived certificate constants.

The model geometry is the flat complex torus. Forms are constant-plus-exact,
omega = B + i ddbar psi, and log Omega = psi_inf + c, so that
i ddbar log Omega = omega_inf - B_inf holds identically. The potential flow is then
the twisted flow d(omega~)/dt = -Ric(omega~) - omega~ + B_inf.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from src.krflow.errors import (
    HorizonError,
    PositivityError,
    ScenarioInvariantError,
    UnsupportedDimensionError,
)
from src.krflow.grid import GridSpec, ScalarField, gradient_z, is_invariant_along, levi_form_array
from src.krflow.hermitian import HermitianField, check_positive, log_det, min_eigenvalues
from src.krflow.models.config import FourierMode, MatrixConfig, ScenarioConfig

logger = logging.getLogger(__name__)

TWIST_TOLERANCE = 1e-10
DEFAULT_AMPLITUDE = 0.05
# default stop-gap before a finite horizon when sampling omega_t
EPS_T = 1e-3


@dataclass(frozen=True, eq=False)
class Scenario:
    """Background data plus derived forms."""
    name: str
    spec: GridSpec
    B0: np.ndarray
    B_inf: np.ndarray
    psi0: ScalarField
    psi_inf: ScalarField
    log_Omega: ScalarField
    T_horizon: float
    t_end: float
    omega0: HermitianField
    omega_inf: HermitianField
    omega_T: HermitianField
    modes0: List[FourierMode] = field(default_factory=list)
    modes_inf: List[FourierMode] = field(default_factory=list)
    log_omega_offset: float = 0.0
    config: Optional[ScenarioConfig] = None
    invariant_directions: tuple = ()
    reference_map: Optional[str] = None

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def N(self) -> int:
        return self.spec.N

    @property
    def finite_horizon(self) -> bool:
        return math.isfinite(self.T_horizon)

    def horizon_stop(self, eps_T: float = EPS_T) -> float:
        """Last time the integrator may reach: T - eps_T, or infinity."""
        return self.T_horizon - eps_T if self.finite_horizon else math.inf

    def to_config(self) -> ScenarioConfig:
        """Inline, self-contained description of this scenario."""
        return ScenarioConfig(
            name="inline",
            n=self.n,
            N=self.N,
            t_end=self.t_end,
            B0=_matrix_config(self.B0),
            B_inf=_matrix_config(self.B_inf),
            psi0=list(self.modes0),
            psi_inf=list(self.modes_inf),
            log_omega_offset=self.log_omega_offset,
        )


def _matrix_config(matrix: np.ndarray) -> MatrixConfig:
    imag = matrix.imag.tolist() if np.any(matrix.imag) else None
    return MatrixConfig(real=matrix.real.tolist(), imag=imag)


def _matrix(cfg: MatrixConfig, n: int) -> np.ndarray:
    matrix = np.asarray(cfg.real, dtype=np.complex128)
    if cfg.imag is not None:
        matrix = matrix + 1j * np.asarray(cfg.imag, dtype=np.float64)
    if matrix.shape != (n, n):
        raise ScenarioInvariantError(f"background matrix has shape {matrix.shape}, expected {(n, n)}")
    return matrix


def evaluate_modes(spec: GridSpec, modes: Sequence[FourierMode]) -> ScalarField:
    """Sum of cos/sin Fourier modes on the grid."""
    coords = spec.coordinates()
    values = np.zeros(spec.shape)
    for mode in modes:
        phase = sum(k * x for k, x in zip(mode.k, coords))
        values += mode.cos * np.cos(phase) + mode.sin * np.sin(phase)
    return ScalarField(spec, values)


def _degeneration_time(B0: np.ndarray, B_inf: np.ndarray) -> float:
    """sup{t : B_inf + e^{-t}(B0 - B_inf) > 0}."""
    scale = max(float(np.max(np.abs(B0))), float(np.max(np.abs(B_inf))), 1.0)
    if float(np.linalg.eigvalsh(B_inf)[0]) >= -1e-12 * scale:
        return math.inf

    def lam(s: float) -> float:
        return float(np.linalg.eigvalsh(s * B0 + (1.0 - s) * B_inf)[0])

    # min eigenvalue is concave in s, positive at s = 1 and negative at s = 0
    s_star = brentq(lam, 0.0, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps)
    return -math.log(s_star)


def _detect_reference(spec: GridSpec, omega_T: HermitianField) -> Optional[str]:
    values = omega_T.values
    scale = max(omega_T.sup_norm(), 1.0)
    if np.max(np.abs(values - values.mean(axis=spec.axes, keepdims=True))) <= 1e-13 * scale:
        return "flat"
    if spec.n == 2:
        fiber_free = np.max(np.abs(values[..., 1, 1])) + np.max(np.abs(values[..., 0, 1])) <= 1e-13 * scale
        if fiber_free and is_invariant_along(spec, values[..., 0, 0].real, 1):
            return "projection"
    return None


def make_scenario(
    name: str,
    spec: GridSpec,
    B0: np.ndarray,
    B_inf: np.ndarray,
    modes0: Sequence[FourierMode] = (),
    modes_inf: Sequence[FourierMode] = (),
    log_omega_offset: float = 0.0,
    t_end: Optional[float] = None,
    config: Optional[ScenarioConfig] = None,
) -> Scenario:
    """
    Assemble and validate a scenario from constant parts and potentials.

    Args:
        name: Scenario identifier
        spec: Grid
        B0, B_inf: Constant Hermitian parts of omega_0 and omega_inf
        modes0, modes_inf: Fourier modes of psi_0 and psi_inf
        log_omega_offset: Constant c in log Omega = psi_inf + c
        t_end: Simulation horizon (default 10, or T for finite horizons)
        config: Originating config, kept for reproducibility

    Returns:
        Validated Scenario
    """
    B0 = np.asarray(B0, dtype=np.complex128)
    B_inf = np.asarray(B_inf, dtype=np.complex128)
    psi0 = evaluate_modes(spec, modes0)
    psi_inf = evaluate_modes(spec, modes_inf)
    log_Omega = psi_inf + log_omega_offset

    try:
        omega0 = HermitianField(spec, B0 + levi_form_array(spec, psi0.values), metric=True)
    except PositivityError as e:
        raise ScenarioInvariantError(f"{name}: omega_0 is not positive definite ({e})") from e
    omega_inf = HermitianField(spec, B_inf + levi_form_array(spec, psi_inf.values))

    T_horizon = _degeneration_time(B0, B_inf)
    if math.isfinite(T_horizon):
        decay = math.exp(-T_horizon)
        omega_T = HermitianField(spec, omega_inf.values + decay * (omega0.values - omega_inf.values))
    else:
        omega_T = omega_inf
    if t_end is None:
        t_end = T_horizon if math.isfinite(T_horizon) else 10.0

    invariant = tuple(
        j for j in range(spec.n)
        if all(is_invariant_along(spec, f.values, j) for f in (psi0, psi_inf, log_Omega))
    )
    scenario = Scenario(
        name=name,
        spec=spec,
        B0=B0,
        B_inf=B_inf,
        psi0=psi0,
        psi_inf=psi_inf,
        log_Omega=log_Omega,
        T_horizon=T_horizon,
        t_end=float(t_end),
        omega0=omega0,
        omega_inf=omega_inf,
        omega_T=omega_T,
        modes0=list(modes0),
        modes_inf=list(modes_inf),
        log_omega_offset=log_omega_offset,
        config=config,
        invariant_directions=invariant,
        reference_map=_detect_reference(spec, omega_T),
    )
    validate_scenario(scenario)
    logger.info(
        f"Scenario {name} ready: n={spec.n}, N={spec.N}, T={T_horizon:.6g}, "
        f"invariant directions={invariant}, reference={scenario.reference_map}"
    )
    return scenario


def validate_scenario(s: Scenario) -> None:
    """
    Check positivity, horizon and twist-consistency invariants.

    Raises:
        ScenarioInvariantError: on the first violated invariant
    """
    scale = max(s.omega_inf.sup_norm(), 1.0)
    if s.finite_horizon:
        lam_T = min_eigenvalues(s.omega_T.values)
        if float(lam_T.min()) < -1e-10 * scale:
            raise ScenarioInvariantError(f"{s.name}: omega_T is not semipositive (min eigenvalue {lam_T.min():.3e})")
        B_T = s.B_inf + math.exp(-s.T_horizon) * (s.B0 - s.B_inf)
        if float(np.linalg.eigvalsh(B_T)[0]) > 1e-10 * max(float(np.max(np.abs(s.B0))), 1.0):
            raise ScenarioInvariantError(f"{s.name}: B_T is not degenerate at T={s.T_horizon}")
        for t in np.linspace(0.0, s.T_horizon - EPS_T, 16):
            try:
                check_positive(interpolate_background(s, float(t)).values)
            except PositivityError as e:
                raise ScenarioInvariantError(f"{s.name}: omega_t not positive at t={t:.4g} ({e})") from e
    else:
        lam_inf = min_eigenvalues(s.omega_inf.values)
        if float(lam_inf.min()) < -1e-10 * scale:
            raise ScenarioInvariantError(
                f"{s.name}: omega_inf is not semipositive (min eigenvalue {lam_inf.min():.3e})"
            )

    twist = levi_form_array(s.spec, s.log_Omega.values) - (s.omega_inf.values - s.B_inf)
    defect = float(np.max(np.abs(twist)))
    if defect > TWIST_TOLERANCE:
        raise ScenarioInvariantError(f"{s.name}: i ddbar log Omega differs from omega_inf - B_inf by {defect:.3e}")


def interpolate_background(s: Scenario, t: float) -> HermitianField:
    """
    Background form omega_t = omega_inf + e^{-t}(omega_0 - omega_inf).

    Args:
        s: Scenario
        t: Time in [0, T)

    Returns:
        HermitianField (omega_0 itself at t = 0)
    """
    if t < 0 or (s.finite_horizon and t >= s.T_horizon):
        raise HorizonError(f"t={t} outside [0, {s.T_horizon})")
    if t == 0:
        return s.omega0
    decay = math.exp(-t)
    return HermitianField(s.spec, s.omega_inf.values + decay * (s.omega0.values - s.omega_inf.values))


def background_velocity(s: Scenario, t: float) -> np.ndarray:
    """d(omega_t)/dt = -e^{-t}(omega_0 - omega_inf) as a raw Hermitian array."""
    return -math.exp(-t) * (s.omega0.values - s.omega_inf.values)


def compute_C_u(s: Scenario, eps_T: float = EPS_T) -> float:
    """
    Sup-bound constant for u from the maximum principle.

    Samples sup_x [log det omega_t - log Omega] on 64 uniform times in
    [0, min(T - eps_T, t_end)]; returns 0 when that sup is <= 0, else sup + 0.01.

    Raises:
        ScenarioInvariantError: if omega_t loses positivity on the sampled range
    """
    t_stop = min(s.horizon_stop(eps_T), s.t_end)
    best = -math.inf
    for t in np.linspace(0.0, t_stop, 64):
        try:
            omega_t = interpolate_background(s, float(t)).as_metric()
        except PositivityError as e:
            raise ScenarioInvariantError(f"{s.name}: omega_t lost positivity at t={t:.4g} before T") from e
        best = max(best, float(np.max(log_det(omega_t).values - s.log_Omega.values)))
    C_u = 0.0 if best <= 0.0 else best + 0.01
    logger.info(f"C_u for {s.name}: {C_u:.6g}")
    return C_u


# --- catalog ---

def _canonical_wavevectors(active_axes: Sequence[int], ndim: int) -> List[tuple]:
    """Nonzero wavevectors with components in {-1, 0, 1} on the active axes, one per +-pair."""
    vectors = []
    for code in range(3 ** len(active_axes)):
        k = [0] * ndim
        c = code
        for axis in active_axes:
            k[axis] = c % 3 - 1
            c //= 3
        nonzero = [x for x in k if x != 0]
        if nonzero and nonzero[0] > 0:
            vectors.append(tuple(k))
    return vectors


def random_potential(
    spec: GridSpec,
    rng: np.random.Generator,
    size: float,
    active_axes: Optional[Sequence[int]] = None,
    count: int = 4,
) -> List[FourierMode]:
    """
    Random low-frequency potential scaled so that sup |i ddbar psi| (operator norm) equals `size`.

    Args:
        spec: Grid
        rng: Seeded generator
        size: Target operator norm of the complex Hessian
        active_axes: Real axes the potential may depend on (default: all)
        count: Number of wavevectors

    Returns:
        List of Fourier modes
    """
    if size == 0:
        return []
    axes = list(active_axes) if active_axes is not None else list(spec.axes)
    candidates = _canonical_wavevectors(axes, spec.ndim)
    picks = rng.choice(len(candidates), size=min(count, len(candidates)), replace=False)
    modes = [
        FourierMode(k=list(candidates[i]), cos=float(rng.standard_normal()), sin=float(rng.standard_normal()))
        for i in sorted(picks)
    ]
    hess = levi_form_array(spec, evaluate_modes(spec, modes).values)
    norm = float(np.max(np.abs(np.linalg.eigvalsh(hess))))
    factor = size / norm
    return [FourierMode(k=m.k, cos=m.cos * factor, sin=m.sin * factor) for m in modes]


def _scaled(modes: Sequence[FourierMode], factor: float) -> List[FourierMode]:
    return [FourierMode(k=m.k, cos=m.cos * factor, sin=m.sin * factor) for m in modes]


def ke_fixed_point(n: int = 2, N: int = 16, t_end: Optional[float] = None, config=None) -> Scenario:
    """omega_0 = omega_inf = I, Omega = 1: the stationary solution u = 0."""
    eye = np.eye(n)
    return make_scenario("ke_fixed_point", GridSpec(n, N), eye, eye, t_end=t_end, config=config)


def homogeneous(a: float = 2.0, b: float = 1.0, n: int = 1, N: int = 16, t_end: Optional[float] = None, config=None) -> Scenario:
    """omega_0 = a I, omega_inf = b I, Omega = 1: spatially constant data."""
    eye = np.eye(n)
    return make_scenario("homogeneous", GridSpec(n, N), a * eye, b * eye, t_end=t_end, config=config)


def generic_ample(
    n: int = 2,
    N: int = 16,
    seed: int = 7,
    amplitude: float = DEFAULT_AMPLITUDE,
    t_end: Optional[float] = None,
    config=None,
) -> Scenario:
    """B0 = 2I, B_inf = I with random low-frequency potentials; log Omega = psi_inf."""
    spec = GridSpec(n, N)
    rng = np.random.default_rng(seed)
    eye = np.eye(n)
    modes0 = random_potential(spec, rng, amplitude * 2.0)
    modes_inf = random_potential(spec, rng, amplitude * 1.0)
    return make_scenario("generic_ample", spec, 2.0 * eye, eye, modes0, modes_inf, t_end=t_end, config=config)


def fibration(
    n: int = 2,
    N: int = 16,
    seed: int = 7,
    amplitude: float = DEFAULT_AMPLITUDE,
    t_end: Optional[float] = None,
    config=None,
) -> Scenario:
    """
    Projection to the first torus factor: B_inf = diag(1, 0), psi_inf depends on (x1, y1) only.

    omega_inf is the pull-back of the base metric h = 1 + psi_inf_{1 1bar}; psi_0 = 0.
    """
    if n != 2:
        raise UnsupportedDimensionError(f"fibration needs n = 2, got n = {n}")
    spec = GridSpec(2, N)
    rng = np.random.default_rng(seed)
    modes_inf = random_potential(spec, rng, amplitude, active_axes=(0, 1), count=3)
    return make_scenario(
        "fibration", spec, np.eye(2), np.diag([1.0, 0.0]), (), modes_inf, t_end=t_end, config=config
    )


def finite_time(
    T: float = 1.0,
    n: int = 1,
    N: int = 16,
    b0: float = 2.0,
    seed: int = 7,
    amplitude: float = DEFAULT_AMPLITUDE,
    t_end: Optional[float] = None,
    config=None,
) -> Scenario:
    """
    Class degenerating exactly at T: B_inf = -b0 e^{-T} / (1 - e^{-T}) I so that B_T = 0.

    psi_inf = -e^{-T} psi_0 / (1 - e^{-T}) makes the potential part of omega_t vanish at T too.
    """
    spec = GridSpec(n, N)
    rng = np.random.default_rng(seed)
    ratio = math.exp(-T) / (1.0 - math.exp(-T))
    eye = np.eye(n)
    modes0 = random_potential(spec, rng, amplitude * b0)
    modes_inf = _scaled(modes0, -ratio)
    return make_scenario(
        "finite_time", spec, b0 * eye, -b0 * ratio * eye, modes0, modes_inf, t_end=t_end, config=config
    )


def build_scenario(cfg: ScenarioConfig, seed: int = 7) -> Scenario:
    """
    Build a scenario from its config (catalog entry or inline data).

    Args:
        cfg: Scenario config
        seed: Fallback seed when the config does not carry one

    Returns:
        Validated Scenario
    """
    seed = cfg.seed if cfg.seed is not None else seed
    amplitude = cfg.amplitude if cfg.amplitude is not None else DEFAULT_AMPLITUDE
    if cfg.name == "ke_fixed_point":
        return ke_fixed_point(cfg.n, cfg.N, cfg.t_end, config=cfg)
    if cfg.name == "homogeneous":
        return homogeneous(cfg.a, cfg.b, cfg.n, cfg.N, cfg.t_end, config=cfg)
    if cfg.name == "generic_ample":
        return generic_ample(cfg.n, cfg.N, seed, amplitude, cfg.t_end, config=cfg)
    if cfg.name == "fibration":
        return fibration(cfg.n, cfg.N, seed, amplitude, cfg.t_end, config=cfg)
    if cfg.name == "finite_time":
        return finite_time(cfg.T, cfg.n, cfg.N, seed=seed, amplitude=amplitude, t_end=cfg.t_end, config=cfg)
    spec = GridSpec(cfg.n, cfg.N)
    return make_scenario(
        "inline",
        spec,
        _matrix(cfg.B0, cfg.n),
        _matrix(cfg.B_inf, cfg.n),
        cfg.psi0,
        cfg.psi_inf,
        cfg.log_omega_offset,
        cfg.t_end,
        config=cfg,
    )


def builtin_scenarios(n: int = 2, N: int = 16, seed: int = 7) -> List[Scenario]:
    """The scenario catalog at one resolution (fibration only for n = 2)."""
    catalog = [
        ke_fixed_point(n, N),
        homogeneous(2.0, 1.0, n, N),
        generic_ample(n, N, seed),
        finite_time(1.0, n, N, seed=seed),
    ]
    if n == 2:
        catalog.append(fibration(2, N, seed))
    return catalog


# --- reference map for the Schwarz monitors ---

def reference_connection(s: Scenario) -> np.ndarray:
    """
    Christoffel symbols of the target metric pulled back along the reference map,
    values[..., i, j, k] = Gamma_ref^k_{ij}. Zero for flat references.
    """
    spec = s.spec
    gamma = np.zeros(spec.shape + (spec.n,) * 3, dtype=np.complex128)
    if s.reference_map == "projection":
        h = s.omega_T.values[..., 0, 0].real
        dh = gradient_z(ScalarField(spec, h))[..., 0]
        gamma[..., 0, 0, 0] = dh / h
    return gamma


def target_curvature_bound(s: Scenario) -> Optional[float]:
    """
    Upper bound C for the target's holomorphic bisectional curvature.

    0 for flat references; for the projection, max(0, sup kappa) with
    kappa = -h^{-1} d dbar log h the curvature of the base metric h. None when
    the scenario has no reference map.
    """
    if s.reference_map == "flat":
        return 0.0
    if s.reference_map == "projection":
        h = s.omega_T.values[..., 0, 0].real
        kappa = -levi_form_array(s.spec, np.log(h))[..., 0, 0].real / h
        return max(0.0, float(np.max(kappa)))
    return None
