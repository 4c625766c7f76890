"""
Maximum-principle bound certificates and boundedness (plateau) checks.

A certificate carries margin = bound - observed; negative margins fail and
name the witness grid point.
"""
import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from src.krflow.background import Scenario
from src.krflow.errors import UnsupportedCaseError
from src.krflow.flow import FlowState
from src.krflow.grid import ScalarField, argext
from src.krflow.models.report import CertificateResult, Witness

logger = logging.getLogger(__name__)


def pointwise_certificate(
    name: str,
    observed: ScalarField,
    bound,
    t: Optional[float] = None,
    detail: Optional[str] = None,
) -> CertificateResult:
    """
    Certify observed <= bound at every grid point.

    Args:
        name: Certificate name
        observed: Field that must stay below the bound
        bound: Scalar or array bound (broadcast against the grid)
        t: Snapshot time
        detail: Free-form note

    Returns:
        CertificateResult with the tightest point as witness
    """
    gap = np.broadcast_to(np.asarray(bound, dtype=np.float64), observed.values.shape) - observed.values
    index = argext(gap, "min")
    margin = float(gap[index])
    return CertificateResult(
        name=name,
        passed=margin >= 0.0,
        margin=margin,
        t=t,
        witness=Witness(index=list(index), value=float(observed.values[index]), t=t),
        detail=detail,
    )


def residual_certificate(name: str, residual, tolerance: float, scale: float, t: Optional[float] = None) -> CertificateResult:
    """Certify |residual| <= tolerance * scale in sup-norm."""
    magnitude = np.abs(residual.values)
    while magnitude.ndim > residual.spec.ndim:
        magnitude = magnitude.max(axis=-1)
    index = argext(magnitude, "max")
    worst = float(magnitude[index])
    bound = tolerance * scale
    return CertificateResult(
        name=name,
        passed=worst <= bound,
        margin=bound - worst,
        t=t,
        witness=Witness(index=list(index), value=worst, t=t),
        detail=f"sup |residual| = {worst:.3e}, allowed {bound:.3e}",
    )


def certificate_u_upper(s: Scenario, state: FlowState, C_u: float, tolerance: float = 1e-6) -> CertificateResult:
    """max u <= C_u + tolerance."""
    return pointwise_certificate("u_upper", state.u, C_u + tolerance, t=state.t, detail=f"C_u = {C_u:.6g}")


def certificate_udot_decay(
    s: Scenario, state: FlowState, C_u: float, tolerance: float = 1e-6
) -> Optional[CertificateResult]:
    """max udot <= (n t + C_u) / (e^t - 1) + tolerance for t >= 0.1; None before."""
    t = state.t
    if t < 0.1:
        return None
    bound = (s.n * t + C_u) / math.expm1(t) + tolerance
    return pointwise_certificate("udot_decay", state.udot, bound, t=t, detail=f"bound {bound:.6g}")


def volume_maxima(times: Sequence[float], maxima: Sequence[float]) -> List[float]:
    """m(t) = max_x e^t (udot_dot + udot) given per-snapshot maxima of udot_dot + udot."""
    return [math.exp(t) * m for t, m in zip(times, maxima)]


def certificate_volume_decay(
    times: Sequence[float], maxima: Sequence[float], slack: float = 1e-6, witnesses: Sequence[tuple] = ()
) -> CertificateResult:
    """
    Certify that m(t) = max_x e^t(udot_dot + udot) is non-increasing across snapshots.

    Args:
        times: Snapshot times
        maxima: max_x (udot_dot + udot) at each snapshot
        slack: Relative slack, applied as slack * (1 + |m|)
        witnesses: Grid index of each maximum (optional)

    Returns:
        CertificateResult with the worst increase
    """
    m = volume_maxima(times, maxima)
    worst_margin, worst_k = math.inf, None
    for k in range(1, len(m)):
        margin = m[k - 1] + slack * (1.0 + abs(m[k - 1])) - m[k]
        if margin < worst_margin:
            worst_margin, worst_k = margin, k
    if worst_k is None:
        return CertificateResult(name="volume_decay", passed=True, margin=math.inf, detail="single snapshot")
    index = list(witnesses[worst_k]) if len(witnesses) > worst_k else []
    return CertificateResult(
        name="volume_decay",
        passed=worst_margin >= 0.0,
        margin=worst_margin,
        t=times[worst_k],
        witness=Witness(index=index, value=m[worst_k], t=times[worst_k]),
        detail=f"m({times[worst_k - 1]:.4g}) = {m[worst_k - 1]:.6g}, m({times[worst_k]:.4g}) = {m[worst_k]:.6g}",
    )


def certificate_udot_exp_decay(
    times: Sequence[float],
    udot_max: Sequence[float],
    volume_max: Sequence[float],
    slack: float = 1e-6,
) -> CertificateResult:
    """
    udot <= C e^{-t}: C is read off the first snapshot at t >= 1, and e^t max udot
    must not increase between snapshots where e^t(udot_dot + udot) <= 0 at both ends.
    """
    E = [math.exp(t) * u for t, u in zip(times, udot_max)]
    start = next((k for k, t in enumerate(times) if t >= 1.0), None)
    if start is None:
        return CertificateResult(name="udot_exp_decay", passed=True, margin=math.inf, detail="no snapshot at t >= 1")
    C = E[start]
    worst_margin, worst_k = math.inf, None
    for k in range(start + 1, len(E)):
        if volume_max[k - 1] > 0.0 or volume_max[k] > 0.0:
            continue
        margin = E[k - 1] + slack * (1.0 + abs(E[k - 1])) - E[k]
        if margin < worst_margin:
            worst_margin, worst_k = margin, k
    t_witness = times[worst_k] if worst_k is not None else times[start]
    value = E[worst_k] if worst_k is not None else C
    return CertificateResult(
        name="udot_exp_decay",
        passed=worst_margin >= 0.0,
        margin=worst_margin,
        t=t_witness,
        witness=Witness(value=value, t=t_witness),
        detail=f"C = {C:.6g} from t = {times[start]:.4g}",
    )


def finite_time_certificates(
    s: Scenario,
    times: Sequence[float],
    v_min: Sequence[float],
    v_absmax: Sequence[float],
    udot_min: Sequence[float],
    slack: float = 0.2,
    udot_tolerance: float = 1e-4,
    C_early: Optional[float] = None,
) -> List[CertificateResult]:
    """
    Lower and two-sided bounds on v, and the lower bound on udot, before a finite horizon.

    C_early = sup_{t <= 0.2 T} |v| + 0.5 unless given; later snapshots must satisfy
    v >= -C_early, |v| <= C_early (1 + slack) and udot >= -C_early / (1 - e^{t-T}) - tol.

    Raises:
        UnsupportedCaseError: for scenarios with an infinite horizon
    """
    if not s.finite_horizon:
        raise UnsupportedCaseError(f"{s.name} has no finite horizon")
    T = s.T_horizon
    early = [a for t, a in zip(times, v_absmax) if t <= 0.2 * T]
    if C_early is None:
        C_early = (max(early) if early else 0.0) + 0.5
    checks = {"v_lower": (math.inf, None), "v_bounded": (math.inf, None), "udot_lower": (math.inf, None)}
    for k, t in enumerate(times):
        if t <= 0.2 * T:
            continue
        candidates = {
            "v_lower": v_min[k] + C_early,
            "v_bounded": C_early * (1.0 + slack) - v_absmax[k],
            "udot_lower": udot_min[k] + C_early / (1.0 - math.exp(t - T)) + udot_tolerance,
        }
        for name, margin in candidates.items():
            if margin < checks[name][0]:
                checks[name] = (margin, k)
    results = []
    for name, (margin, k) in checks.items():
        t_witness = times[k] if k is not None else None
        results.append(
            CertificateResult(
                name=f"finite_time_{name}",
                passed=margin >= 0.0,
                margin=margin,
                t=t_witness,
                witness=Witness(value=margin, t=t_witness) if k is not None else None,
                detail=f"C_early = {C_early:.6g}",
            )
        )
    return results


def _window(times: Sequence[float], values: Sequence[float], t_start: float) -> tuple:
    pairs = [(t, v) for t, v in zip(times, values) if t >= t_start - 1e-12 and not math.isnan(v)]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def _allowance(ref: float, values: Sequence[float], tolerance: float, floor: float) -> float:
    """tolerance * max(|ref|, floor * peak) with peak the largest |value| over the whole series."""
    peak = max((abs(v) for v in values if not math.isnan(v)), default=0.0)
    return tolerance * max(abs(ref), floor * peak)


def plateau(
    name: str,
    times: Sequence[float],
    values: Sequence[float],
    t_start: float,
    tolerance: float = 0.05,
    floor: float = 0.5,
) -> Optional[CertificateResult]:
    """
    Values over [t_start, end] stay within tolerance * max(|ref|, floor * peak) of ref = value at t_start.

    peak is the largest magnitude over the whole series, so quantities that
    settle near zero are held to their own scale.

    Returns None when the window holds fewer than two snapshots.
    """
    ts, vs = _window(times, values, t_start)
    if len(vs) < 2:
        return None
    ref = vs[0]
    allowed = _allowance(ref, values, tolerance, floor)
    deviations = [abs(v - ref) for v in vs]
    k = int(np.argmax(deviations))
    return CertificateResult(
        name=f"plateau_{name}",
        passed=deviations[k] <= allowed,
        margin=allowed - deviations[k],
        t=ts[k],
        witness=Witness(value=vs[k], t=ts[k]),
        detail=f"reference {ref:.6g} at t = {ts[0]:.4g}, allowed change {allowed:.3e}",
    )


def bounded_above(
    name: str,
    times: Sequence[float],
    values: Sequence[float],
    t_start: float,
    tolerance: float = 0.05,
    floor: float = 0.5,
) -> Optional[CertificateResult]:
    """Values over [t_start, end] do not grow beyond ref + tolerance * max(|ref|, floor * peak)."""
    ts, vs = _window(times, values, t_start)
    if len(vs) < 2:
        return None
    ref = vs[0]
    bound = ref + _allowance(ref, values, tolerance, floor)
    k = int(np.argmax(vs))
    return CertificateResult(
        name=f"bounded_{name}",
        passed=vs[k] <= bound,
        margin=bound - vs[k],
        t=ts[k],
        witness=Witness(value=vs[k], t=ts[k]),
        detail=f"reference {ref:.6g} at t = {ts[0]:.4g}",
    )
