"""
Monitor suite: evolution identities, bound certificates, Schwarz, gradient and Laplacian monitors.
"""
from .certificates import (
    bounded_above,
    certificate_u_upper,
    certificate_udot_decay,
    certificate_udot_exp_decay,
    certificate_volume_decay,
    finite_time_certificates,
    plateau,
)
from .identities import (
    Kinematics,
    finite_difference_udot,
    kinematics,
    residual_exp_udot,
    residual_first_tderiv,
    residual_potential_decrease,
    residual_ricci_form,
    residual_v_evolution,
    residual_volume_evolution,
    scalar_curvature_identities,
    v_field,
)
from .regularity import gradient_monitor, laplacian_monitor
from .schwarz import fiberwise_ratio, schwarz_combination, schwarz_monitor, second_fundamental_form
from .suite import MonitorSuite

__all__ = [
    "bounded_above",
    "certificate_u_upper",
    "certificate_udot_decay",
    "certificate_udot_exp_decay",
    "certificate_volume_decay",
    "finite_time_certificates",
    "plateau",
    "Kinematics",
    "finite_difference_udot",
    "kinematics",
    "residual_exp_udot",
    "residual_first_tderiv",
    "residual_potential_decrease",
    "residual_ricci_form",
    "residual_v_evolution",
    "residual_volume_evolution",
    "scalar_curvature_identities",
    "v_field",
    "gradient_monitor",
    "laplacian_monitor",
    "fiberwise_ratio",
    "schwarz_combination",
    "schwarz_monitor",
    "second_fundamental_form",
    "MonitorSuite",
]
