"""WIRES Experiments Package"""

from .sigma_sweep import SweepRow, sweep_sigma, sweep_frame, dominance_summary
from .convergence_trace import convergence_trace, geometric_tail_ratios
from .policy_curves import policy_curves, CURVE_MODES
from .j_curve import j_curve, sign_changes, default_lambda_grid
from .se_check import squared_error_grid

__all__ = [
    'SweepRow',
    'sweep_sigma',
    'sweep_frame',
    'dominance_summary',
    'convergence_trace',
    'geometric_tail_ratios',
    'policy_curves',
    'CURVE_MODES',
    'j_curve',
    'sign_changes',
    'default_lambda_grid',
    'squared_error_grid'
]
