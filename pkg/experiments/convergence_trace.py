"""
WIRES - Convergence Trace
Sup-norm change per value-iteration step at a fixed λ.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.bellman_solver import CostParams, ErrorGrid, SolveReport, SolverSettings, solve_g_infinity
from core.stochastic import DelayModel, delay_moments


def convergence_trace(
    c_s: float,
    c_tau: float,
    lam: float,
    model: DelayModel,
    grid: Optional[ErrorGrid] = None,
    settings: Optional[SolverSettings] = None
) -> Tuple[pd.DataFrame, SolveReport]:
    """Rows (iter, sup_diff) of one solve, plus its report."""
    settings = settings or SolverSettings()
    params = CostParams(c_s, c_tau, lam)
    mu_y, _ = delay_moments(model)
    if grid is None:
        grid = settings.grid_for(params.offset(mu_y))

    _, report = solve_g_infinity(
        params, mu_y, grid, settings.tol, settings.max_iter, settings.z_search, settings.n_quad
    )
    frame = report.to_frame().rename(columns={'iteration': 'iter'})
    return frame, report


def geometric_tail_ratios(sup_diffs: Sequence[float], window: int = 10) -> np.ndarray:
    """Successive ratios sup_diff[i+1] / sup_diff[i] over the last `window` steps."""
    diffs = np.asarray(sup_diffs, dtype=float)[-(window + 1):]
    prev, nxt = diffs[:-1], diffs[1:]
    # An exact zero means the iteration already sits on the fixed point
    keep = prev > 0
    return nxt[keep] / prev[keep]
