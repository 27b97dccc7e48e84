"""
WIRES - J(λ) Scan
Evaluates J on a λ grid to check it decreases and changes sign once.
"""

from typing import Optional, Sequence

import numpy as np
import pandas as pd

from core.bellman_solver import SolverSettings
from core.lambda_search import default_bracket, evaluate_J
from core.stochastic import DelayModel


def default_lambda_grid(model: DelayModel, c_s: float, c_tau: float, n: int = 21) -> np.ndarray:
    lo, hi = default_bracket(model, c_s, c_tau)
    return np.linspace(lo, hi, n)


def j_curve(
    lambda_grid: Sequence[float],
    model: DelayModel,
    c_s: float,
    c_tau: float,
    settings: Optional[SolverSettings] = None,
    seed: int = 0
) -> pd.DataFrame:
    """Rows (lambda, J, converged)."""
    rows = []
    for lam in lambda_grid:
        ev = evaluate_J(float(lam), model, c_s, c_tau, settings=settings, seed=seed)
        rows.append((ev.lam, ev.J, int(ev.converged)))
    return pd.DataFrame(rows, columns=['lambda', 'J', 'converged'])


def sign_changes(frame: pd.DataFrame) -> int:
    """Number of strict sign changes of J along the λ order; zeros are skipped."""
    signs = np.sign(frame.sort_values('lambda')['J'].to_numpy())
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def is_strictly_decreasing(frame: pd.DataFrame) -> bool:
    values = frame.sort_values('lambda')['J'].to_numpy()
    return bool(np.all(np.diff(values) < 0))
