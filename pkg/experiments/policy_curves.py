"""
WIRES - Policy Curves
Optimal waiting time Z*(E) per (σ², c_tau).

mode="fixed" solves at one user-given λ; c_tau never enters the backup, so
those curves depend on (c_s, λ - μ_Y) only. mode="lambda_star" solves each
combination at its own λ*, which is where c_tau shows up.
"""

from typing import Optional, Sequence, Tuple

import pandas as pd

from core.bellman_solver import CostParams, SolverSettings, extract_policy, solve_g_infinity
from core.lambda_search import find_lambda_star
from core.stochastic import variance_family
from utils.logger import get_logger

logger = get_logger()

CURVE_MODES = ('fixed', 'lambda_star', 'both')
CURVE_COLUMNS = ['sigma2', 'c_tau', 'e', 'z_star', 'mode', 'lambda']


def _curve_rows(sigma2: float, c_tau: float, mode: str, lam: float, policy) -> pd.DataFrame:
    return pd.DataFrame({
        'sigma2': sigma2,
        'c_tau': c_tau,
        'e': policy.grid.points,
        'z_star': policy.z_star,
        'mode': mode,
        'lambda': lam,
    })


def policy_curves(
    c_s: float,
    lam: float,
    mu_y: float,
    c_tau_list: Sequence[float],
    sigma2_list: Sequence[float],
    family: str = 'lognormal',
    mode: str = 'both',
    settings: Optional[SolverSettings] = None,
    tol_lambda: float = 1e-4,
    bracket: Optional[Tuple[float, float]] = None,
    seed: int = 0
) -> pd.DataFrame:
    """Rows (sigma2, c_tau, e, z_star, mode, lambda) for every requested curve."""
    if mode not in CURVE_MODES:
        raise ValueError(f"mode must be one of {CURVE_MODES}, got {mode!r}")
    settings = settings or SolverSettings()
    frames = []

    if mode in ('fixed', 'both'):
        # One solve serves every (σ², c_tau): the backup sees only c_s and λ - μ_Y
        params = CostParams(c_s, min(c_tau_list), lam)
        vf, _ = solve_g_infinity(
            params, mu_y, settings.grid_for(params.offset(mu_y)),
            settings.tol, settings.max_iter, settings.z_search, settings.n_quad
        )
        policy = extract_policy(vf, params, mu_y, settings.z_search, settings.n_quad)
        for sigma2 in sigma2_list:
            for c_tau in c_tau_list:
                frames.append(_curve_rows(float(sigma2), float(c_tau), 'fixed', lam, policy))

    if mode in ('lambda_star', 'both'):
        for sigma2 in sigma2_list:
            model = variance_family(family, mu_y, float(sigma2))
            for c_tau in c_tau_list:
                search = find_lambda_star(model, c_s, float(c_tau), bracket, tol_lambda, settings, seed=seed)
                logger.info(f"CURVES | σ² = {sigma2:g} | c_tau = {c_tau:g} | λ* = {search.lambda_star:.6f}")
                frames.append(_curve_rows(float(sigma2), float(c_tau), 'lambda_star', search.lambda_star, search.policy))

    return pd.concat(frames, ignore_index=True)[CURVE_COLUMNS]
