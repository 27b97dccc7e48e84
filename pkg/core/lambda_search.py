"""
WIRES - Lambda Search
Evaluates the relaxed cost J(λ) and finds the λ* at which it changes sign.

J(λ) > 0 below the optimal time-average cost and J(λ) < 0 above it, so a sign
bisection on J recovers both the optimal cost λ* and the policy solved at λ*.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import bisect

from core.bellman_solver import (
    CostParams, ErrorGrid, Policy, SolveReport, SolverSettings, ValueFunction,
    extract_policy, first_step_value, h_zero, solve_g_infinity
)
from core.stochastic import (
    DelayModel, RngStream, delay_moments, delay_quadrature, delay_samples, delay_support_grid
)
from utils.errors import BracketError
from utils.logger import get_logger

logger = get_logger()

# Stream id reserved for the Monte Carlo outer expectation
OUTER_STREAM_ID = 7


@dataclass
class JEvaluation:
    """J(λ) together with the value function and report it was computed from."""
    lam: float
    J: float
    value_function: ValueFunction
    report: SolveReport

    @property
    def converged(self) -> bool:
        return self.report.converged


@dataclass
class LambdaStarResult:
    """Outcome of the λ* search."""
    lambda_star: float
    policy: Policy
    report: SolveReport
    value_function: ValueFunction
    bracket: Tuple[float, float]
    trace: List[Tuple[float, float, bool]] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.report.converged

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(lam, j, int(ok)) for lam, j, ok in self.trace],
            columns=['lambda', 'J', 'converged']
        )

    def to_dict(self) -> dict:
        return {
            'lambda_star': self.lambda_star,
            'bracket': list(self.bracket),
            'J_at_lambda_star': self.report.J_value,
            'iterations': self.report.iterations,
            'converged': self.report.converged,
            'stop_threshold': self.policy.stop_threshold(),
            'evaluations': len(self.trace),
        }


def _outer_nodes(model: DelayModel, settings: SolverSettings, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for the expectation over the realized delay Y."""
    if settings.outer_expectation == 'quadrature' or model.kind in ('deterministic', 'discrete'):
        return delay_quadrature(model, settings.delay_nodes)
    # Fixed draws for a given seed keep J(λ) a deterministic function of λ
    draws = delay_samples(model, settings.outer_mc_draws, RngStream(seed, OUTER_STREAM_ID))
    return draws, np.full(draws.size, 1.0 / draws.size)


def evaluate_J(
    lam: float,
    model: DelayModel,
    c_s: float,
    c_tau: float,
    grid: Optional[ErrorGrid] = None,
    tol: Optional[float] = None,
    settings: Optional[SolverSettings] = None,
    seed: int = 0
) -> JEvaluation:
    """J(λ) = h_0 + E_Y[first-step value], after solving g∞ at λ."""
    settings = settings or SolverSettings()
    tol = settings.tol if tol is None else tol

    params = CostParams(c_s, c_tau, float(lam))
    moments = delay_moments(model)
    mu_y = moments[0]
    if grid is None:
        grid = settings.grid_for(params.offset(mu_y))

    vf, report = solve_g_infinity(
        params, mu_y, grid, tol, settings.max_iter, settings.z_search, settings.n_quad
    )

    nodes, weights = _outer_nodes(model, settings, seed)
    values, _ = first_step_value(nodes, vf, params, mu_y, settings.z_search, settings.n_quad)
    J = h_zero(params, moments) + float(np.dot(weights, values))

    report.J_value = J
    logger.lambda_step(params.lam, J, report.converged)
    return JEvaluation(lam=params.lam, J=J, value_function=vf, report=report)


def default_bracket(model: DelayModel, c_s: float, c_tau: float) -> Tuple[float, float]:
    mu_y, _ = delay_moments(model)
    return 0.0, c_tau + c_s + 10.0 * (mu_y + 1.0)


def find_lambda_star(
    model: DelayModel,
    c_s: float,
    c_tau: float,
    bracket: Optional[Tuple[float, float]] = None,
    tol_lambda: float = 1e-4,
    settings: Optional[SolverSettings] = None,
    max_expansions: int = 40,
    seed: int = 0
) -> LambdaStarResult:
    """
    Bisect on the sign of J(λ) to width tol_lambda.

    The upper end of the bracket doubles until J < 0; a lower end with J <= 0
    falls back to 0, where J is always positive. Raises BracketError if no
    sign change can be bracketed.
    """
    settings = settings or SolverSettings()
    if not tol_lambda > 0:
        raise ValueError(f"tol_lambda must be > 0, got {tol_lambda}")

    lo, hi = bracket if bracket is not None else default_bracket(model, c_s, c_tau)
    lo, hi = float(lo), float(hi)
    if lo < 0 or hi <= lo:
        raise BracketError('solver.bracket', f"need 0 <= lo < hi, got ({lo}, {hi})")

    evaluations = {}
    trace: List[Tuple[float, float, bool]] = []

    def J(lam: float) -> float:
        if lam not in evaluations:
            ev = evaluate_J(lam, model, c_s, c_tau, settings=settings, seed=seed)
            evaluations[lam] = ev
            trace.append((ev.lam, ev.J, ev.converged))
        return evaluations[lam].J

    if J(lo) <= 0:
        if lo == 0.0:
            raise BracketError('solver.bracket', f"J(0) = {J(lo):.6g} is not positive")
        logger.info(f"J({lo:.6g}) <= 0, moving lower bracket end to 0")
        lo = 0.0
        if J(lo) <= 0:
            raise BracketError('solver.bracket', f"J(0) = {J(lo):.6g} is not positive")

    expansions = 0
    while J(hi) >= 0:
        if expansions >= max_expansions:
            raise BracketError(
                'solver.bracket',
                f"J stayed nonnegative up to λ = {hi:.6g} after {max_expansions} expansions"
            )
        lo = hi
        hi *= 2.0
        expansions += 1
        logger.info(f"Expanding λ bracket to ({lo:.6g}, {hi:.6g})")

    bracket_used = (lo, hi)
    lam_star = float(bisect(J, lo, hi, xtol=tol_lambda, maxiter=200))

    final = evaluations.get(lam_star)
    if final is None:
        J(lam_star)
        final = evaluations[lam_star]

    params = CostParams(c_s, c_tau, lam_star)
    mu_y, _ = delay_moments(model)
    policy = extract_policy(
        final.value_function, params, mu_y, settings.z_search, settings.n_quad,
        delays=delay_support_grid(model, settings.first_step_points)
    )

    logger.info(
        f"λ* = {lam_star:.6f} | J(λ*) = {final.J:+.3e} | {len(trace)} evaluations | "
        f"bracket ({bracket_used[0]:.4g}, {bracket_used[1]:.4g})"
    )
    if not final.converged:
        logger.convergence_alert(f"policy at λ* = {lam_star:.6f} comes from an unconverged solve")

    return LambdaStarResult(
        lambda_star=lam_star,
        policy=policy,
        report=final.report,
        value_function=final.value_function,
        bracket=bracket_used,
        trace=trace
    )
