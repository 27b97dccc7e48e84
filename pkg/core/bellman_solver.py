"""
WIRES - Bellman Solver
Value iteration for the penalized per-epoch cost on a discretized error grid.

State: sampling error E = (W_S - W_last_tx)², the squared displacement of the
latest sample from the last transmitted one. From E the sender either transmits
(cost 0 from here on) or waits z and samples again, paying

    h(z, E) = (z + E - λ + μ_Y)²/2 - (E - λ + μ_Y)²/2 + c_s

and moving to E' = (√E + √z·G)², G ~ N(0, 1). Every quantity below depends on
(λ, μ_Y) only through the offset a = λ - μ_Y.
"""

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from utils.logger import get_logger

logger = get_logger()

ArrayLike = Union[float, np.ndarray]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
# States minimized per vectorized block (bounds the (states, z, nodes) tensor)
BLOCK_SIZE = 1024


@dataclass(frozen=True)
class CostParams:
    """Sampling cost c_s, transmission cost c_tau and Lagrange multiplier λ."""
    c_s: float
    c_tau: float
    lam: float = 0.0

    def __post_init__(self):
        if not self.c_s > 0:
            raise ValueError(f"c_s must be > 0, got {self.c_s}")
        if not self.c_tau > 0:
            raise ValueError(f"c_tau must be > 0, got {self.c_tau}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")

    def offset(self, mu_y: float) -> float:
        """λ - μ_Y, the only way λ and μ_Y enter the recursion."""
        return self.lam - mu_y

    def with_lambda(self, lam: float) -> 'CostParams':
        return replace(self, lam=float(lam))


@dataclass(frozen=True)
class ZSearch:
    """
    Inner minimization over the waiting time z ∈ [0, z_max].

    A coarse scan over a geometric-plus-linear grid picks the best cell, then
    golden-section search refines inside the neighbouring cells.
    """
    z_max: Optional[float] = None
    n_geometric: int = 24
    n_linear: int = 41
    z_min_geometric: float = 1e-4
    tol: float = 1e-6
    tie_tol: float = 1e-9

    def __post_init__(self):
        if self.z_max is not None and not self.z_max > 0:
            raise ValueError(f"z_max must be > 0, got {self.z_max}")
        if self.n_linear < 2 or self.n_geometric < 0:
            raise ValueError("z search needs n_linear >= 2 and n_geometric >= 0")
        if not self.tol > 0:
            raise ValueError(f"z search tol must be > 0, got {self.tol}")

    def upper(self, offset: float) -> float:
        if self.z_max is not None:
            return self.z_max
        return 2.0 * max(offset, 0.0) + 1.0

    def coarse_grid(self, offset: float) -> np.ndarray:
        z_max = self.upper(offset)
        parts = [np.array([0.0]), np.linspace(0.0, z_max, self.n_linear)]
        if self.n_geometric > 0:
            parts.append(np.geomspace(min(self.z_min_geometric, z_max), z_max, self.n_geometric))
        return np.unique(np.concatenate(parts))

    def cell_width(self, offset: float) -> float:
        return float(np.max(np.diff(self.coarse_grid(offset))))


def default_e_max(offset: float, z_max: Optional[float] = None) -> float:
    """Upper end of the error grid: well inside the stop region."""
    a = max(offset, 0.0)
    z_upper = z_max if z_max is not None else 2.0 * a + 1.0
    return max(4.0 * a, a + 6.0 * math.sqrt(z_upper), 10.0)


@dataclass(frozen=True, eq=False)
class ErrorGrid:
    """Strictly increasing error values starting at exactly 0."""
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 3:
            raise ValueError("error grid needs at least 3 points")
        if pts[0] != 0.0:
            raise ValueError(f"error grid must start at 0, got {pts[0]}")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("error grid must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, 'points', pts)

    @classmethod
    def uniform(cls, e_max: float, n_points: int = 2001) -> 'ErrorGrid':
        return cls(np.linspace(0.0, e_max, n_points))

    @classmethod
    def for_offset(
        cls,
        offset: float,
        z_max: Optional[float] = None,
        n_points: int = 2001,
        e_max: Optional[float] = None
    ) -> 'ErrorGrid':
        if e_max is None:
            e_max = default_e_max(offset, z_max)
        return cls.uniform(e_max, n_points)

    @property
    def e_max(self) -> float:
        return float(self.points[-1])

    @property
    def spacing(self) -> float:
        return float(np.max(np.diff(self.points)))

    def __len__(self) -> int:
        return self.points.size

    def nearest_index(self, e: float) -> int:
        idx = int(np.searchsorted(self.points, e))
        if idx == 0:
            return 0
        if idx >= self.points.size:
            return self.points.size - 1
        return idx if self.points[idx] - e < e - self.points[idx - 1] else idx - 1


@dataclass
class ValueFunction:
    """Tabulated g(E); linear in between, 0 beyond e_max."""
    grid: ErrorGrid
    values: np.ndarray

    @classmethod
    def zeros(cls, grid: ErrorGrid) -> 'ValueFunction':
        return cls(grid, np.zeros(len(grid)))

    @classmethod
    def constant(cls, grid: ErrorGrid, value: float) -> 'ValueFunction':
        return cls(grid, np.full(len(grid), float(value)))

    def __call__(self, e: ArrayLike) -> ArrayLike:
        return np.interp(e, self.grid.points, self.values, right=0.0)

    def sup_distance(self, other: 'ValueFunction') -> float:
        return float(np.max(np.abs(self.values - other.values)))


@dataclass
class Policy:
    """Waiting times, stop region and first-step rule Z₁*(y)."""
    grid: ErrorGrid
    z_star: np.ndarray
    stop: np.ndarray
    first_step_delays: np.ndarray
    first_step_waits: np.ndarray
    first_step_values: np.ndarray
    lam: float = float('nan')
    mu_y: float = float('nan')

    def should_stop(self, e: float) -> bool:
        if e > self.grid.e_max:
            return True
        return bool(self.stop[self.grid.nearest_index(e)])

    def wait_time(self, e: float) -> float:
        return float(np.interp(e, self.grid.points, self.z_star, right=0.0))

    def first_wait(self, y: float) -> float:
        return float(np.interp(y, self.first_step_delays, self.first_step_waits))

    def stop_threshold(self) -> float:
        """Smallest grid error at which the policy transmits."""
        hits = np.flatnonzero(self.stop)
        return float(self.grid.points[hits[0]]) if hits.size else float('inf')


@dataclass
class SolveReport:
    """Trace of one value-iteration solve."""
    lam: float
    iterations: int
    sup_diffs: List[float] = field(default_factory=list)
    converged: bool = False
    J_value: float = float('nan')

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'iteration': np.arange(1, len(self.sup_diffs) + 1),
            'sup_diff': np.asarray(self.sup_diffs, dtype=float),
        })


@dataclass(frozen=True)
class SolverSettings:
    """Solver knobs shared by every λ-level operation."""
    tol: float = 1e-6
    max_iter: int = 500
    n_quad: int = 33
    n_points: int = 2001
    e_max: Optional[float] = None
    z_search: ZSearch = ZSearch()
    outer_expectation: str = 'quadrature'
    outer_mc_draws: int = 10_000
    delay_nodes: int = 32
    first_step_points: int = 101

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.n_quad < 3:
            raise ValueError(f"n_quad must be >= 3, got {self.n_quad}")
        if self.outer_expectation not in ('quadrature', 'monte_carlo'):
            raise ValueError(f"unknown outer_expectation {self.outer_expectation!r}")

    def grid_for(self, offset: float) -> ErrorGrid:
        return ErrorGrid.for_offset(offset, self.z_search.z_max, self.n_points, self.e_max)


# =============================================================================
# Stage cost and transition
# =============================================================================

def _stage_cost(z: ArrayLike, x: ArrayLike, offset: float, c_s: float) -> ArrayLike:
    return (z + x - offset) ** 2 / 2.0 - (x - offset) ** 2 / 2.0 + c_s


def stage_cost_h(z: ArrayLike, x: ArrayLike, params: CostParams, mu_y: float) -> ArrayLike:
    """h(z, x): penalized cost of waiting z from error-or-delay state x."""
    if np.any(np.asarray(z) < 0) or np.any(np.asarray(x) < 0):
        raise ValueError("h(z, x) needs z >= 0 and x >= 0")
    return _stage_cost(z, x, params.offset(mu_y), params.c_s)


def h_zero(params: CostParams, moments: Tuple[float, float]) -> float:
    """h_0 = c_tau - (λ - μ_Y)·μ_Y + E[Y²]/2."""
    mu_y, second_moment = moments
    return params.c_tau - (params.lam - mu_y) * mu_y + second_moment / 2.0


@lru_cache(maxsize=None)
def gauss_hermite(n_quad: int) -> Tuple[np.ndarray, np.ndarray]:
    """Probabilists' Gauss–Hermite nodes with weights normalized to sum to 1."""
    if n_quad < 3:
        raise ValueError(f"n_quad must be >= 3, got {n_quad}")
    nodes, weights = np.polynomial.hermite_e.hermegauss(n_quad)
    weights = weights / weights.sum()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def transition_expectation(vf: ValueFunction, e: ArrayLike, z: ArrayLike, n_quad: int = 33) -> ArrayLike:
    """E[g(E')] with E' = (√e + √z·G)², by Gauss–Hermite quadrature."""
    e_arr = np.asarray(e, dtype=float)
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0):
        raise ValueError("waiting time z must be >= 0")
    if np.any(e_arr < 0):
        raise ValueError("error state e must be >= 0")

    nodes, weights = gauss_hermite(n_quad)
    e_b, z_b = np.broadcast_arrays(e_arr, z_arr)
    nxt = (np.sqrt(e_b)[..., None] + np.sqrt(z_b)[..., None] * nodes) ** 2
    out = vf(nxt) @ weights
    # z = 0 is a deterministic transition
    out = np.where(z_b == 0, vf(e_b), out)
    return float(out) if out.ndim == 0 else out


def _continuation_cost(
    vf: ValueFunction,
    states: np.ndarray,
    z: np.ndarray,
    offset: float,
    c_s: float,
    n_quad: int,
    first_step: bool
) -> np.ndarray:
    """h(z, x) + E[g(next error)], broadcasting states against z."""
    nodes, weights = gauss_hermite(n_quad)
    stage = _stage_cost(z, states, offset, c_s)
    if first_step:
        # After a delivery the error restarts from a zero-mean increment of variance y + z
        nxt = (states + z)[..., None] * (nodes * nodes)
    else:
        nxt = (np.sqrt(states)[..., None] + np.sqrt(z)[..., None] * nodes) ** 2
    return stage + vf(nxt) @ weights


def _golden_section(
    f: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    tol: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Golden-section search run independently on every bracket [lo_i, hi_i]."""
    a = lo.astype(float).copy()
    b = hi.astype(float).copy()
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc = f(c)
    fd = f(d)

    while np.max(b - a) > tol:
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        kept = np.where(left, c, d)
        f_kept = np.where(left, fc, fd)
        probe = np.where(left, b - INV_PHI * (b - a), a + INV_PHI * (b - a))
        f_probe = f(probe)
        c = np.where(left, probe, kept)
        fc = np.where(left, f_probe, f_kept)
        d = np.where(left, kept, probe)
        fd = np.where(left, f_kept, f_probe)

    mid = (a + b) / 2.0
    return mid, f(mid)


def _minimize_continuation(
    vf: ValueFunction,
    states: np.ndarray,
    offset: float,
    c_s: float,
    z_search: ZSearch,
    n_quad: int,
    first_step: bool = False
) -> Tuple[np.ndarray, np.ndarray]:
    """min over z ≥ 0 of h(z, x) + E[g(next)], per state; returns (value, argmin)."""
    states = np.asarray(states, dtype=float).reshape(-1)
    z_grid = z_search.coarse_grid(offset)
    m = z_grid.size

    best_val = np.empty_like(states)
    best_z = np.empty_like(states)

    for start in range(0, states.size, BLOCK_SIZE):
        x = states[start:start + BLOCK_SIZE]
        rows = np.arange(x.size)

        coarse = _continuation_cost(vf, x[:, None], z_grid[None, :], offset, c_s, n_quad, first_step)
        coarse_min = coarse.min(axis=1)
        # Smallest z attaining the minimum within tie_tol
        k = np.argmax(coarse <= coarse_min[:, None] + z_search.tie_tol, axis=1)
        k_val = coarse[rows, k]

        lo = z_grid[np.maximum(k - 1, 0)]
        hi = z_grid[np.minimum(k + 1, m - 1)]
        z_ref, f_ref = _golden_section(
            lambda zz: _continuation_cost(vf, x, zz, offset, c_s, n_quad, first_step),
            lo, hi, z_search.tol
        )

        better = f_ref < k_val - z_search.tie_tol
        best_val[start:start + x.size] = np.where(better, f_ref, k_val)
        best_z[start:start + x.size] = np.where(better, z_ref, z_grid[k])

    return best_val, best_z


# =============================================================================
# Value iteration
# =============================================================================

def bellman_backup(
    vf_prev: ValueFunction,
    params: CostParams,
    mu_y: float,
    z_search: ZSearch = ZSearch(),
    n_quad: int = 33
) -> ValueFunction:
    """g_{r+1}(E) = min{0, min_z [h(z, E) + E[g_r(E')]]} on every grid point."""
    best, _ = _minimize_continuation(
        vf_prev, vf_prev.grid.points, params.offset(mu_y), params.c_s, z_search, n_quad
    )
    # Transmit-now is preferred on ties
    values = np.where(best >= -z_search.tie_tol, 0.0, best)
    return ValueFunction(vf_prev.grid, values)


def solve_g_infinity(
    params: CostParams,
    mu_y: float,
    grid: Optional[ErrorGrid] = None,
    tol: float = 1e-6,
    max_iter: int = 500,
    z_search: ZSearch = ZSearch(),
    n_quad: int = 33
) -> Tuple[ValueFunction, SolveReport]:
    """
    Iterate the backup from g_0 = 0 until the sup-norm change is <= tol.

    Non-convergence within max_iter is flagged in the report, not raised.
    """
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if grid is None:
        grid = ErrorGrid.for_offset(params.offset(mu_y), z_search.z_max)

    vf = ValueFunction.zeros(grid)
    sup_diffs: List[float] = []
    converged = False

    for iteration in range(1, max_iter + 1):
        nxt = bellman_backup(vf, params, mu_y, z_search, n_quad)
        diff = nxt.sup_distance(vf)
        sup_diffs.append(diff)
        vf = nxt
        logger.solve_progress(params.lam, iteration, diff)
        if diff <= tol:
            converged = True
            break

    report = SolveReport(lam=params.lam, iterations=len(sup_diffs), sup_diffs=sup_diffs, converged=converged)
    if converged:
        logger.debug(f"Solved g∞ at λ={params.lam:.6g} in {report.iterations} iterations")
    else:
        logger.convergence_alert(
            f"value iteration at λ={params.lam:.6g} stopped after {max_iter} iterations "
            f"(last sup diff {sup_diffs[-1]:.3e} > tol {tol:.1e})"
        )
    return vf, report


def first_step_value(
    y: ArrayLike,
    vf: ValueFunction,
    params: CostParams,
    mu_y: float,
    z_search: ZSearch = ZSearch(),
    n_quad: int = 33
) -> Tuple[ArrayLike, ArrayLike]:
    """
    min_z [h(z, y) + E[g∞((√(y+z)·G)²)]] and its argmin Z₁*(y).

    No transmit-now option: every packet carries at least one fresh sample.
    Accepts a scalar delay or an array of delays.
    """
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0):
        raise ValueError("realized delay y must be >= 0")

    values, waits = _minimize_continuation(
        vf, y_arr, params.offset(mu_y), params.c_s, z_search, n_quad, first_step=True
    )
    if y_arr.ndim == 0:
        return float(values[0]), float(waits[0])
    return values.reshape(y_arr.shape), waits.reshape(y_arr.shape)


def extract_policy(
    vf: ValueFunction,
    params: CostParams,
    mu_y: float,
    z_search: ZSearch = ZSearch(),
    n_quad: int = 33,
    delays: Optional[np.ndarray] = None
) -> Policy:
    """Argmin waiting times, stop region and first-step table from a value function."""
    offset = params.offset(mu_y)
    best, z = _minimize_continuation(vf, vf.grid.points, offset, params.c_s, z_search, n_quad)
    stop = best >= -z_search.tie_tol
    z_star = np.where(stop, 0.0, z)

    if delays is None:
        delays = np.linspace(0.0, max(offset, 0.0) + 1.0, 101)
    delays = np.asarray(delays, dtype=float)
    fs_values, fs_waits = first_step_value(delays, vf, params, mu_y, z_search, n_quad)

    return Policy(
        grid=vf.grid,
        z_star=z_star,
        stop=stop,
        first_step_delays=delays,
        first_step_waits=np.atleast_1d(fs_waits),
        first_step_values=np.atleast_1d(fs_values),
        lam=params.lam,
        mu_y=mu_y
    )


def policy_table(vf: ValueFunction, policy: Policy) -> pd.DataFrame:
    """Rows (E, g, z_star, stop) for CSV export."""
    return pd.DataFrame({
        'E': vf.grid.points,
        'g': vf.values,
        'z_star': policy.z_star,
        'stop': policy.stop.astype(int),
    })


def first_step_table(policy: Policy) -> pd.DataFrame:
    """Rows (y, z1_star, value) of the first-step rule."""
    return pd.DataFrame({
        'y': policy.first_step_delays,
        'z1_star': policy.first_step_waits,
        'value': policy.first_step_values,
    })
