"""
WIRES - Epoch Simulator
Discrete-event Monte Carlo of a sampling/transmission policy over a channel
with one packet in flight.

An epoch runs from one delivery to the next: the sender waits, samples until
the policy says transmit, and the packet arrives after a random delay. The
estimator holds the last delivered sample, so the squared error integrates the
Wiener displacement from that sample over the whole epoch. Epochs are IID, and
the time-average cost is the renewal-reward ratio of per-epoch sums.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid
from scipy.stats import t as student_t

from core.bellman_solver import Policy
from core.stochastic import DelayModel, RngStream, delay_sample
from utils.logger import get_logger

logger = get_logger()

POLICY_KINDS = ('optimal', 'periodic', 'zero_wait')


@dataclass(frozen=True)
class PolicySpec:
    """Which rule drives the sender."""
    kind: str
    policy: Optional[Policy] = None
    period: float = 0.0

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"policy kind must be one of {POLICY_KINDS}, got {self.kind!r}")
        if self.kind == 'optimal' and self.policy is None:
            raise ValueError("optimal policy spec needs a solved Policy")
        if self.kind == 'periodic' and not self.period > 0:
            raise ValueError(f"periodic T must be > 0, got {self.period}")

    @classmethod
    def optimal(cls, policy: Policy) -> 'PolicySpec':
        return cls(kind='optimal', policy=policy)

    @classmethod
    def periodic(cls, period: float) -> 'PolicySpec':
        return cls(kind='periodic', period=float(period))

    @classmethod
    def zero_wait(cls) -> 'PolicySpec':
        return cls(kind='zero_wait')

    @property
    def label(self) -> str:
        if self.kind == 'periodic':
            return f"periodic(T={self.period:g})"
        return self.kind

    def first_wait(self, y: float) -> float:
        if self.kind == 'optimal':
            return max(self.policy.first_wait(y), 0.0)
        if self.kind == 'periodic':
            return self.period
        return 0.0

    def should_stop(self, error: float) -> bool:
        # Baselines transmit every sample
        if self.kind != 'optimal':
            return True
        return self.policy.should_stop(error)

    def wait_time(self, error: float) -> float:
        return max(self.policy.wait_time(error), 0.0)


@dataclass(frozen=True)
class SimSettings:
    n_epochs: int = 20_000
    dt: float = 1e-3
    k_max: int = 10_000
    n_batches: int = 20
    n_workers: int = 1
    keep_records: bool = False

    def __post_init__(self):
        if self.n_epochs < 100:
            raise ValueError(f"n_epochs must be >= 100, got {self.n_epochs}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")
        if not 2 <= self.n_batches <= self.n_epochs:
            raise ValueError(f"n_batches must be in [2, n_epochs], got {self.n_batches}")
        if self.n_workers < 1:
            raise ValueError(f"n_workers must be >= 1, got {self.n_workers}")


@dataclass(frozen=True)
class EpochRecord:
    """One delivery-to-delivery epoch."""
    duration: float
    se_integral: float
    n_samples: int
    delay: float
    waits: Tuple[float, ...]
    final_error: float
    prev_delay: float
    forced: bool = False


@dataclass
class SimResult:
    """Renewal-reward summary of a simulation run."""
    policy: str
    n_epochs: int
    total_time: float
    objective: float
    mse: float
    sample_rate: float
    tx_rate: float
    ci_halfwidth: float
    mse_ci_halfwidth: float
    seed: int
    forced_transmits: int = 0
    mean_samples: float = 0.0
    records: List[EpochRecord] = field(default_factory=list, repr=False)

    def to_row(self) -> dict:
        return {
            'policy': self.policy,
            'n_epochs': self.n_epochs,
            'objective': self.objective,
            'mse': self.mse,
            'sample_rate': self.sample_rate,
            'tx_rate': self.tx_rate,
            'ci_halfwidth': self.ci_halfwidth,
            'seed': self.seed,
            'mse_ci_halfwidth': self.mse_ci_halfwidth,
            'total_time': self.total_time,
            'forced_transmits': self.forced_transmits,
            'mean_samples': self.mean_samples,
        }


def _advance(offset: float, duration: float, dt: float, gen: np.random.Generator) -> Tuple[float, float]:
    """Move the displacement W - Ŵ forward by `duration`; return (end value, ∫ squared)."""
    if duration <= 0:
        return offset, 0.0
    n = max(1, math.ceil(duration / dt))
    h = duration / n
    path = np.empty(n + 1)
    path[0] = offset
    np.cumsum(gen.normal(0.0, math.sqrt(h), size=n), out=path[1:])
    path[1:] += offset
    return float(path[-1]), float(trapezoid(path * path, dx=h))


def run_epoch(
    policy: PolicySpec,
    model: DelayModel,
    rng: RngStream,
    dt: float = 1e-3,
    k_max: int = 10_000,
    prev_delay: Optional[float] = None
) -> EpochRecord:
    """
    Simulate one epoch starting at a delivery instant.

    The previous packet's delay is drawn from the model unless given; the
    displacement from the last delivered sample starts as N(0, prev_delay).
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")

    gen = rng.generator
    if prev_delay is None:
        prev_delay = delay_sample(model, rng)

    offset = math.sqrt(prev_delay) * float(gen.standard_normal())
    se_integral = 0.0
    waits: List[float] = []

    wait = policy.first_wait(prev_delay)
    offset, area = _advance(offset, wait, dt, gen)
    se_integral += area
    waits.append(wait)
    error = offset * offset

    forced = False
    while not policy.should_stop(error):
        if len(waits) >= k_max:
            forced = True
            break
        wait = policy.wait_time(error)
        offset, area = _advance(offset, wait, dt, gen)
        se_integral += area
        waits.append(wait)
        error = offset * offset

    delay = delay_sample(model, rng)
    _, area = _advance(offset, delay, dt, gen)
    se_integral += area

    return EpochRecord(
        duration=delay + math.fsum(waits),
        se_integral=se_integral,
        n_samples=len(waits),
        delay=delay,
        waits=tuple(waits),
        final_error=error,
        prev_delay=prev_delay,
        forced=forced
    )


def _run_block(
    policy: PolicySpec,
    model: DelayModel,
    rng: RngStream,
    start: int,
    stop: int,
    dt: float,
    k_max: int
) -> List[EpochRecord]:
    return [run_epoch(policy, model, rng.substream(i), dt, k_max) for i in range(start, stop)]


def _batch_halfwidth(numerators: np.ndarray, durations: np.ndarray, n_batches: int) -> float:
    """95% Student-t half-width of the ratio estimator from contiguous batch means."""
    ratios = np.array([
        num.sum() / dur.sum()
        for num, dur in zip(np.array_split(numerators, n_batches), np.array_split(durations, n_batches))
    ])
    sd = ratios.std(ddof=1)
    return float(student_t.ppf(0.975, n_batches - 1) * sd / math.sqrt(n_batches))


def run_simulation(
    policy: PolicySpec,
    model: DelayModel,
    c_s: float,
    c_tau: float,
    rng: RngStream,
    settings: Optional[SimSettings] = None
) -> SimResult:
    """
    Run n_epochs independent epochs (epoch i on substream i) and aggregate.

    objective = (Σ se + c_s·Σ samples + c_tau·epochs) / Σ duration; the
    half-width comes from batch means over contiguous epoch blocks.
    """
    settings = settings or SimSettings()
    if c_s < 0 or c_tau < 0:
        raise ValueError(f"costs must be >= 0, got c_s={c_s}, c_tau={c_tau}")

    n = settings.n_epochs
    if settings.n_workers > 1:
        bounds = np.linspace(0, n, settings.n_workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=settings.n_workers) as pool:
            futures = [
                pool.submit(_run_block, policy, model, rng, int(lo), int(hi), settings.dt, settings.k_max)
                for lo, hi in zip(bounds[:-1], bounds[1:])
            ]
            records = [rec for fut in futures for rec in fut.result()]
    else:
        records = _run_block(policy, model, rng, 0, n, settings.dt, settings.k_max)

    durations = np.array([r.duration for r in records])
    se = np.array([r.se_integral for r in records])
    samples = np.array([r.n_samples for r in records], dtype=float)
    forced = sum(r.forced for r in records)

    total_time = float(durations.sum())
    mse = float(se.sum()) / total_time
    sample_rate = float(samples.sum()) / total_time
    tx_rate = n / total_time
    objective = mse + c_s * sample_rate + c_tau * tx_rate

    costs = se + c_s * samples + c_tau
    result = SimResult(
        policy=policy.label,
        n_epochs=n,
        total_time=total_time,
        objective=objective,
        mse=mse,
        sample_rate=sample_rate,
        tx_rate=tx_rate,
        ci_halfwidth=_batch_halfwidth(costs, durations, settings.n_batches),
        mse_ci_halfwidth=_batch_halfwidth(se, durations, settings.n_batches),
        seed=rng.seed,
        forced_transmits=int(forced),
        mean_samples=float(samples.mean()),
        records=records if settings.keep_records else []
    )

    logger.sim_summary(result.policy, n, result.objective, result.mse, result.ci_halfwidth)
    if forced:
        logger.convergence_alert(f"{forced} of {n} epochs hit the k_max={settings.k_max} sample valve")
    return result


def periodic_scan(
    model: DelayModel,
    c_s: float,
    c_tau: float,
    T_grid: Sequence[float],
    rng: RngStream,
    settings: Optional[SimSettings] = None
) -> List[Tuple[float, SimResult]]:
    """Simulate periodic(T) for every T; all T share the same random streams."""
    T_values = [float(T) for T in T_grid]
    if not T_values:
        raise ValueError("T_grid must not be empty")
    if any(not T > 0 for T in T_values):
        raise ValueError("T_grid values must be > 0")
    return [(T, run_simulation(PolicySpec.periodic(T), model, c_s, c_tau, rng, settings)) for T in T_values]


def best_periodic(
    model: DelayModel,
    c_s: float,
    c_tau: float,
    T_grid: Sequence[float],
    rng: RngStream,
    settings: Optional[SimSettings] = None
) -> Tuple[float, SimResult]:
    """The grid period with the lowest simulated objective."""
    scan = periodic_scan(model, c_s, c_tau, T_grid, rng, settings)
    T_best, result = min(scan, key=lambda item: item[1].objective)
    logger.info(f"Best periodic T = {T_best:g} | objective {result.objective:.6f} over {len(scan)} periods")
    return T_best, result


def periodic_scan_frame(scan: List[Tuple[float, SimResult]]) -> pd.DataFrame:
    return pd.DataFrame([{'T': T, **res.to_row()} for T, res in scan])


def default_period_grid(n: int = 20, low: float = 0.05, high: float = 20.0) -> np.ndarray:
    return np.geomspace(low, high, n)


def final_error_gap(records: Sequence[EpochRecord], mu_y: float) -> Tuple[float, float]:
    """Mean and standard error of E_k - μ_Y - Σ waits over epochs (zero in expectation)."""
    if len(records) < 2:
        raise ValueError("need at least 2 epoch records")
    gaps = np.array([r.final_error - mu_y - math.fsum(r.waits) for r in records])
    return float(gaps.mean()), float(gaps.std(ddof=1) / math.sqrt(gaps.size))
