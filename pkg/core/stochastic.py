"""
WIRES - Stochastic Core
Wiener increments, channel delay distributions with exact moments, and the
Monte Carlo check of the squared-error integral identity.

Every random draw goes through an RngStream, so a run is reproducible from
(seed, stream-id) alone and replications on different streams are independent.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import norm

from utils.errors import ConfigError
from utils.logger import get_logger

logger = get_logger()

DELAY_KINDS = ('deterministic', 'exponential', 'lognormal', 'discrete')
VARIANCE_FAMILIES = ('lognormal', 'two_point')

# Discrete probabilities must sum to one this tightly
PROB_SUM_TOL = 1e-12
# Upper quantile used when a continuous delay law is tabulated
SUPPORT_QUANTILE = 0.999


@dataclass
class RngStream:
    """
    Seeded random stream.

    Identical (seed, stream_id, spawn_key) give identical draw sequences;
    substreams are derived with numpy's SeedSequence spawn semantics, so
    parallel replications stay independent and reproducible.
    """
    seed: int
    stream_id: int = 0
    spawn_key: Tuple[int, ...] = ()
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 0 <= self.stream_id < 2 ** 64:
            raise ValueError(f"stream_id must be a 64-bit unsigned integer, got {self.stream_id}")
        seq = np.random.SeedSequence([self.seed, self.stream_id], spawn_key=tuple(self.spawn_key))
        self.generator = np.random.default_rng(seq)

    def substream(self, index: int) -> 'RngStream':
        """Independent child stream number `index`."""
        return RngStream(self.seed, self.stream_id, tuple(self.spawn_key) + (int(index),))


@dataclass(frozen=True)
class DelayModel:
    """IID channel delay Y ≥ 0 with finite second moment."""
    kind: str
    d: float = 0.0
    rate: float = 1.0
    location: float = 0.0
    scale: float = 0.0
    values: Tuple[float, ...] = ()
    probs: Tuple[float, ...] = ()

    def __post_init__(self):
        problem = _delay_problem(self.kind, {
            'd': self.d, 'rate': self.rate, 'scale': self.scale,
            'values': self.values, 'probs': self.probs,
        })
        if problem is not None:
            field_name, message = problem
            raise ValueError(f"{field_name}: {message}")

    @classmethod
    def deterministic(cls, d: float) -> 'DelayModel':
        """Constant delay d."""
        return cls(kind='deterministic', d=float(d))

    @classmethod
    def exponential(cls, rate: float) -> 'DelayModel':
        """Exponential delay with mean 1/rate."""
        return cls(kind='exponential', rate=float(rate))

    @classmethod
    def lognormal(cls, location: float, scale: float) -> 'DelayModel':
        """exp(location + scale·N(0, 1))."""
        return cls(kind='lognormal', location=float(location), scale=float(scale))

    @classmethod
    def discrete(cls, values: Sequence[float], probs: Sequence[float]) -> 'DelayModel':
        """Finite law P(Y = values[i]) = probs[i]."""
        return cls(
            kind='discrete',
            values=tuple(float(v) for v in values),
            probs=tuple(float(p) for p in probs)
        )

    @classmethod
    def from_dict(cls, spec: Dict, path: str = 'delay') -> 'DelayModel':
        """Build from the config form {"kind": ..., parameters...}."""
        if not isinstance(spec, dict):
            raise ConfigError(path, "must be a mapping with a 'kind' key")

        kind = spec.get('kind')
        if kind not in DELAY_KINDS:
            raise ConfigError(f"{path}.kind", f"must be one of {DELAY_KINDS}, got {kind!r}")

        allowed = {
            'deterministic': ('d',),
            'exponential': ('rate',),
            'lognormal': ('location', 'scale'),
            'discrete': ('values', 'probs'),
        }[kind]
        for key in spec:
            if key != 'kind' and key not in allowed:
                raise ConfigError(f"{path}.{key}", f"unknown key for a {kind} delay")
        for key in allowed:
            if key not in spec:
                raise ConfigError(f"{path}.{key}", "required")

        kwargs = {}
        for key in allowed:
            value = spec[key]
            if key in ('values', 'probs'):
                if not isinstance(value, (list, tuple)) or not value:
                    raise ConfigError(f"{path}.{key}", "must be a nonempty list of numbers")
                if not all(_is_number(v) for v in value):
                    raise ConfigError(f"{path}.{key}", "must contain only numbers")
                kwargs[key] = tuple(float(v) for v in value)
            else:
                if not _is_number(value):
                    raise ConfigError(f"{path}.{key}", "must be a number")
                kwargs[key] = float(value)

        problem = _delay_problem(kind, kwargs)
        if problem is not None:
            raise ConfigError(f"{path}.{problem[0]}", problem[1])

        return cls(kind=kind, **kwargs)

    def to_dict(self) -> Dict:
        if self.kind == 'deterministic':
            return {'kind': self.kind, 'd': self.d}
        if self.kind == 'exponential':
            return {'kind': self.kind, 'rate': self.rate}
        if self.kind == 'lognormal':
            return {'kind': self.kind, 'location': self.location, 'scale': self.scale}
        return {'kind': self.kind, 'values': list(self.values), 'probs': list(self.probs)}

    @property
    def mean(self) -> float:
        return delay_moments(self)[0]

    @property
    def variance(self) -> float:
        mu, second = delay_moments(self)
        return max(second - mu * mu, 0.0)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _delay_problem(kind: str, params: Dict) -> Optional[Tuple[str, str]]:
    """Return (field, message) for the first invariant the parameters break."""
    if kind not in DELAY_KINDS:
        return 'kind', f"must be one of {DELAY_KINDS}"
    if kind == 'deterministic':
        if not params['d'] >= 0:
            return 'd', "delay must be >= 0"
    elif kind == 'exponential':
        if not params['rate'] > 0:
            return 'rate', "rate must be > 0"
    elif kind == 'lognormal':
        if not params['scale'] >= 0:
            return 'scale', "scale must be >= 0"
    else:
        values, probs = params['values'], params['probs']
        if len(values) == 0 or len(values) != len(probs):
            return 'probs', "values and probs must be nonempty and of equal length"
        if any(v < 0 for v in values):
            return 'values', "delays must be >= 0"
        if any(p < 0 for p in probs):
            return 'probs', "probabilities must be >= 0"
        if abs(math.fsum(probs) - 1.0) > PROB_SUM_TOL:
            return 'probs', f"probabilities must sum to 1 (got {math.fsum(probs)!r})"
    return None


# =============================================================================
# Wiener process
# =============================================================================

def wiener_increment(dt: float, rng: RngStream) -> float:
    """Draw W_{t+dt} - W_t ~ N(0, dt)."""
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    if dt == 0:
        return 0.0
    return float(rng.generator.normal(0.0, math.sqrt(dt)))


def wiener_increments(dt: float, n: int, rng: RngStream) -> np.ndarray:
    """Vectorized form of wiener_increment: n independent N(0, dt) draws."""
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    if dt == 0:
        return np.zeros(n)
    return rng.generator.normal(0.0, math.sqrt(dt), size=n)


# =============================================================================
# Delay distributions
# =============================================================================

def delay_samples(model: DelayModel, n: int, rng: RngStream) -> np.ndarray:
    """Draw n IID delays."""
    gen = rng.generator
    if model.kind == 'deterministic':
        return np.full(n, model.d)
    if model.kind == 'exponential':
        return gen.exponential(1.0 / model.rate, size=n)
    if model.kind == 'lognormal':
        return gen.lognormal(model.location, model.scale, size=n)
    return gen.choice(np.asarray(model.values), size=n, p=np.asarray(model.probs))


def delay_sample(model: DelayModel, rng: RngStream) -> float:
    """Draw one delay."""
    return float(delay_samples(model, 1, rng)[0])


def delay_moments(model: DelayModel) -> Tuple[float, float]:
    """Exact (E[Y], E[Y²])."""
    if model.kind == 'deterministic':
        return model.d, model.d * model.d
    if model.kind == 'exponential':
        return 1.0 / model.rate, 2.0 / (model.rate * model.rate)
    if model.kind == 'lognormal':
        s2 = model.scale * model.scale
        return math.exp(model.location + s2 / 2.0), math.exp(2.0 * model.location + 2.0 * s2)
    values = np.asarray(model.values)
    probs = np.asarray(model.probs)
    return float(np.dot(probs, values)), float(np.dot(probs, values * values))


def delay_quadrature(model: DelayModel, n_nodes: int = 32) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nodes and weights for E[f(Y)] ≈ Σ w_i f(y_i), weights summing to 1.

    Deterministic and discrete laws are exact; exponential uses Gauss–Laguerre,
    lognormal uses Gauss–Hermite on log Y.
    """
    if n_nodes < 1:
        raise ValueError(f"n_nodes must be >= 1, got {n_nodes}")

    if model.kind == 'deterministic':
        return np.array([model.d]), np.array([1.0])

    if model.kind == 'discrete':
        values = np.asarray(model.values)
        probs = np.asarray(model.probs)
        keep = probs > 0
        return values[keep], probs[keep] / probs[keep].sum()

    if model.kind == 'exponential':
        x, w = np.polynomial.laguerre.laggauss(n_nodes)
        return x / model.rate, w / w.sum()

    x, w = np.polynomial.hermite_e.hermegauss(n_nodes)
    return np.exp(model.location + model.scale * x), w / w.sum()


def delay_support_grid(model: DelayModel, n_points: int = 101) -> np.ndarray:
    """Delay values at which the first-step rule is tabulated."""
    if model.kind == 'deterministic':
        return np.array([model.d])
    if model.kind == 'discrete':
        return np.unique(np.asarray(model.values))
    if model.kind == 'exponential':
        upper = -math.log(1.0 - SUPPORT_QUANTILE) / model.rate
    else:
        upper = math.exp(model.location + model.scale * norm.ppf(SUPPORT_QUANTILE))
    return np.linspace(0.0, upper, max(n_points, 2))


def variance_family(family: str, mu_y: float, sigma2: float) -> DelayModel:
    """
    Delay law with mean mu_y and variance sigma2.

    sigma2 = 0 is the deterministic delay for every family. The two-point law
    is symmetric around mu_y while sigma <= mu_y and otherwise puts its lower
    atom at 0 so delays stay nonnegative.
    """
    if family not in VARIANCE_FAMILIES:
        raise ValueError(f"family must be one of {VARIANCE_FAMILIES}, got {family!r}")
    if mu_y <= 0:
        raise ValueError(f"mu_y must be > 0, got {mu_y}")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")

    if sigma2 == 0:
        return DelayModel.deterministic(mu_y)

    if family == 'lognormal':
        s2 = math.log1p(sigma2 / (mu_y * mu_y))
        return DelayModel.lognormal(math.log(mu_y) - s2 / 2.0, math.sqrt(s2))

    sigma = math.sqrt(sigma2)
    if sigma <= mu_y:
        return DelayModel.discrete([mu_y - sigma, mu_y + sigma], [0.5, 0.5])
    upper = mu_y + sigma2 / mu_y
    p_upper = mu_y * mu_y / (mu_y * mu_y + sigma2)
    return DelayModel.discrete([0.0, upper], [1.0 - p_upper, p_upper])


# =============================================================================
# Squared-error integral identity
# =============================================================================

class SquaredErrorEstimate(NamedTuple):
    """Monte Carlo and closed form of E[∫₀^y (w₀ + W_t)² dt] with w₀² = e0."""
    mc_estimate: float
    closed_form: float
    std_error: float


def squared_error_check(
    e0: float,
    y: float,
    n_paths: int,
    rng: RngStream,
    n_steps: int = 1000,
    chunk_size: int = 2000
) -> SquaredErrorEstimate:
    """
    Check E[∫₀^y (w₀ + W_t)² dt] = y²/2 + y·e0 by simulation.

    Paths are sampled at step y/n_steps and integrated with the trapezoidal
    rule; E[(w₀ + W_t)²] is linear in t, so the rule adds no bias.
    """
    if e0 < 0 or y < 0:
        raise ValueError(f"e0 and y must be >= 0, got e0={e0}, y={y}")
    if n_paths < 1 or n_steps < 1:
        raise ValueError("n_paths and n_steps must be >= 1")

    closed_form = y * y / 2.0 + y * e0
    if y == 0:
        return SquaredErrorEstimate(0.0, closed_form, 0.0)

    dt = y / n_steps
    w0 = math.sqrt(e0)
    gen = rng.generator

    integrals = []
    remaining = n_paths
    while remaining > 0:
        m = min(chunk_size, remaining)
        paths = np.empty((m, n_steps + 1))
        paths[:, 0] = 0.0
        np.cumsum(gen.normal(0.0, math.sqrt(dt), size=(m, n_steps)), axis=1, out=paths[:, 1:])
        paths += w0
        integrals.append(trapezoid(paths * paths, dx=dt, axis=1))
        remaining -= m

    values = np.concatenate(integrals)
    std_error = float(values.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
    estimate = float(values.mean())

    logger.debug(
        f"SE-CHECK | e0={e0} y={y} | mc={estimate:.6f} ± {std_error:.2e} | closed={closed_form:.6f}"
    )
    return SquaredErrorEstimate(estimate, closed_form, std_error)
