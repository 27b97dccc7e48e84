"""
WIRES - Config Loader
Reads one YAML (or JSON) run configuration, fills documented defaults and
validates every field before anything is dispatched.
"""

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from core.bellman_solver import SolverSettings, ZSearch
from core.epoch_simulator import POLICY_KINDS, SimSettings, default_period_grid
from core.stochastic import VARIANCE_FAMILIES, DelayModel
from experiments.j_curve import default_lambda_grid
from experiments.policy_curves import CURVE_MODES
from utils.errors import ConfigError

SEED_ENV_VAR = 'WIRES_SEED'

DEFAULTS: Dict[str, Any] = {
    'c_s': None,
    'c_tau': None,
    'lambda': 10.0,
    'delay': None,
    'grid': {
        'n_points': 2001,
        'e_max': None,
    },
    'solver': {
        'tol': 1e-6,
        'max_iter': 500,
        'n_quad': 33,
        'z_max': None,
        'z_points_geometric': 24,
        'z_points_linear': 41,
        'z_tol': 1e-6,
        'tol_lambda': 1e-4,
        'bracket': None,
        'outer_expectation': 'quadrature',
        'outer_mc_draws': 10_000,
        'delay_nodes': 32,
        'first_step_points': 101,
    },
    'simulation': {
        'n_epochs': 20_000,
        'dt': 1e-3,
        'k_max': 10_000,
        'n_batches': 20,
        'policy': 'optimal',
        'period': 1.0,
        'n_workers': 1,
    },
    'experiments': {
        'family': 'lognormal',
        'mu_y': 1.0,
        'sigma2_list': [0.0, 0.1, 1.0, 2.5],
        'c_tau_list': [0.1, 1.0, 10.0],
        'T_grid': None,
        'lambda_grid': None,
        'curve_mode': 'both',
        'se_check_e0': [0.0, 0.5, 1.0, 3.0],
        'se_check_y': [0.5, 1.0, 2.0],
        'se_check_paths': 100_000,
        'se_check_steps': 1000,
    },
    'seed': 12345,
    'logging': {
        'level': 'INFO',
        'file_path': None,
        'max_size_mb': 10,
        'backup_count': 5,
        'console_output': True,
    },
    'database': {
        'enabled': False,
        'path': 'data/wires_runs.db',
    },
}

# Sections whose content is validated elsewhere rather than merged key by key
OPAQUE_SECTIONS = ('delay',)


@dataclass
class ExperimentSettings:
    family: str
    mu_y: float
    sigma2_list: List[float]
    c_tau_list: List[float]
    T_grid: List[float]
    lambda_grid: Optional[List[float]]
    curve_mode: str
    se_check_e0: List[float]
    se_check_y: List[float]
    se_check_paths: int
    se_check_steps: int


@dataclass
class ExperimentConfig:
    """Validated run configuration."""
    c_s: float
    c_tau: float
    lam: float
    delay: DelayModel
    solver: SolverSettings
    tol_lambda: float
    bracket: Optional[Tuple[float, float]]
    simulation: SimSettings
    sim_policy: str
    period: float
    experiments: ExperimentSettings
    seed: int
    logging: Dict[str, Any]
    database: Dict[str, Any]
    raw: Dict[str, Any] = field(repr=False, default_factory=dict)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form of the validated config."""
        canonical = json.dumps(self.raw, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def with_seed(self, seed: int) -> 'ExperimentConfig':
        seed = _check_seed(seed, 'seed')
        raw = copy.deepcopy(self.raw)
        raw['seed'] = seed
        return _build(raw)


def _merge(defaults: Dict, user: Dict, path: str = '') -> Dict:
    if not isinstance(user, dict):
        raise ConfigError(path or '<root>', "must be a mapping")
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        dotted = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            raise ConfigError(dotted, "unknown key")
        if isinstance(defaults[key], dict) and key not in OPAQUE_SECTIONS:
            merged[key] = _merge(defaults[key], value, dotted)
        else:
            merged[key] = value
    return merged


def _number(value, path: str) -> float:
    # YAML 1.1 resolves exponent literals without a dot (1e-6) to strings
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(path, f"must be a finite number, got {value!r}")
    return float(value)


def _positive(value, path: str) -> float:
    number = _number(value, path)
    if not number > 0:
        raise ConfigError(path, f"must be > 0, got {number}")
    return number


def _integer(value, path: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    return value


def _number_list(value, path: str, minimum: Optional[float] = None, strict: bool = False) -> List[float]:
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "must be a nonempty list of numbers")
    numbers = [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]
    if minimum is not None:
        for i, v in enumerate(numbers):
            if v < minimum or (strict and v == minimum):
                op = '>' if strict else '>='
                raise ConfigError(f"{path}[{i}]", f"must be {op} {minimum}, got {v}")
    return numbers


def _choice(value, path: str, options) -> str:
    if value not in options:
        raise ConfigError(path, f"must be one of {tuple(options)}, got {value!r}")
    return value


def _check_seed(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2 ** 64:
        raise ConfigError(path, f"must be an integer in [0, 2^64), got {value!r}")
    return value


def _build(raw: Dict) -> ExperimentConfig:
    for key in ('c_s', 'c_tau', 'delay'):
        if raw[key] is None:
            raise ConfigError(key, "required")

    c_s = _positive(raw['c_s'], 'c_s')
    c_tau = _positive(raw['c_tau'], 'c_tau')
    lam = _number(raw['lambda'], 'lambda')
    if lam < 0:
        raise ConfigError('lambda', f"must be >= 0, got {lam}")
    delay = DelayModel.from_dict(raw['delay'], 'delay')

    grid = raw['grid']
    n_points = _integer(grid['n_points'], 'grid.n_points', 3)
    e_max = None if grid['e_max'] is None else _positive(grid['e_max'], 'grid.e_max')

    s = raw['solver']
    z_max = None if s['z_max'] is None else _positive(s['z_max'], 'solver.z_max')
    bracket = None
    if s['bracket'] is not None:
        pair = _number_list(s['bracket'], 'solver.bracket', minimum=0.0)
        if len(pair) != 2 or not pair[0] < pair[1]:
            raise ConfigError('solver.bracket', f"must be [lo, hi] with 0 <= lo < hi, got {s['bracket']}")
        bracket = (pair[0], pair[1])

    solver = SolverSettings(
        tol=_positive(s['tol'], 'solver.tol'),
        max_iter=_integer(s['max_iter'], 'solver.max_iter', 1),
        n_quad=_integer(s['n_quad'], 'solver.n_quad', 3),
        n_points=n_points,
        e_max=e_max,
        z_search=ZSearch(
            z_max=z_max,
            n_geometric=_integer(s['z_points_geometric'], 'solver.z_points_geometric', 0),
            n_linear=_integer(s['z_points_linear'], 'solver.z_points_linear', 2),
            tol=_positive(s['z_tol'], 'solver.z_tol')
        ),
        outer_expectation=_choice(s['outer_expectation'], 'solver.outer_expectation', ('quadrature', 'monte_carlo')),
        outer_mc_draws=_integer(s['outer_mc_draws'], 'solver.outer_mc_draws', 10_000),
        delay_nodes=_integer(s['delay_nodes'], 'solver.delay_nodes', 1),
        first_step_points=_integer(s['first_step_points'], 'solver.first_step_points', 2)
    )
    tol_lambda = _positive(s['tol_lambda'], 'solver.tol_lambda')

    m = raw['simulation']
    n_epochs = _integer(m['n_epochs'], 'simulation.n_epochs', 100)
    n_batches = _integer(m['n_batches'], 'simulation.n_batches', 2)
    if n_batches > n_epochs:
        raise ConfigError('simulation.n_batches', f"must be <= n_epochs ({n_epochs}), got {n_batches}")
    simulation = SimSettings(
        n_epochs=n_epochs,
        dt=_positive(m['dt'], 'simulation.dt'),
        k_max=_integer(m['k_max'], 'simulation.k_max', 1),
        n_batches=n_batches,
        n_workers=_integer(m['n_workers'], 'simulation.n_workers', 1)
    )

    x = raw['experiments']
    T_grid = (
        default_period_grid().tolist() if x['T_grid'] is None
        else _number_list(x['T_grid'], 'experiments.T_grid', minimum=0.0, strict=True)
    )
    lambda_grid = (
        None if x['lambda_grid'] is None
        else _number_list(x['lambda_grid'], 'experiments.lambda_grid', minimum=0.0)
    )
    experiments = ExperimentSettings(
        family=_choice(x['family'], 'experiments.family', VARIANCE_FAMILIES),
        mu_y=_positive(x['mu_y'], 'experiments.mu_y'),
        sigma2_list=_number_list(x['sigma2_list'], 'experiments.sigma2_list', minimum=0.0),
        c_tau_list=_number_list(x['c_tau_list'], 'experiments.c_tau_list', minimum=0.0, strict=True),
        T_grid=T_grid,
        lambda_grid=lambda_grid,
        curve_mode=_choice(x['curve_mode'], 'experiments.curve_mode', CURVE_MODES),
        se_check_e0=_number_list(x['se_check_e0'], 'experiments.se_check_e0', minimum=0.0),
        se_check_y=_number_list(x['se_check_y'], 'experiments.se_check_y', minimum=0.0),
        se_check_paths=_integer(x['se_check_paths'], 'experiments.se_check_paths', 2),
        se_check_steps=_integer(x['se_check_steps'], 'experiments.se_check_steps', 1)
    )

    log = raw['logging']
    if not isinstance(log['level'], str) or log['level'].upper() not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
        raise ConfigError('logging.level', f"unknown level {log['level']!r}")

    return ExperimentConfig(
        c_s=c_s,
        c_tau=c_tau,
        lam=lam,
        delay=delay,
        solver=solver,
        tol_lambda=tol_lambda,
        bracket=bracket,
        simulation=simulation,
        sim_policy=_choice(m['policy'], 'simulation.policy', POLICY_KINDS),
        period=_positive(m['period'], 'simulation.period'),
        experiments=experiments,
        seed=_check_seed(raw['seed'], 'seed'),
        logging=dict(log),
        database=dict(raw['database']),
        raw=raw
    )


def config_from_dict(document: Dict, seed: Optional[int] = None) -> ExperimentConfig:
    """Validate an already-parsed document; `seed` wins over WIRES_SEED and the file."""
    raw = _merge(DEFAULTS, document if document is not None else {})
    # Normalize the delay section so the config hash does not depend on int/float spelling
    raw['delay'] = DelayModel.from_dict(raw['delay'], 'delay').to_dict() if raw['delay'] is not None else None

    if seed is not None:
        raw['seed'] = seed
    elif os.environ.get(SEED_ENV_VAR):
        value = os.environ[SEED_ENV_VAR]
        try:
            raw['seed'] = int(value)
        except ValueError:
            raise ConfigError(SEED_ENV_VAR, f"must be an integer, got {value!r}") from None
    return _build(raw)


def load_config(path: str, seed: Optional[int] = None) -> ExperimentConfig:
    """Load and validate a config file."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            document = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError('config', f"file not found: {path}") from None
    except yaml.YAMLError as e:
        raise ConfigError('config', f"parse error in {path}: {e}") from None
    return config_from_dict(document, seed)


def lambda_grid_for(config: ExperimentConfig, n: int = 21) -> np.ndarray:
    """Configured λ grid, or an even grid over the starting bracket."""
    if config.experiments.lambda_grid is not None:
        return np.asarray(config.experiments.lambda_grid)
    if config.bracket is not None:
        return np.linspace(config.bracket[0], config.bracket[1], n)
    return default_lambda_grid(config.delay, config.c_s, config.c_tau, n)
