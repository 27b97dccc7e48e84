"""Shared fixtures for the WIRES test suite."""

import pytest

from core.bellman_solver import SolverSettings
from core.epoch_simulator import SimSettings
from core.stochastic import DelayModel
from utils.logger import get_logger


@pytest.fixture(autouse=True, scope='session')
def quiet_logger():
    get_logger().configure(level='WARNING', console_output=False)
    yield


@pytest.fixture
def unit_delay() -> DelayModel:
    return DelayModel.deterministic(1.0)


@pytest.fixture
def small_solver() -> SolverSettings:
    """Coarse grid and loose tolerances for fast solves."""
    return SolverSettings(tol=1e-5, max_iter=500, n_points=201, first_step_points=41)


@pytest.fixture
def medium_solver() -> SolverSettings:
    return SolverSettings(tol=1e-6, max_iter=500, n_points=401)


@pytest.fixture
def fast_sim() -> SimSettings:
    return SimSettings(n_epochs=2000, dt=1e-2, n_batches=20)


@pytest.fixture
def base_config() -> dict:
    """Smallest config document the CLI accepts, sized for tests."""
    return {
        'c_s': 2.0,
        'c_tau': 5.0,
        'delay': {'kind': 'deterministic', 'd': 1.0},
        'grid': {'n_points': 101},
        'solver': {'tol': 1.0e-4, 'tol_lambda': 1.0e-2, 'first_step_points': 11},
        'simulation': {'n_epochs': 200, 'dt': 1.0e-2},
        'logging': {'level': 'WARNING', 'console_output': False},
    }
