"""Tests for the SQLite run ledger."""

import os

import pytest

from database.run_store import RunStore
from experiments.sigma_sweep import SweepRow


def sweep_row(sigma2: float, opt: float, periodic: float) -> SweepRow:
    return SweepRow(
        sigma2=sigma2, lambda_star=opt, mse_opt=opt, mse_opt_ci=0.05, mse_periodic=periodic,
        mse_periodic_ci=0.05, t_best=1.0, seed=0, err_opt=1.0, err_periodic=1.2, family='two_point',
        converged=True
    )


@pytest.fixture
def store(tmp_path) -> RunStore:
    return RunStore(str(tmp_path / 'ledger' / 'runs.db'))


def test_creates_parent_directory(tmp_path):
    RunStore(str(tmp_path / 'nested' / 'dir' / 'runs.db'))
    assert os.path.isdir(tmp_path / 'nested' / 'dir')


def test_run_lifecycle(store):
    run_id = store.start_run('solve', 'a' * 64, 12345, '/tmp/out')
    assert store.get_run(run_id)['status'] == 'RUNNING'

    store.finish_run(run_id, 'OK', 1.5)
    run = store.get_run(run_id)
    assert run['status'] == 'OK'
    assert run['wall_time'] == 1.5
    assert run['seed'] == 12345
    assert run['error'] is None


def test_failed_run_keeps_error(store):
    run_id = store.start_run('simulate', 'b' * 64, 1, '/tmp/out')
    store.finish_run(run_id, 'FAILED', 0.2, 'solver.bracket: no sign change')
    assert store.get_run(run_id)['error'] == 'solver.bracket: no sign change'


def test_list_runs(store):
    first = store.start_run('solve', 'c' * 64, 1, 'a')
    second = store.start_run('j-curve', 'c' * 64, 2, 'b')
    third = store.start_run('solve', 'c' * 64, 3, 'c')
    assert [r['id'] for r in store.list_runs()] == [third, second, first]
    assert [r['id'] for r in store.list_runs('solve')] == [third, first]
    assert len(store.list_runs(limit=1)) == 1
    assert store.get_run(9999) is None


def test_full_range_seed(store):
    run_id = store.start_run('solve', 'd' * 64, 2 ** 64 - 1, 'out')
    assert store.get_run(run_id)['seed'] == 2 ** 64 - 1


def test_lambda_trace(store):
    run_id = store.start_run('find-lambda', 'e' * 64, 1, 'out')
    store.save_lambda_trace(run_id, [(0.0, 2.5, True), (27.0, -4.0, True), (13.5, -1.2, False)])
    store.save_lambda_trace(run_id, [(1.0, 0.5, True)], sigma2=0.1)

    steps = store.get_lambda_steps(run_id)
    assert [s['lambda'] for s in steps] == [0.0, 27.0, 13.5, 1.0]
    assert [s['step'] for s in steps] == [0, 1, 2, 0]
    assert steps[2]['converged'] is False
    assert steps[3]['sigma2'] == 0.1
    assert store.get_lambda_steps(run_id + 1) == []


def test_sweep_rows(store):
    run_id = store.start_run('sweep-sigma', 'f' * 64, 1, 'out')
    store.save_sweep_rows(run_id, [sweep_row(1.0, 4.8, 5.9), sweep_row(0.0, 5.0, 5.2)])
    rows = store.get_sweep_rows(run_id)
    assert [r['sigma2'] for r in rows] == [0.0, 1.0]
    assert rows[1]['mse_periodic'] == 5.9
    assert rows[0]['converged'] is True
