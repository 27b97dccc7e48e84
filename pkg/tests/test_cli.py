"""End-to-end tests of the command line and run dispatch."""

import json
import os

import pandas as pd
import pytest
import yaml

import main as cli
from database.run_store import RunStore
from utils.config_loader import SEED_ENV_VAR


@pytest.fixture(autouse=True)
def no_seed_env(monkeypatch):
    monkeypatch.delenv(SEED_ENV_VAR, raising=False)


def write_config(tmp_path, document: dict, name: str = 'config.yaml') -> str:
    path = tmp_path / name
    path.write_text(yaml.safe_dump(document))
    return str(path)


def run(subcommand: str, config_path: str, out_dir, *extra: str) -> int:
    return cli.main([subcommand, '--config', config_path, '--out', str(out_dir), *extra])


def test_solve_writes_tables_and_manifest(tmp_path, base_config):
    out = tmp_path / 'out'
    assert run('solve', write_config(tmp_path, base_config), out) == 0

    assert sorted(os.listdir(out)) == ['first_step.csv', 'g_and_policy.csv', 'manifest.json', 'report.csv']
    table = pd.read_csv(out / 'g_and_policy.csv')
    assert list(table.columns) == ['E', 'g', 'z_star', 'stop']
    assert len(table) == 101
    assert (table['g'] <= 1e-12).all()

    manifest = json.loads((out / 'manifest.json').read_text())
    assert manifest['subcommand'] == 'solve'
    assert manifest['seed'] == 12345
    assert manifest['files'] == ['first_step.csv', 'g_and_policy.csv', 'report.csv']
    assert len(manifest['config_sha256']) == 64


def test_solve_is_byte_reproducible(tmp_path, base_config):
    config_path = write_config(tmp_path, base_config)
    assert run('solve', config_path, tmp_path / 'a') == 0
    assert run('solve', config_path, tmp_path / 'b') == 0
    for name in ('g_and_policy.csv', 'first_step.csv', 'report.csv'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()


def test_seed_argument_reaches_manifest(tmp_path, base_config):
    out = tmp_path / 'out'
    assert run('se-check', write_config(tmp_path, {
        **base_config,
        'experiments': {'se_check_e0': [1.0], 'se_check_y': [1.0], 'se_check_paths': 50, 'se_check_steps': 5},
    }), out, '--seed', '42') == 0
    assert json.loads((out / 'manifest.json').read_text())['seed'] == 42
    assert len(pd.read_csv(out / 'se_check.csv')) == 1


def test_simulate_zero_wait(tmp_path, base_config):
    document = {**base_config, 'simulation': {**base_config['simulation'], 'policy': 'zero_wait'}}
    out = tmp_path / 'out'
    assert run('simulate', write_config(tmp_path, document), out) == 0

    row = pd.read_csv(out / 'simulation.csv').iloc[0]
    assert row['policy'] == 'zero_wait'
    assert row['n_epochs'] == 200
    assert row['objective'] == pytest.approx(row['mse'] + 2.0 * row['sample_rate'] + 5.0 * row['tx_rate'])
    assert 'final_error_gap' in row.index
    assert not (out / 'lambda_star.json').exists()


def test_find_lambda(tmp_path, base_config):
    out = tmp_path / 'out'
    assert run('find-lambda', write_config(tmp_path, base_config), out) == 0

    result = json.loads((out / 'lambda_star.json').read_text())
    lo, hi = result['bracket']
    assert 0.0 < result['lambda_star']
    assert lo <= result['lambda_star'] <= hi
    trace = pd.read_csv(out / 'lambda_trace.csv')
    assert list(trace.columns) == ['lambda', 'J', 'converged']
    assert len(trace) == result['evaluations']


def test_j_curve(tmp_path, base_config):
    document = {**base_config, 'experiments': {'lambda_grid': [0.0, 30.0]}}
    out = tmp_path / 'out'
    assert run('j-curve', write_config(tmp_path, document), out) == 0
    frame = pd.read_csv(out / 'j_curve.csv')
    assert frame['J'].iloc[0] > 0 > frame['J'].iloc[1]


def test_invalid_config_returns_one(tmp_path, base_config):
    out = tmp_path / 'out'
    assert run('solve', write_config(tmp_path, {**base_config, 'c_s': -1.0}), out) == 1
    assert not out.exists()


def test_missing_config_returns_one(tmp_path):
    assert run('solve', str(tmp_path / 'absent.yaml'), tmp_path / 'out') == 1


def test_failed_run_leaves_no_outputs(tmp_path, base_config, monkeypatch):
    def broken(self, staging):
        with open(os.path.join(staging, 'g_and_policy.csv'), 'w') as f:
            f.write('partial\n')
        raise ValueError('solver blew up')

    monkeypatch.setattr(cli.WiresRunner, '_solve', broken)
    out = tmp_path / 'out'
    assert run('solve', write_config(tmp_path, base_config), out) == 1
    assert os.listdir(out) == []


def test_ledger_records_runs(tmp_path, base_config, monkeypatch):
    db_path = tmp_path / 'ledger.db'
    document = {**base_config, 'database': {'enabled': True, 'path': str(db_path)}}
    config_path = write_config(tmp_path, document)
    assert run('solve', config_path, tmp_path / 'ok') == 0

    def broken(self, staging):
        raise ValueError('boom')

    monkeypatch.setattr(cli.WiresRunner, '_solve', broken)
    assert run('solve', config_path, tmp_path / 'bad') == 1

    runs = RunStore(str(db_path)).list_runs('solve')
    assert [r['status'] for r in runs] == ['FAILED', 'OK']
    assert runs[0]['error'] == 'boom'


def test_unexpected_error_is_cleaned_up_and_recorded(tmp_path, base_config, monkeypatch):
    db_path = tmp_path / 'ledger.db'
    document = {**base_config, 'database': {'enabled': True, 'path': str(db_path)}}

    def broken(self, staging):
        with open(os.path.join(staging, 'g_and_policy.csv'), 'w') as f:
            f.write('partial\n')
        raise RuntimeError('f(a) and f(b) must have different signs')

    monkeypatch.setattr(cli.WiresRunner, '_solve', broken)
    out = tmp_path / 'out'
    assert run('solve', write_config(tmp_path, document), out) == 1
    assert os.listdir(out) == []

    runs = RunStore(str(db_path)).list_runs('solve')
    assert [r['status'] for r in runs] == ['FAILED']
    assert 'different signs' in runs[0]['error']


def test_failed_move_withdraws_published_files(tmp_path, base_config, monkeypatch):
    real_replace = os.replace
    calls = []

    def flaky_replace(src, dst):
        calls.append(dst)
        if len(calls) == 2:
            raise OSError('disk full')
        real_replace(src, dst)

    monkeypatch.setattr(cli.os, 'replace', flaky_replace)
    out = tmp_path / 'out'
    assert run('solve', write_config(tmp_path, base_config), out) == 1
    assert len(calls) == 2
    assert os.listdir(out) == []


def test_parser_requires_out():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(['solve'])
