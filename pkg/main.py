#!/usr/bin/env python3
"""
WIRES - Main Entry Point
Wiener Remote Estimation Sampler

Solves for the cost-optimal sampling and transmission policy of a Wiener
process sent over a random-delay channel, and checks it by simulation against
periodic and zero-wait senders.

Usage:
    python main.py <subcommand> --config config.yaml --out results/ [--seed N]
"""

import argparse
import dataclasses
import os
import shutil
import sys
import tempfile
import time
from typing import Callable, Dict, List, Optional

import pandas as pd

from core.bellman_solver import CostParams, extract_policy, first_step_table, policy_table, solve_g_infinity
from core.epoch_simulator import PolicySpec, final_error_gap, run_simulation
from core.lambda_search import LambdaStarResult, find_lambda_star
from core.stochastic import RngStream, delay_moments, delay_support_grid
from database.run_store import RunStore
from experiments.convergence_trace import convergence_trace, geometric_tail_ratios
from experiments.j_curve import is_strictly_decreasing, j_curve, sign_changes
from experiments.policy_curves import policy_curves
from experiments.se_check import squared_error_grid
from experiments.sigma_sweep import dominance_summary, sweep_frame, sweep_sigma
from utils.config_loader import ExperimentConfig, lambda_grid_for, load_config
from utils.errors import WiresError
from utils.export import write_csv, write_json, write_manifest
from utils.logger import get_logger

SUBCOMMANDS = (
    'solve', 'find-lambda', 'simulate', 'sweep-sigma', 'convergence', 'curves', 'j-curve', 'se-check'
)


class WiresRunner:
    """
    Runs one subcommand against a validated config.
    Every artifact is written to a staging directory and only moved into
    the output directory when the whole run succeeds.
    """

    def __init__(self, config: ExperimentConfig, out_dir: str):
        self.config = config
        self.out_dir = out_dir

        self.logger = get_logger()
        self.logger.configure(**config.logging)

        db_config = config.database
        self.store: Optional[RunStore] = RunStore(db_config['path']) if db_config.get('enabled') else None
        self._run_id: Optional[int] = None

        self._handlers: Dict[str, Callable[[str], List[str]]] = {
            'solve': self._solve,
            'find-lambda': self._find_lambda,
            'simulate': self._simulate,
            'sweep-sigma': self._sweep_sigma,
            'convergence': self._convergence,
            'curves': self._curves,
            'j-curve': self._j_curve,
            'se-check': self._se_check,
        }

    def run(self, subcommand: str) -> int:
        """Dispatch; 0 on success, 1 on any run error (partial outputs removed)."""
        if subcommand not in self._handlers:
            self.logger.error(f"Unknown subcommand: {subcommand}")
            return 1

        cfg = self.config
        started = time.time()
        staging = None

        self.logger.info("=" * 60)
        self.logger.info(f"WIRES {subcommand} | seed {cfg.seed} | config {cfg.config_hash()[:12]}")
        self.logger.info("=" * 60)

        try:
            os.makedirs(self.out_dir, exist_ok=True)
            if self.store:
                self._run_id = self.store.start_run(subcommand, cfg.config_hash(), cfg.seed, self.out_dir)
            staging = tempfile.mkdtemp(prefix='.staging-', dir=self.out_dir)

            files = self._handlers[subcommand](staging)
            wall_time = time.time() - started
            files.append(write_manifest(staging, subcommand, cfg.config_hash(), cfg.seed, wall_time, files))
            self._publish(files)

        except Exception as e:
            wall_time = time.time() - started
            self.logger.error(f"{subcommand} failed: {type(e).__name__}: {e}")
            if self.store and self._run_id is not None:
                self.store.finish_run(self._run_id, 'FAILED', wall_time, str(e))
            return 1

        finally:
            if staging:
                shutil.rmtree(staging, ignore_errors=True)

        if self.store and self._run_id is not None:
            self.store.finish_run(self._run_id, 'OK', wall_time)
        self.logger.info(f"{subcommand} done in {wall_time:.1f}s | {len(files)} files in {self.out_dir}")
        return 0

    def _publish(self, files: List[str]):
        """Move staged files into the output directory, all or none."""
        published: List[str] = []
        try:
            for path in files:
                target = os.path.join(self.out_dir, os.path.basename(path))
                os.replace(path, target)
                published.append(target)
        except OSError:
            for target in published:
                try:
                    os.remove(target)
                except OSError:
                    pass
            raise

    # =========================================================================
    # Subcommands
    # =========================================================================

    def _search(self) -> LambdaStarResult:
        cfg = self.config
        return find_lambda_star(
            cfg.delay,
            cfg.c_s,
            cfg.c_tau,
            cfg.bracket,
            cfg.tol_lambda,
            cfg.solver,
            seed=cfg.seed
        )

    def _write_search(self, staging: str, search: LambdaStarResult) -> List[str]:
        if self.store and self._run_id is not None:
            self.store.save_lambda_trace(self._run_id, search.trace)
        return [
            write_json(search.to_dict(), os.path.join(staging, 'lambda_star.json')),
            write_csv(search.trace_frame(), os.path.join(staging, 'lambda_trace.csv')),
        ]

    def _solve(self, staging: str) -> List[str]:
        cfg = self.config
        params = CostParams(cfg.c_s, cfg.c_tau, cfg.lam)
        mu_y, _ = delay_moments(cfg.delay)
        settings = cfg.solver

        vf, report = solve_g_infinity(
            params, mu_y, settings.grid_for(params.offset(mu_y)),
            settings.tol, settings.max_iter, settings.z_search, settings.n_quad
        )
        policy = extract_policy(
            vf, params, mu_y, settings.z_search, settings.n_quad,
            delays=delay_support_grid(cfg.delay, settings.first_step_points)
        )
        self.logger.info(
            f"g∞ at λ={cfg.lam:g}: {report.iterations} iterations, converged={report.converged}, "
            f"transmit for E >= {policy.stop_threshold():.4f}"
        )
        return [
            write_csv(policy_table(vf, policy), os.path.join(staging, 'g_and_policy.csv')),
            write_csv(first_step_table(policy), os.path.join(staging, 'first_step.csv')),
            write_csv(report.to_frame(), os.path.join(staging, 'report.csv')),
        ]

    def _find_lambda(self, staging: str) -> List[str]:
        search = self._search()
        return self._write_search(staging, search) + [
            write_csv(policy_table(search.value_function, search.policy), os.path.join(staging, 'g_and_policy.csv')),
            write_csv(first_step_table(search.policy), os.path.join(staging, 'first_step.csv')),
            write_csv(search.report.to_frame(), os.path.join(staging, 'report.csv')),
        ]

    def _simulate(self, staging: str) -> List[str]:
        cfg = self.config
        files: List[str] = []

        if cfg.sim_policy == 'optimal':
            search = self._search()
            files += self._write_search(staging, search)
            spec = PolicySpec.optimal(search.policy)
        elif cfg.sim_policy == 'periodic':
            spec = PolicySpec.periodic(cfg.period)
        else:
            spec = PolicySpec.zero_wait()

        sim_settings = dataclasses.replace(cfg.simulation, keep_records=True)
        result = run_simulation(spec, cfg.delay, cfg.c_s, cfg.c_tau, RngStream(cfg.seed), sim_settings)
        gap, gap_se = final_error_gap(result.records, delay_moments(cfg.delay)[0])

        row = result.to_row()
        row['final_error_gap'] = gap
        row['final_error_gap_se'] = gap_se
        files.append(write_csv(pd.DataFrame([row]), os.path.join(staging, 'simulation.csv')))
        return files

    def _sweep_sigma(self, staging: str) -> List[str]:
        cfg = self.config
        x = cfg.experiments
        traces = []

        def keep_trace(sigma2: float, search: LambdaStarResult):
            frame = search.trace_frame()
            frame.insert(0, 'sigma2', sigma2)
            traces.append(frame)
            if self.store and self._run_id is not None:
                self.store.save_lambda_trace(self._run_id, search.trace, sigma2)

        rows = sweep_sigma(
            cfg.c_s, cfg.c_tau, x.sigma2_list,
            family=x.family,
            mu_y=x.mu_y,
            T_grid=x.T_grid,
            solver=cfg.solver,
            sim=cfg.simulation,
            seed=cfg.seed,
            tol_lambda=cfg.tol_lambda,
            bracket=cfg.bracket,
            on_lambda_search=keep_trace
        )
        if self.store and self._run_id is not None:
            self.store.save_sweep_rows(self._run_id, rows)

        summary = dominance_summary(rows)
        self.logger.info(
            f"Sweep: optimal dominates in {sum(summary['dominates'])}/{len(rows)} rows, "
            f"Spearman ρ(σ², gap) = {summary['spearman_rho']:.3f}"
        )
        return [
            write_csv(sweep_frame(rows), os.path.join(staging, 'sweep.csv')),
            write_csv(pd.concat(traces, ignore_index=True), os.path.join(staging, 'lambda_trace.csv')),
            write_json(summary, os.path.join(staging, 'dominance.json')),
        ]

    def _convergence(self, staging: str) -> List[str]:
        cfg = self.config
        frame, report = convergence_trace(cfg.c_s, cfg.c_tau, cfg.lam, cfg.delay, settings=cfg.solver)
        ratios = geometric_tail_ratios(report.sup_diffs)
        summary = {
            'lambda': cfg.lam,
            'iterations': report.iterations,
            'converged': report.converged,
            'final_sup_diff': report.sup_diffs[-1],
            'tail_ratios': ratios,
            'tail_ratios_below_one': bool((ratios < 1).all()),
        }
        return [
            write_csv(frame, os.path.join(staging, 'convergence.csv')),
            write_json(summary, os.path.join(staging, 'convergence_summary.json')),
        ]

    def _curves(self, staging: str) -> List[str]:
        cfg = self.config
        x = cfg.experiments
        frame = policy_curves(
            cfg.c_s, cfg.lam, x.mu_y, x.c_tau_list, x.sigma2_list,
            family=x.family,
            mode=x.curve_mode,
            settings=cfg.solver,
            tol_lambda=cfg.tol_lambda,
            bracket=cfg.bracket,
            seed=cfg.seed
        )
        return [write_csv(frame, os.path.join(staging, 'curves.csv'))]

    def _j_curve(self, staging: str) -> List[str]:
        cfg = self.config
        frame = j_curve(lambda_grid_for(cfg), cfg.delay, cfg.c_s, cfg.c_tau, cfg.solver, seed=cfg.seed)
        self.logger.info(
            f"J(λ): {sign_changes(frame)} sign change(s), strictly decreasing = {is_strictly_decreasing(frame)}"
        )
        return [write_csv(frame, os.path.join(staging, 'j_curve.csv'))]

    def _se_check(self, staging: str) -> List[str]:
        x = self.config.experiments
        frame = squared_error_grid(x.se_check_e0, x.se_check_y, x.se_check_paths, x.se_check_steps, self.config.seed)
        return [write_csv(frame, os.path.join(staging, 'se_check.csv'))]


def dispatch(subcommand: str, config: ExperimentConfig, out_dir: str) -> int:
    return WiresRunner(config, out_dir).run(subcommand)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='wires',
        description='Optimal sampling and transmission of a Wiener process over a random-delay channel'
    )
    sub = parser.add_subparsers(dest='subcommand', required=True)
    for name in SUBCOMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument('--config', default='config.yaml', help='YAML or JSON run configuration')
        cmd.add_argument('--out', required=True, help='output directory')
        cmd.add_argument('--seed', type=int, default=None, help='overrides WIRES_SEED and the config file')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, seed=args.seed)
    except WiresError as e:
        get_logger().error(f"Invalid configuration: {e}")
        return 1
    return dispatch(args.subcommand, config, args.out)


if __name__ == "__main__":
    sys.exit(main())
