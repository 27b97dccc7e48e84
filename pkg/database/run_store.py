"""
WIRES - Run Store
SQLite ledger of dispatched runs, λ-search evaluations and sweep rows.
"""

import os
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence, Tuple

from sqlalchemy import Boolean, Column, DateTime, Float, ForeignKey, Integer, String, Text, create_engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker

Base = declarative_base()


class RunRecord(Base):
    """One dispatch of a subcommand."""
    __tablename__ = 'runs'

    id = Column(Integer, primary_key=True, autoincrement=True)
    subcommand = Column(String(32), nullable=False, index=True)
    config_hash = Column(String(64), nullable=False, index=True)
    seed = Column(String(24), nullable=False)  # may exceed SQLite's signed 64-bit range
    status = Column(String(16), default='RUNNING')  # RUNNING, OK, FAILED
    started_at = Column(DateTime, nullable=False)
    wall_time = Column(Float, nullable=True)
    out_dir = Column(Text, nullable=True)
    error = Column(Text, nullable=True)


class LambdaStep(Base):
    """One J(λ) evaluation of a λ* search."""
    __tablename__ = 'lambda_steps'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(Integer, ForeignKey('runs.id'), nullable=False, index=True)
    sigma2 = Column(Float, nullable=True)
    step = Column(Integer, nullable=False)
    lam = Column(Float, nullable=False)
    j_value = Column(Float, nullable=False)
    converged = Column(Boolean, default=True)


class SweepRecord(Base):
    """One σ² row of a variance sweep."""
    __tablename__ = 'sweep_rows'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(Integer, ForeignKey('runs.id'), nullable=False, index=True)
    sigma2 = Column(Float, nullable=False)
    family = Column(String(16))
    lambda_star = Column(Float)
    mse_opt = Column(Float)
    mse_opt_ci = Column(Float)
    mse_periodic = Column(Float)
    mse_periodic_ci = Column(Float)
    t_best = Column(Float)
    converged = Column(Boolean, default=True)


class RunStore:
    """Database manager for the run ledger."""

    def __init__(self, db_path: str = "data/wires_runs.db"):
        if db_path != ':memory:':
            db_dir = os.path.dirname(db_path)
            if db_dir and not os.path.exists(db_dir):
                os.makedirs(db_dir)

        self.engine = create_engine(f'sqlite:///{db_path}', echo=False)
        Base.metadata.create_all(self.engine)
        self.Session = sessionmaker(bind=self.engine)

    def get_session(self) -> Session:
        """Get a new database session."""
        return self.Session()

    # =========================================================================
    # Runs
    # =========================================================================

    def start_run(self, subcommand: str, config_hash: str, seed: int, out_dir: str) -> int:
        """Insert a RUNNING row and return its id."""
        session = self.get_session()
        try:
            run = RunRecord(
                subcommand=subcommand,
                config_hash=config_hash,
                seed=str(seed),
                status='RUNNING',
                started_at=datetime.now(),
                out_dir=out_dir
            )
            session.add(run)
            session.commit()
            return run.id
        except Exception:
            session.rollback()
            raise
        finally:
            session.close()

    def finish_run(self, run_id: int, status: str, wall_time: float, error: Optional[str] = None):
        """Close a run as OK or FAILED with its wall time and error text."""
        session = self.get_session()
        try:
            run = session.get(RunRecord, run_id)
            if run:
                run.status = status
                run.wall_time = wall_time
                run.error = error
                session.commit()
        except Exception:
            session.rollback()
            raise
        finally:
            session.close()

    def get_run(self, run_id: int) -> Optional[Dict[str, Any]]:
        """One run as a dict, or None."""
        session = self.get_session()
        try:
            run = session.get(RunRecord, run_id)
            return self._run_dict(run) if run else None
        finally:
            session.close()

    def list_runs(self, subcommand: Optional[str] = None, limit: int = 50) -> List[Dict[str, Any]]:
        """Most recent runs first."""
        session = self.get_session()
        try:
            query = session.query(RunRecord)
            if subcommand:
                query = query.filter(RunRecord.subcommand == subcommand)
            runs = query.order_by(RunRecord.id.desc()).limit(limit).all()
            return [self._run_dict(r) for r in runs]
        finally:
            session.close()

    @staticmethod
    def _run_dict(run: RunRecord) -> Dict[str, Any]:
        return {
            'id': run.id,
            'subcommand': run.subcommand,
            'config_hash': run.config_hash,
            'seed': int(run.seed),
            'status': run.status,
            'started_at': run.started_at,
            'wall_time': run.wall_time,
            'out_dir': run.out_dir,
            'error': run.error,
        }

    # =========================================================================
    # λ search trace
    # =========================================================================

    def save_lambda_trace(
        self,
        run_id: int,
        trace: Sequence[Tuple[float, float, bool]],
        sigma2: Optional[float] = None
    ):
        """Store the (λ, J, converged) steps of one λ* search, tagged with sigma2 in a sweep."""
        session = self.get_session()
        try:
            for step, (lam, j_value, converged) in enumerate(trace):
                session.add(LambdaStep(
                    run_id=run_id,
                    sigma2=sigma2,
                    step=step,
                    lam=float(lam),
                    j_value=float(j_value),
                    converged=bool(converged)
                ))
            session.commit()
        except Exception:
            session.rollback()
            raise
        finally:
            session.close()

    def get_lambda_steps(self, run_id: int) -> List[Dict[str, Any]]:
        """λ search steps of a run in insertion order."""
        session = self.get_session()
        try:
            steps = session.query(LambdaStep).filter_by(run_id=run_id).order_by(LambdaStep.id).all()
            return [
                {'sigma2': s.sigma2, 'step': s.step, 'lambda': s.lam, 'J': s.j_value, 'converged': s.converged}
                for s in steps
            ]
        finally:
            session.close()

    # =========================================================================
    # Sweep rows
    # =========================================================================

    def save_sweep_rows(self, run_id: int, rows: Sequence[Any]):
        """Store SweepRow-like objects."""
        session = self.get_session()
        try:
            for row in rows:
                session.add(SweepRecord(
                    run_id=run_id,
                    sigma2=row.sigma2,
                    family=row.family,
                    lambda_star=row.lambda_star,
                    mse_opt=row.mse_opt,
                    mse_opt_ci=row.mse_opt_ci,
                    mse_periodic=row.mse_periodic,
                    mse_periodic_ci=row.mse_periodic_ci,
                    t_best=row.t_best,
                    converged=bool(row.converged)
                ))
            session.commit()
        except Exception:
            session.rollback()
            raise
        finally:
            session.close()

    def get_sweep_rows(self, run_id: int) -> List[Dict[str, Any]]:
        """Sweep rows of a run ordered by sigma2."""
        session = self.get_session()
        try:
            rows = session.query(SweepRecord).filter_by(run_id=run_id).order_by(SweepRecord.sigma2).all()
            return [
                {
                    'sigma2': r.sigma2,
                    'family': r.family,
                    'lambda_star': r.lambda_star,
                    'mse_opt': r.mse_opt,
                    'mse_opt_ci': r.mse_opt_ci,
                    'mse_periodic': r.mse_periodic,
                    'mse_periodic_ci': r.mse_periodic_ci,
                    't_best': r.t_best,
                    'converged': r.converged,
                }
                for r in rows
            ]
        finally:
            session.close()
