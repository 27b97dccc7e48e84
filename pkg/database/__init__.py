"""WIRES Database Package"""

from .run_store import RunStore, RunRecord, LambdaStep, SweepRecord

__all__ = ['RunStore', 'RunRecord', 'LambdaStep', 'SweepRecord']
