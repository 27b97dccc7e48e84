"""
WIRES - Export
Byte-stable CSV/JSON writers and the per-run manifest.
"""

import json
import os
import platform
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import scipy

from core import __version__

CSV_FLOAT_FORMAT = '%.12g'


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no inf/nan literal
        return value if np.isfinite(value) else str(value)
    return value


def write_csv(frame: pd.DataFrame, path: str) -> str:
    """Header row always, 12 significant digits, '\\n' line endings."""
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
    return path


def write_json(payload: Dict[str, Any], path: str) -> str:
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
        f.write('\n')
    return path


def package_versions() -> Dict[str, str]:
    return {
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
        'wires': __version__,
    }


def write_manifest(
    out_dir: str,
    subcommand: str,
    config_hash: str,
    seed: int,
    wall_time: float,
    files: List[str],
    extra: Optional[Dict[str, Any]] = None
) -> str:
    """manifest.json listing what the run wrote and how to reproduce it."""
    payload = {
        'subcommand': subcommand,
        'config_sha256': config_hash,
        'seed': seed,
        'versions': package_versions(),
        'wall_time_seconds': round(wall_time, 3),
        'files': sorted(os.path.basename(f) for f in files),
    }
    if extra:
        payload.update(extra)
    return write_json(payload, os.path.join(out_dir, 'manifest.json'))
