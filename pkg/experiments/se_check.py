"""
WIRES - Squared-Error Identity Check
Monte Carlo of E[∫₀^y (w₀ + W_t)² dt] against y²/2 + y·e0 on an (e0, y) grid.
"""

from typing import Sequence

import pandas as pd

from core.stochastic import RngStream, squared_error_check


def squared_error_grid(
    e0_list: Sequence[float],
    y_list: Sequence[float],
    n_paths: int,
    n_steps: int,
    seed: int
) -> pd.DataFrame:
    """Rows (e0, y, mc_estimate, closed_form, std_error, rel_error); cell i uses stream i."""
    rows = []
    cells = [(float(e0), float(y)) for e0 in e0_list for y in y_list]
    for index, (e0, y) in enumerate(cells):
        est = squared_error_check(e0, y, n_paths, RngStream(seed, stream_id=index), n_steps=n_steps)
        rel = abs(est.mc_estimate - est.closed_form) / est.closed_form if est.closed_form > 0 else 0.0
        rows.append({
            'e0': e0,
            'y': y,
            'mc_estimate': est.mc_estimate,
            'closed_form': est.closed_form,
            'std_error': est.std_error,
            'rel_error': rel,
        })
    return pd.DataFrame(rows, columns=['e0', 'y', 'mc_estimate', 'closed_form', 'std_error', 'rel_error'])
