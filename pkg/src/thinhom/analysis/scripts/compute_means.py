import logging
import time
from typing import Dict, List

import numpy as np
import pandas as pd

from .helpers.errors import UnsupportedError
from .helpers.geometry import eta_sup
from .helpers.qmean import (
    MAX_TORUS_DIMENSION,
    QPFunction,
    besicovitch_norm,
    mean_long_interval,
    mean_torus,
    mean_trig,
    reciprocal_mean,
    torus_lift,
)
from .helpers.utilities import write_summary, write_table
from .settings import StudyConfig

logger = logging.getLogger(__name__)


def _row(quantity: str, method: str, value: float, grid: str = "") -> Dict:
    return {"quantity": quantity, "method": method, "value": value, "grid": grid}


def reciprocal_mean_by_method(config: StudyConfig) -> List[Dict]:
    """P = mean of 1/K by every method that applies to the configured profiles."""
    spec = config.spec()
    options = config.means
    rows = []
    if spec.constant_thickness:
        P, _ = reciprocal_mean(spec, options)
        rows.append(_row("P", "exact", P))

    two_scales = spec.lower.scale_exponent != spec.upper.scale_exponent
    K = QPFunction.from_profile(spec.lower.base, "alpha") + QPFunction.from_profile(
        spec.upper.base, "beta" if two_scales else "alpha"
    )
    lifted, cell = torus_lift(K)
    if not K.is_constant and cell.dimension <= MAX_TORUS_DIMENSION:
        value = mean_torus(lambda *t: 1.0 / lifted(*t), cell, options.torus_points)
        rows.append(_row("P", "torus", value, f"n={options.torus_points}, axes={cell.dimension}"))
    elif not K.is_constant:
        logger.info(f"Skip torus quadrature: {cell.dimension} frequency families exceed dimension {MAX_TORUS_DIMENSION}")

    if not K.is_constant and not two_scales:
        _, tail = mean_long_interval(lambda s: 1.0 / K(s), options.t_grid, 2.0 * np.pi / K.max_frequency)
        for T, estimate in zip(options.t_grid, tail):
            rows.append(_row("P", "long_interval", estimate, f"T={T:g}"))
    elif K.is_constant:
        value, _ = mean_long_interval(lambda s: 1.0 / K(s), options.t_grid)
        rows.append(_row("P", "long_interval", value, f"T={options.t_grid[-1]:g}"))

    eps = config.eps[-1]
    report = eta_sup(spec, eps, n_samples=200001)
    rows.append(_row("P", "sampled", report.sampled_means["1/K"], f"eps={eps:g}"))
    return rows


def run_means(config: StudyConfig) -> pd.DataFrame:
    """Means table with columns quantity, method, value and grid."""
    t0 = time.perf_counter()
    spec = config.spec()
    lower = QPFunction.from_profile(spec.lower.base)
    upper = QPFunction.from_profile(spec.upper.base)
    K1, K2 = mean_trig(lower), mean_trig(upper)
    rows = [
        _row("K1", "exact", K1),
        _row("K2", "exact", K2),
        _row("mu(K)", "exact", K1 + K2),
        _row("mu(H)", "exact", mean_trig(QPFunction.from_profile(spec.strip.height_profile.base))),
    ]
    P_rows = reciprocal_mean_by_method(config)
    rows.extend(P_rows)

    try:
        P, method = reciprocal_mean(spec, config.means)
        rows.append(_row("q", method, 1.0 / (P * (K1 + K2))))
        rows.append(_row("jensen", method, P * (K1 + K2)))
    except UnsupportedError as err:
        logger.warning(f"No reciprocal mean for q: {err}")

    if spec.lower.scale_exponent == spec.upper.scale_exponent:
        K = lower + upper
        period = 2.0 * np.pi / K.max_frequency if not K.is_constant else 2.0 * np.pi
        norm, _ = besicovitch_norm(K, config.means.t_grid, period)
        rows.append(_row("besicovitch(K)", "long_interval", norm, f"T={config.means.t_grid[-1]:g}"))

    # each method's last estimate against every other
    finals = {}
    for row in P_rows:
        finals[row["method"]] = row["value"]
    methods = sorted(finals)
    for i, a in enumerate(methods):
        for b in methods[i + 1 :]:
            rows.append(_row("P_deviation", f"{a}-{b}", abs(finals[a] - finals[b])))

    dataf = pd.DataFrame(rows)
    write_table(dataf, config.output_path("means"))
    write_summary(
        {"timings_seconds": time.perf_counter() - t0, "parameters": config.model_dump(mode="json")},
        config.output_path("means_summary"),
    )
    return dataf
