import logging
import multiprocessing as mp
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from .helpers import fem1d
from .helpers.errors import ContractError, ThinDomainError
from .helpers.utilities import fit_loglog_slope, write_summary, write_table
from .settings import StudyConfig
from .solve_thin_domain import limit_solution, reduced_grid, solve_row
from .verification_chain import chain_row

logger = logging.getLogger(__name__)


@dataclass
class StudyReport:
    table: pd.DataFrame
    slope: float
    timings: Dict[float, float] = field(default_factory=dict)
    reference_deviation: Optional[List[float]] = None


def compute_study_row(config: StudyConfig, eps: float):
    """Solve the 2D, reduced and limit problems at one eps.

    Failures are recorded in the ``status`` column instead of raised, so
    the remaining eps values still run.

    Args:
        config: the study configuration
        eps: thickness parameter

    Returns:
        tuple of the row dictionary and the wall time in seconds
    """
    t0 = time.perf_counter()
    try:
        coeffs, limit = limit_solution(config)
        row, _ = solve_row(config, eps, limit)
        spec = config.spec()
        grid = reduced_grid(config, eps)
        reduced = fem1d.solve_reduced(spec, config.forcing, eps, grid, config.n_quad_y)
        row["reduced_vs_limit"] = fem1d.error_1d(reduced, fem1d.solve_limit(coeffs, grid), "L2")
        if config.study_chain:
            row.update({k: v for k, v in chain_row(config, eps).items() if k != "eps"})
        row["status"] = "ok"
    except ThinDomainError as err:
        logger.error(f"eps={eps} failed: {err}")
        row = {"eps": eps, "status": f"{type(err).__name__}: {err}"}
    return row, time.perf_counter() - t0


def run_study(config: StudyConfig, name: str = "name") -> StudyReport:
    """Error table of the 2D solution against the limit solution along the eps list.

    Args:
        config: the study configuration, with at least two eps values
        name: use '__main__' to run the eps values on a process pool

    Returns:
        the report with the fitted log-log slope of the error against eps
    """
    if len(config.eps) < 2:
        raise ContractError(f"A study needs at least two eps values, got {config.eps}")

    if name == "__main__" and config.n_workers > 1:
        logger.info(f"Starting pool with {config.n_workers} workers...")
        with mp.Pool(processes=config.n_workers) as pool:
            results = pool.starmap(compute_study_row, [(config, eps) for eps in config.eps])
    else:
        results = [compute_study_row(config, eps) for eps in tqdm(config.eps, desc="eps sweep")]

    rows = [row for row, _ in results]
    timings = {row["eps"]: seconds for row, seconds in results}
    table = pd.DataFrame(rows)
    columns = ["eps", "status"] + [c for c in table.columns if c not in ("eps", "status")]
    table = table[columns]

    ok = table[table["status"] == "ok"]
    slope = fit_loglog_slope(ok["eps"], ok["error_L2"]) if "error_L2" in ok else float("nan")
    deviation = None
    if config.reference_errors is not None and "error_L2" in table:
        reference = np.asarray(config.reference_errors)
        deviation = ((table["error_L2"].to_numpy(dtype=float) - reference) / reference).tolist()
    logger.info(f"Fitted log-log slope of the error against eps: {slope:.4g}")

    write_table(table, config.output_path("study"))
    write_summary(
        {
            "eps": config.eps,
            "slope": slope,
            "timings_seconds": {str(eps): seconds for eps, seconds in timings.items()},
            "reference_errors": config.reference_errors,
            "reference_deviation": deviation,
            "parameters": config.model_dump(mode="json"),
        },
        config.output_path("study_summary"),
    )
    return StudyReport(table=table, slope=slope, timings=timings, reference_deviation=deviation)
