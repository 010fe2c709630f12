"""Gaps between the intermediate problems linking the 2D and the reduced solution.

Per eps the chain solves

    w   on R^eps           physical problem
    v   on R_a^eps         same operator on the domain shifted by L^eps
    u   on Q               transformed operator with the full tensor B
    w1  on Q               diagonal part of B
    u1  on I               reduced problem

and measures |||w o L - v|||, the Q energy of u - w1, the Q energy of
w1 - u1 and the end-to-end |||w - u1|||. The three meshes share one
lattice, so w o L and v live on the same nodes.
"""

import logging
import time
from functools import partial
from typing import Dict

import numpy as np
import pandas as pd

from .helpers import fem1d, fem2d
from .helpers.errors import ThinDomainError
from .helpers.fem1d import Grid1D
from .helpers.fem2d import Field2D, NormKind
from .helpers.geometry import jacobian_determinant, map_L, map_S, thickness
from .helpers.meshgen import generate_mesh
from .helpers.utilities import log_step, write_summary, write_table
from .settings import StudyConfig

logger = logging.getLogger(__name__)

H1_RESCALED = NormKind(kind="H1", rescaled=True)
N_JACOBIAN_SAMPLES = 1000


def jacobian_columns(config: StudyConfig, eps: float) -> Dict[str, float]:
    """Finite-difference Jacobian determinants of L^eps and S^eps at fixed sample points."""
    spec = config.spec()
    a, b = spec.interval
    x = np.linspace(a, b, N_JACOBIAN_SAMPLES + 2)[1:-1]
    t = np.linspace(0.0, 1.0, N_JACOBIAN_SAMPLES + 2)[1:-1][::-1]
    det_L = jacobian_determinant(partial(map_L, spec, eps=eps), x, eps * t)
    det_S = jacobian_determinant(partial(map_S, spec, eps=eps), x, t)
    expected_S = eps * np.asarray(thickness(spec, x, eps))
    return {
        "det_JL": float(np.mean(det_L)),
        "det_JL_deviation": float(np.max(np.abs(det_L - 1.0))),
        "det_JS_relative_error": float(np.max(np.abs(det_S - expected_S) / expected_S)),
    }


@log_step
def chain_row(config: StudyConfig, eps: float) -> Dict[str, float]:
    spec = config.spec()
    forcing = config.forcing
    solve = partial(fem2d.solve_problem, spec=spec, forcing=forcing, eps=eps, rel_tol=config.tol, max_iter=config.max_iter)

    physical = generate_mesh(spec, eps, config.mesh, "physical")
    shifted = generate_mesh(spec, eps, config.mesh, "shifted")
    rectangle = generate_mesh(spec, eps, config.mesh, "rectangle")

    w, _ = solve(physical, variant="physical")
    v, _ = solve(shifted, variant="shifted_Ra")
    u, _ = solve(rectangle, variant="Q_full_B")
    w1, _ = solve(rectangle, variant="Q_simplified")
    u1 = fem1d.solve_reduced(spec, forcing, eps, Grid1D(rectangle.x_nodes), config.n_quad_y)

    gap_shift = fem2d.norm(Field2D(shifted, w.values - v.values), H1_RESCALED, eps)
    gap_tensor = fem2d.q_energy(rectangle, u.values - w1.values, eps)
    gap_reduction = fem2d.q_energy(rectangle, w1.values - fem2d.extend_1d(rectangle, u1), eps)
    end_to_end = fem2d.diff_with_1d(w, u1, H1_RESCALED, eps)
    return {
        "eps": eps,
        "gap_shift": gap_shift,
        "gap_tensor": gap_tensor,
        "gap_reduction": gap_reduction,
        "end_to_end": end_to_end,
        **jacobian_columns(config, eps),
    }


def run_chain(config: StudyConfig) -> pd.DataFrame:
    rows = []
    timings = {}
    for eps in config.eps:
        t0 = time.perf_counter()
        try:
            rows.append(chain_row(config, eps))
        except ThinDomainError as err:
            err.add_note(f"while running the verification chain at eps={eps}")
            raise
        logger.info(
            f"eps={eps}: shift {rows[-1]['gap_shift']:.4g}, tensor {rows[-1]['gap_tensor']:.4g}, "
            f"reduction {rows[-1]['gap_reduction']:.4g}, end to end {rows[-1]['end_to_end']:.4g}"
        )
        timings[str(eps)] = time.perf_counter() - t0
    dataf = pd.DataFrame(rows)
    for column in ("gap_shift", "gap_tensor", "gap_reduction", "end_to_end"):
        if not dataf[column].is_monotonic_decreasing:
            logger.warning(f"Column {column} does not decrease along the eps list")
    write_table(dataf, config.output_path("chain"))
    write_summary(
        {"timings_seconds": timings, "parameters": config.model_dump(mode="json")}, config.output_path("chain_summary")
    )
    return dataf
