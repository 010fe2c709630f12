import logging
import time
from functools import partial
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from .helpers import fem1d, fem2d
from .helpers.errors import PartialSliceError, ThinDomainError
from .helpers.fem1d import Field1D, Grid1D
from .helpers.fem2d import Field2D, NormKind
from .helpers.geometry import strip_depth, thickness
from .helpers.meshgen import generate_mesh, mesh_area, quality_report, write_mesh
from .helpers.qmean import HomogenizedCoefficients, homogenized_coefficients
from .helpers.utilities import write_summary, write_table
from .settings import StudyConfig

logger = logging.getLogger(__name__)

L2_RESCALED = NormKind(kind="L2", rescaled=True)
H1_RESCALED = NormKind(kind="H1", rescaled=True)


def limit_solution(config: StudyConfig) -> Tuple[HomogenizedCoefficients, Field1D]:
    """Homogenized coefficients and the limit solution on the fixed fine grid."""
    spec = config.spec()
    coeffs = homogenized_coefficients(spec, config.forcing, config.means)
    grid = Grid1D.uniform(*spec.interval, config.grid1d)
    return coeffs, fem1d.solve_limit(coeffs, grid)


def reduced_grid(config: StudyConfig, eps: float) -> Grid1D:
    """The finer of the fixed grid and the grid resolving the oscillations at eps."""
    spec = config.spec()
    resolved = fem1d.default_grid(spec, eps)
    if resolved.n_nodes > config.grid1d:
        return resolved
    return Grid1D.uniform(*spec.interval, config.grid1d)


def solve_row(
    config: StudyConfig, eps: float, limit: Field1D
) -> Tuple[Dict[str, float], Field2D]:
    """Solve the physical problem at eps and measure it against the limit solution."""
    spec = config.spec()
    mesh = generate_mesh(spec, eps, config.mesh, "physical")
    field, system = fem2d.solve_problem(mesh, spec, config.forcing, eps, "physical", config.tol, config.max_iter)
    _, _, mismatch = fem2d.energy_identity(system, field)
    norm_H1 = fem2d.norm(field, H1_RESCALED, eps)
    row = {
        "eps": eps,
        "nx": mesh.nx,
        "ny": mesh.ny,
        "n_vertices": mesh.n_vertices,
        "iterations": field.iterations,
        "norm_L2": fem2d.norm(field, L2_RESCALED, eps),
        "norm_H1": norm_H1,
        "error_L2": fem2d.diff_with_1d(field, limit, L2_RESCALED, eps),
        "error_H1": fem2d.diff_with_1d(field, limit, H1_RESCALED, eps),
        "energy_mismatch": mismatch,
        "load_norm": fem2d.strip_load_norm(mesh, config.forcing, eps, spec.strip.gamma),
        "concentration": (
            fem2d.concentration_ratio(mesh, field.values, eps, spec.strip.gamma) if norm_H1 > 0 else 0.0
        ),
    }
    return row, field


def extract_slices(config: StudyConfig, field: Field2D) -> pd.DataFrame:
    """Long table (y, x, value) of the configured horizontal slices that fit in the domain."""
    frames: List[pd.DataFrame] = []
    for y in config.slices:
        try:
            line = fem2d.slice_extract(field, y, config.slice_samples)
        except PartialSliceError as err:
            logger.warning(f"Skip slice: {err}")
            continue
        frames.append(pd.DataFrame({"y": y, "x": line.grid.nodes, "value": line.values}))
    if not frames:
        return pd.DataFrame(columns=["y", "x", "value"])
    return pd.concat(frames, ignore_index=True)


def run_solve2d(config: StudyConfig) -> pd.DataFrame:
    """Solve, export field, slices and raster per eps, and tabulate the norms."""
    coeffs, limit = limit_solution(config)
    rows = []
    timings = {}
    for eps in config.eps:
        t0 = time.perf_counter()
        try:
            row, field = solve_row(config, eps, limit)
            write_mesh(field.mesh, config.output_path("mesh", eps))
            fem2d.export_field_csv(field, config.output_path("field", eps))
            write_table(extract_slices(config, field), config.output_path("slices", eps))
            write_table(fem2d.raster(field, *config.raster), config.output_path("raster", eps))
        except ThinDomainError as err:
            err.add_note(f"while solving the 2D problem at eps={eps}")
            raise
        logger.info(f"eps={eps}: |||w - w_hat||| = {row['error_L2']:.6g} after {row['iterations']} CG iterations")
        rows.append(row)
        timings[str(eps)] = time.perf_counter() - t0
    dataf = pd.DataFrame(rows)
    write_table(dataf, config.output_path("solve2d"))
    write_summary(
        {"timings_seconds": timings, "p_method": coeffs.p_method, "parameters": config.model_dump(mode="json")},
        config.output_path("solve2d_summary"),
    )
    return dataf


def run_reduced(config: StudyConfig) -> pd.DataFrame:
    """Reduced problem per eps against the limit problem on the same grid."""
    spec = config.spec()
    coeffs = homogenized_coefficients(spec, config.forcing, config.means)
    rows = []
    for eps in config.eps:
        try:
            grid = reduced_grid(config, eps)
            reduced = fem1d.solve_reduced(spec, config.forcing, eps, grid, config.n_quad_y)
            limit = fem1d.solve_limit(coeffs, grid)
        except ThinDomainError as err:
            err.add_note(f"while solving the reduced problem at eps={eps}")
            raise
        fem1d.export_field1d_csv(reduced, config.output_path("reduced_field", eps))
        K = partial(thickness, spec, eps=eps)
        rows.append(
            {
                "eps": eps,
                "n_nodes": grid.n_nodes,
                "error_L2": fem1d.error_1d(reduced, limit, "L2"),
                "error_H1": fem1d.error_1d(reduced, limit, "H1"),
                "flux_difference": fem1d.flux_difference(reduced, limit, spec, eps, coeffs.P),
                "energy_mismatch": fem1d.energy_identity_1d(
                    K, K, fem1d.reduced_load(spec, config.forcing, eps, config.n_quad_y), reduced
                ),
            }
        )
    dataf = pd.DataFrame(rows)
    write_table(dataf, config.output_path("reduced"))
    return dataf


def run_limit(config: StudyConfig) -> Tuple[HomogenizedCoefficients, Field1D]:
    coeffs, limit = limit_solution(config)
    fem1d.export_field1d_csv(limit, config.output_path("limit_field"))
    write_summary(
        {
            "coefficients": {
                "K1": coeffs.K1,
                "K2": coeffs.K2,
                "P": coeffs.P,
                "q": coeffs.q,
                "muH": coeffs.muH,
                "p_method": coeffs.p_method,
            },
            "grid_nodes": limit.grid.n_nodes,
            "energy_mismatch": fem1d.energy_identity_1d(coeffs.q, 1.0, coeffs.fhat, limit),
        },
        config.output_path("limit"),
    )
    return coeffs, limit


def run_mesh(config: StudyConfig) -> pd.DataFrame:
    """Mesh per eps with quality statistics and area checks."""
    spec = config.spec()
    x = np.linspace(*spec.interval, 200001)
    rows = []
    for eps in config.eps:
        try:
            mesh = generate_mesh(spec, eps, config.mesh, "physical")
        except ThinDomainError as err:
            err.add_note(f"while meshing at eps={eps}")
            raise
        write_mesh(mesh, config.output_path("mesh", eps))
        quality = quality_report(mesh)
        rows.append(
            {
                "eps": eps,
                "nx": mesh.nx,
                "ny": mesh.ny,
                "n_vertices": mesh.n_vertices,
                "n_triangles": mesh.n_triangles,
                "min_angle": quality.min_angle,
                "max_aspect": quality.max_aspect,
                "bulk_triangles": quality.counts.get("bulk", 0),
                "strip_triangles": quality.counts.get("strip", 0),
                "area": mesh_area(mesh),
                "expected_area": eps * trapezoid(thickness(spec, x, eps), x),
                "strip_area": mesh_area(mesh, "strip"),
                "expected_strip_area": trapezoid(strip_depth(spec, x, eps), x),
            }
        )
    dataf = pd.DataFrame(rows)
    write_table(dataf, config.output_path("mesh_table"))
    return dataf
