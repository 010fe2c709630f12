"""P1 finite elements on the interval I for the reduced and limit problems.

Both problems have the form

    int c u' phi' + int z u phi = int F phi      for all phi in H^1(I)

with natural (homogeneous Neumann) boundary conditions: the reduced problem
takes c = z = K_eps and F = eps^-gamma K_eps fhat_eps, the limit problem
c = q, z = 1 and F = fhat.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Literal, Optional, Union

import numpy as np
import pandas as pd
from scipy.linalg import solveh_banded

from .errors import ContractError, DomainError
from .geometry import Forcing, ThinDomainSpec, domain_bounds, strip_bounds, thickness
from .qmean import HomogenizedCoefficients
from .utilities import log_step, write_table

logger = logging.getLogger(__name__)

Coefficient = Union[float, Callable[[np.ndarray], np.ndarray]]

GAUSS2 = np.polynomial.legendre.leggauss(2)
GAUSS5 = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True, eq=False)
class Grid1D:
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 2:
            raise DomainError("A grid needs at least two nodes")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("Grid nodes should be strictly increasing")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, a: float, b: float, n_nodes: int) -> "Grid1D":
        return cls(np.linspace(a, b, n_nodes))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    def gauss_points(self, rule=GAUSS2):
        """Quadrature points and weights per element, shape (n_elements, n_points)."""
        xi, w = rule
        mid = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        half = 0.5 * self.h
        return mid[:, None] + half[:, None] * xi[None, :], half[:, None] * w[None, :]


@dataclass(frozen=True, eq=False)
class Field1D:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_nodes,):
            raise ContractError(f"Expected {self.grid.n_nodes} nodal values, got {values.shape}")
        object.__setattr__(self, "values", values)

    def __call__(self, x):
        return np.interp(x, self.grid.nodes, self.values)

    def slope(self, x) -> np.ndarray:
        """Piecewise constant derivative of the interpolant at x."""
        nodes = self.grid.nodes
        e = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, len(nodes) - 2)
        return (self.values[e + 1] - self.values[e]) / (nodes[e + 1] - nodes[e])


@dataclass(frozen=True)
class System1D:
    diagonal: np.ndarray
    off_diagonal: np.ndarray
    rhs: np.ndarray

    def matvec(self, u: np.ndarray) -> np.ndarray:
        out = self.diagonal * u
        out[:-1] += self.off_diagonal * u[1:]
        out[1:] += self.off_diagonal * u[:-1]
        return out


def _sample(coefficient: Coefficient, x: np.ndarray) -> np.ndarray:
    if callable(coefficient):
        return np.broadcast_to(np.asarray(coefficient(x), dtype=float), x.shape)
    return np.full(x.shape, float(coefficient))


def strip_average(
    spec: ThinDomainSpec, forcing: Forcing, eps: float, x: np.ndarray, n_quad_y: int = 4
) -> np.ndarray:
    """(1 / (eps K_eps(x))) times the integral of f(x, .) over the strip (whole thickness in bulk mode)."""
    if n_quad_y < 2:
        raise DomainError(f"n_quad_y should be at least 2, got {n_quad_y}")
    x = np.asarray(x, dtype=float)
    if forcing.mode == "bulk":
        lo, hi = domain_bounds(spec, x, eps)
    else:
        lo, hi = strip_bounds(spec, x, eps)
    lo, hi = np.asarray(lo), np.asarray(hi)
    xi, w = np.polynomial.legendre.leggauss(n_quad_y)
    half = 0.5 * (hi - lo)
    y = 0.5 * (hi + lo)[..., None] + half[..., None] * xi
    integral = half * np.sum(w * forcing(x[..., None], y), axis=-1)
    return integral / (eps * np.asarray(thickness(spec, x, eps)))


def compute_fhat(
    spec: ThinDomainSpec, forcing: Forcing, eps: float, grid: Grid1D, n_quad_y: int = 4
) -> Field1D:
    """Vertically averaged load fhat_eps at the grid nodes."""
    return Field1D(grid, strip_average(spec, forcing, eps, grid.nodes, n_quad_y))


def assemble_1d(coefficient: Coefficient, zeroth: Coefficient, load, grid: Grid1D) -> System1D:
    """Tridiagonal P1 system with two Gauss points per element.

    ``load`` is a load density: a Field1D (used through its interpolant) or a
    vectorised function.
    """
    xq, wq = grid.gauss_points(GAUSS2)
    c = _sample(coefficient, xq)
    if np.any(c <= 0.0) or not np.all(np.isfinite(c)):
        raise DomainError(f"Coefficient should be positive on I, minimum sample {c.min()}")
    z = _sample(zeroth, xq)
    F = _sample(load, xq)

    h = grid.h
    phi0 = (grid.nodes[1:, None] - xq) / h[:, None]
    phi1 = 1.0 - phi0
    stiff = np.sum(wq * c, axis=1) / h**2
    m00 = np.sum(wq * z * phi0 * phi0, axis=1)
    m01 = np.sum(wq * z * phi0 * phi1, axis=1)
    m11 = np.sum(wq * z * phi1 * phi1, axis=1)

    diagonal = np.zeros(grid.n_nodes)
    diagonal[:-1] += stiff + m00
    diagonal[1:] += stiff + m11
    off_diagonal = -stiff + m01

    rhs = np.zeros(grid.n_nodes)
    rhs[:-1] += np.sum(wq * F * phi0, axis=1)
    rhs[1:] += np.sum(wq * F * phi1, axis=1)
    return System1D(diagonal=diagonal, off_diagonal=off_diagonal, rhs=rhs)


def solve_1d(coefficient: Coefficient, zeroth: Coefficient, load, grid: Grid1D) -> Field1D:
    """Neumann P1 solve, symmetric tridiagonal system by banded Cholesky."""
    system = assemble_1d(coefficient, zeroth, load, grid)
    banded = np.zeros((2, grid.n_nodes))
    banded[0, 1:] = system.off_diagonal
    banded[1, :] = system.diagonal
    return Field1D(grid, solveh_banded(banded, system.rhs, lower=False))


def energy_identity_1d(coefficient: Coefficient, zeroth: Coefficient, load, field: Field1D) -> float:
    """Relative mismatch |a(u, u) - l(u)| / |l(u)| of a discrete solution."""
    system = assemble_1d(coefficient, zeroth, load, field.grid)
    energy = float(field.values @ system.matvec(field.values))
    work = float(field.values @ system.rhs)
    return abs(energy - work) / max(abs(work), np.finfo(float).tiny)


def reduced_load(spec: ThinDomainSpec, forcing: Forcing, eps: float, n_quad_y: int = 4) -> Callable:
    """Load density eps^-gamma K_eps fhat_eps, combined before assembly."""
    gamma = 0.0 if forcing.mode == "bulk" else spec.strip.gamma
    amplification = eps ** (-gamma)

    def load(x):
        return amplification * np.asarray(thickness(spec, x, eps)) * strip_average(spec, forcing, eps, x, n_quad_y)

    return load


@log_step
def solve_reduced(
    spec: ThinDomainSpec, forcing: Forcing, eps: float, grid: Grid1D, n_quad_y: int = 4
) -> Field1D:
    """Reduced problem int K u' phi' + K u phi = eps^-gamma int K fhat phi."""

    def K(x):
        return thickness(spec, x, eps)

    return solve_1d(K, K, reduced_load(spec, forcing, eps, n_quad_y), grid)


@log_step
def solve_limit(coeffs: HomogenizedCoefficients, grid: Grid1D) -> Field1D:
    """Homogenized problem int q u' phi' + u phi = int fhat phi."""
    return solve_1d(coeffs.q, 1.0, coeffs.fhat, grid)


def error_1d(
    u: Field1D,
    v: Union[Field1D, Callable],
    kind: Literal["L2", "H1"] = "L2",
    dv: Optional[Callable] = None,
) -> float:
    """Norm of u - v on I.

    A Field1D on the same grid is integrated exactly; a closed form is
    integrated with five Gauss points per element, and its derivative
    ``dv`` is needed for the H1 norm.
    """
    if kind not in ("L2", "H1"):
        raise ValueError(f"Unknown norm kind {kind}")
    grid = u.grid
    if isinstance(v, Field1D):
        if v.grid.n_nodes != grid.n_nodes or not np.allclose(v.grid.nodes, grid.nodes, rtol=0, atol=1e-14):
            v = Field1D(grid, v(grid.nodes))
        d = u.values - v.values
        h = grid.h
        squared = np.sum(h / 3.0 * (d[:-1] ** 2 + d[:-1] * d[1:] + d[1:] ** 2))
        if kind == "H1":
            squared += np.sum(np.diff(d) ** 2 / h)
        return float(np.sqrt(squared))

    xq, wq = grid.gauss_points(GAUSS5)
    squared = np.sum(wq * (u(xq) - v(xq)) ** 2)
    if kind == "H1":
        if dv is None:
            raise ContractError("The H1 error against a closed form needs its derivative")
        squared += np.sum(wq * (u.slope(xq) - dv(xq)) ** 2)
    return float(np.sqrt(squared))


def flux_difference(
    reduced: Field1D, limit: Field1D, spec: ThinDomainSpec, eps: float, P: float
) -> float:
    """L2(I) distance between K_eps (w_eps)' and (1 / P) w'."""
    xq, wq = reduced.grid.gauss_points(GAUSS5)
    K = np.asarray(thickness(spec, xq, eps))
    gap = K * reduced.slope(xq) - limit.slope(xq) / P
    return float(np.sqrt(np.sum(wq * gap**2)))


def default_grid(spec: ThinDomainSpec, eps: float, nodes_per_period: int = 32, min_nodes: int = 257) -> Grid1D:
    """Uniform grid resolving the fastest profile wavelength at this eps."""
    wavelength = min(spec.shortest_wavelength(eps), spec.length)
    n_nodes = max(min_nodes, int(np.ceil(nodes_per_period * spec.length / wavelength)) + 1)
    return Grid1D.uniform(*spec.interval, n_nodes)


def export_field1d_csv(field: Field1D, filename: Path) -> Path:
    return write_table(pd.DataFrame({"x": field.grid.nodes, "value": field.values}), filename)
