"""P1 finite elements on triangulations of R^eps, R_a^eps and Q.

Four coefficient variants share one assembler:

    physical     -lap w + w = eps^-gamma chi f            on R^eps
    shifted_Ra   the same after L^eps, load f(x, y - eps k1)   on R_a^eps
    Q_full_B     div(B grad u) with mass K, load K f2          on Q
    Q_simplified diagonal part of B                            on Q

Element integrals use the three edge midpoints with weight area / 3.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict
from scipy import sparse

from .errors import ContractError, ConvergenceError, DomainError, PartialSliceError
from .fem1d import Field1D, Grid1D
from .geometry import Forcing, ThinDomainSpec, eval_profile, thickness
from .meshgen import TriMesh, locate_points, signed_areas
from .utilities import log_step, write_table

logger = logging.getLogger(__name__)

Variant = Literal["physical", "shifted_Ra", "Q_full_B", "Q_simplified"]

VARIANT_TARGETS = {
    "physical": "physical",
    "shifted_Ra": "shifted",
    "Q_full_B": "rectangle",
    "Q_simplified": "rectangle",
}

# barycentric coordinates of the edge midpoints
MIDPOINTS = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


@dataclass(frozen=True)
class CoefficientField:
    """Tensor A, mass weight rho and load weight of one problem variant."""

    variant: Variant
    spec: ThinDomainSpec
    eps: float

    def __post_init__(self):
        if self.variant not in VARIANT_TARGETS:
            raise ValueError(f"Unknown coefficient variant {self.variant}")
        if not self.eps > 0:
            raise DomainError(f"eps must be positive, got {self.eps}")

    @property
    def target(self) -> str:
        return VARIANT_TARGETS[self.variant]

    @property
    def is_rectangle(self) -> bool:
        return self.target == "rectangle"

    def tensor(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Entries (A11, A12, A22) of the symmetric tensor."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if not self.is_rectangle:
            return np.ones(x.shape), np.zeros(x.shape), np.ones(x.shape)
        K = np.asarray(thickness(self.spec, x, self.eps))
        A22 = 1.0 / (self.eps**2 * K)
        if self.variant == "Q_simplified":
            return K, np.zeros(x.shape), A22
        dK = np.asarray(thickness(self.spec, x, self.eps, derivative=True))
        return K, -y * dK, y**2 * dK**2 / K + A22

    def mass(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if not self.is_rectangle:
            return np.ones(x.shape)
        return np.asarray(thickness(self.spec, x, self.eps))

    def load(self, forcing: Forcing, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Load density at points of this variant's domain, before eps^-gamma."""
        match self.variant:
            case "physical":
                return forcing(x, y)
            case "shifted_Ra":
                return forcing(x, y - self.eps * np.asarray(eval_profile(self.spec.lower, x, self.eps)))
            case _:
                K = np.asarray(thickness(self.spec, x, self.eps))
                k1 = np.asarray(eval_profile(self.spec.lower, x, self.eps))
                return K * forcing(x, y * self.eps * K - self.eps * k1)


@dataclass(frozen=True, eq=False)
class SparseSystem:
    matrix: sparse.csr_matrix
    rhs: np.ndarray
    mesh: TriMesh
    coeff: CoefficientField


@dataclass(frozen=True, eq=False)
class Field2D:
    mesh: TriMesh
    values: np.ndarray
    iterations: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.mesh.n_vertices,):
            raise ContractError(f"Expected {self.mesh.n_vertices} nodal values, got {values.shape}")
        object.__setattr__(self, "values", values)


class NormKind(BaseModel):
    """Squared norms are multiplied by 1 / eps when rescaled."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["L2", "H1", "seminorm_dy"] = "L2"
    rescaled: bool = False


def tensor_determinant(coeff: CoefficientField, x, y) -> np.ndarray:
    A11, A12, A22 = coeff.tensor(x, y)
    return A11 * A22 - A12**2


def _gradients(mesh: TriMesh) -> Tuple[np.ndarray, np.ndarray]:
    """Constant basis gradients per triangle, shape (M, 3, 2), and areas."""
    p = mesh.vertices[mesh.triangles]
    areas = signed_areas(mesh.vertices, mesh.triangles)
    x, y = p[:, :, 0], p[:, :, 1]
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    return np.stack([gx, gy], axis=2) / (2.0 * areas[:, None, None]), areas


def _midpoints(mesh: TriMesh) -> np.ndarray:
    """Edge midpoints per triangle, shape (M, 3, 2)."""
    return np.einsum("qk,mkd->mqd", MIDPOINTS, mesh.vertices[mesh.triangles])


def _check_contract(mesh: TriMesh, coeff: CoefficientField):
    if mesh.target is not None and mesh.target != coeff.target:
        raise ContractError(f"Variant {coeff.variant} needs a {coeff.target} mesh, got {mesh.target}")


def assemble_load(mesh: TriMesh, coeff: CoefficientField, forcing: Forcing, eps: float, gamma: float) -> np.ndarray:
    """eps^-gamma times the load integrated over the strip triangles (all of them in bulk mode)."""
    if forcing.mode == "bulk":
        selected = np.ones(mesh.n_triangles, dtype=bool)
        gamma = 0.0
    else:
        selected = mesh.strip_mask
    triangles = mesh.triangles[selected]
    areas = signed_areas(mesh.vertices, triangles)
    q = np.einsum("qk,mkd->mqd", MIDPOINTS, mesh.vertices[triangles])
    values = coeff.load(forcing, q[..., 0], q[..., 1])
    local = (areas / 3.0)[:, None] * np.einsum("mq,qk->mk", values, MIDPOINTS)
    rhs = np.zeros(mesh.n_vertices)
    np.add.at(rhs, triangles.ravel(), local.ravel())
    return eps ** (-gamma) * rhs


@log_step
def assemble(mesh: TriMesh, coeff: CoefficientField, load: Forcing, eps: float, gamma: float) -> SparseSystem:
    """Stiffness plus weighted mass matrix and concentrated load vector."""
    _check_contract(mesh, coeff)
    if eps != coeff.eps:
        raise ContractError(f"Coefficient built for eps={coeff.eps}, assembling at eps={eps}")
    grads, areas = _gradients(mesh)
    q = _midpoints(mesh)
    A11, A12, A22 = coeff.tensor(q[..., 0], q[..., 1])
    w = (areas / 3.0)[:, None]
    A = np.stack(
        [np.stack([np.sum(w * A11, 1), np.sum(w * A12, 1)], -1), np.stack([np.sum(w * A12, 1), np.sum(w * A22, 1)], -1)],
        axis=1,
    )
    stiffness = np.einsum("mid,mde,mje->mij", grads, A, grads)
    rho = coeff.mass(q[..., 0], q[..., 1])
    mass = np.einsum("mq,qi,qj->mij", w * rho, MIDPOINTS, MIDPOINTS)

    local = stiffness + mass
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_vertices
    matrix = sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    rhs = assemble_load(mesh, coeff, load, eps, gamma)
    return SparseSystem(matrix=matrix, rhs=rhs, mesh=mesh, coeff=coeff)


def pcg(matrix, rhs: np.ndarray, rel_tol: float = 1e-10, max_iter: int = 20000) -> Tuple[np.ndarray, int]:
    """Jacobi preconditioned conjugate gradients on a symmetric positive definite matrix."""
    b_norm = np.linalg.norm(rhs)
    x = np.zeros_like(rhs, dtype=float)
    if b_norm == 0.0:
        return x, 0
    inv_diag = 1.0 / matrix.diagonal()
    r = rhs.astype(float)
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    residual = 1.0
    for k in range(1, max_iter + 1):
        Ap = matrix @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        residual = np.linalg.norm(r) / b_norm
        if residual <= rel_tol:
            return x, k
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not reach relative residual {rel_tol} in {max_iter} iterations",
        residual=float(residual),
        iterations=max_iter,
    )


@log_step
def solve_cg(system: SparseSystem, rel_tol: float = 1e-10, max_iter: int = 20000) -> Field2D:
    values, iterations = pcg(system.matrix, system.rhs, rel_tol, max_iter)
    logger.debug(f"CG converged in {iterations} iterations on {system.mesh.n_vertices} unknowns")
    return Field2D(system.mesh, values, iterations)


def solve_problem(
    mesh: TriMesh,
    spec: ThinDomainSpec,
    forcing: Forcing,
    eps: float,
    variant: Variant = "physical",
    rel_tol: float = 1e-10,
    max_iter: int = 20000,
) -> Tuple[Field2D, SparseSystem]:
    coeff = CoefficientField(variant=variant, spec=spec, eps=eps)
    system = assemble(mesh, coeff, forcing, eps, spec.strip.gamma)
    return solve_cg(system, rel_tol, max_iter), system


def squared_norm(mesh: TriMesh, values: np.ndarray, kind: str = "L2", mask: Optional[np.ndarray] = None) -> float:
    """Exact squared norm of a P1 field, optionally over a subset of triangles."""
    triangles = mesh.triangles if mask is None else mesh.triangles[mask]
    areas = signed_areas(mesh.vertices, triangles)
    u = values[triangles]
    total = 0.0
    if kind in ("L2", "H1"):
        total += float(np.sum(areas / 12.0 * (np.sum(u**2, axis=1) + np.sum(u, axis=1) ** 2)))
    if kind in ("H1", "seminorm_dy"):
        grads, _ = _gradients(mesh)
        if mask is not None:
            grads = grads[mask]
        g = np.einsum("mk,mkd->md", u, grads)
        if kind == "H1":
            total += float(np.sum(areas * np.sum(g**2, axis=1)))
        else:
            total += float(np.sum(areas * g[:, 1] ** 2))
    return total


def norm(field: Field2D, kind: NormKind, eps: float) -> float:
    squared = squared_norm(field.mesh, field.values, kind.kind)
    if kind.rescaled:
        squared /= eps
    return float(np.sqrt(squared))


def q_energy(mesh: TriMesh, values: np.ndarray, eps: float) -> float:
    """||d_x e||^2 + eps^-2 ||d_y e||^2 + ||e||^2 on Q, square rooted."""
    grads, areas = _gradients(mesh)
    g = np.einsum("mk,mkd->md", values[mesh.triangles], grads)
    squared = squared_norm(mesh, values, "L2")
    squared += float(np.sum(areas * (g[:, 0] ** 2 + g[:, 1] ** 2 / eps**2)))
    return float(np.sqrt(squared))


def extend_1d(mesh: TriMesh, w1d: Union[Field1D, Callable]) -> np.ndarray:
    """Nodal values of a 1D function extended constantly in y."""
    return np.asarray(w1d(mesh.vertices[:, 0]), dtype=float)


def diff_with_1d(field: Field2D, w1d: Union[Field1D, Callable], kind: NormKind, eps: float) -> float:
    """Norm of the field minus the y-constant extension of w1d."""
    diff = Field2D(field.mesh, field.values - extend_1d(field.mesh, w1d))
    return norm(diff, kind, eps)


def interpolate(field: Field2D, x, y) -> np.ndarray:
    """P1 interpolation at arbitrary points, NaN outside the mesh."""
    tri, bary = locate_points(field.mesh, x, y)
    safe = np.where(tri < 0, 0, tri)
    values = np.sum(bary * field.values[field.mesh.triangles[safe]], axis=-1)
    return np.where(tri < 0, np.nan, values)


def slice_extract(field: Field2D, y: float, n_samples: int) -> Field1D:
    """Field along the horizontal line y at n_samples uniform x over the mesh span."""
    x_nodes = field.mesh.x_nodes
    if x_nodes is None:
        raise ContractError("Slicing needs a lattice mesh")
    x = np.linspace(x_nodes[0], x_nodes[-1], n_samples)
    values = interpolate(field, x, np.full_like(x, y))
    outside = np.isnan(values)
    if np.any(outside):
        raise PartialSliceError(y, (float(x[outside].min()), float(x[outside].max())), int(outside.sum()))
    return Field1D(Grid1D(x), values)


def raster(field: Field2D, nx: int, ny: int) -> pd.DataFrame:
    """Field on a uniform nx by ny raster of the bounding box, NaN outside the domain."""
    x_min, y_min = field.mesh.vertices.min(axis=0)
    x_max, y_max = field.mesh.vertices.max(axis=0)
    X, Y = np.meshgrid(np.linspace(x_min, x_max, nx), np.linspace(y_min, y_max, ny), indexing="xy")
    values = interpolate(field, X.ravel(), Y.ravel())
    return pd.DataFrame({"x": X.ravel(), "y": Y.ravel(), "value": values})


def energy_identity(system: SparseSystem, field: Field2D) -> Tuple[float, float, float]:
    """a(u, u), l(u) and their relative mismatch."""
    energy = float(field.values @ (system.matrix @ field.values))
    work = float(field.values @ system.rhs)
    return energy, work, abs(energy - work) / max(abs(work), np.finfo(float).tiny)


def strip_load_norm(mesh: TriMesh, forcing: Forcing, eps: float, gamma: float) -> float:
    """eps^-gamma |||f|||^2 over the strip, rescaled by 1 / eps, by midpoint quadrature."""
    triangles = mesh.triangles[mesh.strip_mask]
    areas = signed_areas(mesh.vertices, triangles)
    q = np.einsum("qk,mkd->mqd", MIDPOINTS, mesh.vertices[triangles])
    integral = float(np.sum((areas / 3.0)[:, None] * forcing(q[..., 0], q[..., 1]) ** 2))
    return eps ** (-gamma) * integral / eps


def concentration_ratio(mesh: TriMesh, values: np.ndarray, eps: float, gamma: float) -> float:
    """eps^-gamma |||v|||^2 over the strip divided by |||v|||^2 in H1 of the whole domain."""
    strip = squared_norm(mesh, values, "L2", mask=mesh.strip_mask)
    whole = squared_norm(mesh, values, "H1")
    return eps ** (-gamma) * strip / whole


def export_field_csv(field: Field2D, filename: Path) -> Path:
    dataf = pd.DataFrame({"x": field.mesh.vertices[:, 0], "y": field.mesh.vertices[:, 1], "value": field.values})
    return write_table(dataf, filename)
