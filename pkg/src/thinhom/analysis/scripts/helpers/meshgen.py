"""Mapped tensor-product triangulations of the thin domain.

Every mesh is built on one (x, t) lattice with t in [0, 1]. The top
``ny_strip`` layers fill the strip band [1 - eps^gamma H / K, 1] uniformly,
the ``ny_bulk`` layers below are graded toward it. The lattice is then
mapped to one of three targets:

    physical   y = -eps k1(x) + t eps K(x)   (R^eps)
    shifted    y = t eps K(x)                (R_a^eps)
    rectangle  y = t                         (Q = I x (0, 1))

Vertex k is (x_i, t_j) with k = i (ny + 1) + j for all targets, so a nodal
field on one target is a nodal field on the others.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import DomainError, MeshError
from .geometry import ThinDomainSpec, eval_profile, strip_fraction, thickness
from .utilities import FLOAT_FORMAT, log_step

logger = logging.getLogger(__name__)

Target = Literal["physical", "shifted", "rectangle"]
BULK, STRIP = "bulk", "strip"


class MeshParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    nx: Optional[int] = Field(default=None, ge=1)
    ny_bulk: int = Field(default=16, ge=1)
    ny_strip: int = Field(default=4, ge=1)
    grading: float = Field(default=1.5, ge=1.0)
    cells_per_period: int = Field(default=32, ge=1)

    @property
    def ny(self) -> int:
        return self.ny_bulk + self.ny_strip


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Triangles are counterclockwise vertex triples.

    The lattice fields are None for meshes read back from text, which
    then support assembly and norms but not point location.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    region: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    target: Optional[str] = None
    eps: Optional[float] = None
    x_nodes: Optional[np.ndarray] = None
    levels: Optional[np.ndarray] = field(default=None, repr=False)
    ny_bulk: Optional[int] = None
    ny_strip: Optional[int] = None

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def nx(self) -> Optional[int]:
        return None if self.x_nodes is None else len(self.x_nodes) - 1

    @property
    def ny(self) -> Optional[int]:
        return None if self.levels is None else self.levels.shape[1] - 1

    @property
    def strip_mask(self) -> np.ndarray:
        return self.region == STRIP

    @property
    def has_lattice(self) -> bool:
        return self.x_nodes is not None


@dataclass(frozen=True)
class MeshQuality:
    min_angle: float
    max_aspect: float
    counts: Dict[str, int]


def default_nx(spec: ThinDomainSpec, eps: float, params: MeshParams) -> int:
    """Columns needed for cells_per_period cells per period of the fastest profile component."""
    if params.nx is not None:
        return params.nx
    wavelength = min(spec.shortest_wavelength(eps), spec.length)
    return int(np.ceil(params.cells_per_period * spec.length / wavelength))


def lattice_levels(spec: ThinDomainSpec, x: np.ndarray, eps: float, params: MeshParams) -> np.ndarray:
    """t-levels per column, shape (len(x), ny + 1)."""
    fraction = np.asarray(strip_fraction(spec, x, eps))
    if np.any(fraction <= 0.0):
        raise MeshError(f"Strip vanishes at eps={eps}, strip height must be positive at every column")
    if np.any(fraction >= 1.0):
        raise MeshError(f"Strip is not contained in the domain at eps={eps}")
    t_strip = 1.0 - fraction

    j_bulk = np.arange(params.ny_bulk + 1) / params.ny_bulk
    bulk = t_strip[:, None] * (1.0 - (1.0 - j_bulk[None, :]) ** params.grading)
    j_strip = np.arange(1, params.ny_strip + 1) / params.ny_strip
    strip = t_strip[:, None] + fraction[:, None] * j_strip[None, :]
    levels = np.concatenate([bulk, strip], axis=1)
    # strip face and top exact
    levels[:, params.ny_bulk] = t_strip
    levels[:, -1] = 1.0
    return levels


def map_levels(spec: ThinDomainSpec, x: np.ndarray, levels: np.ndarray, eps: float, target: Target) -> np.ndarray:
    match target:
        case "physical":
            k1 = np.asarray(eval_profile(spec.lower, x, eps))
            K = np.asarray(thickness(spec, x, eps))
            return -eps * k1[:, None] + levels * (eps * K)[:, None]
        case "shifted":
            K = np.asarray(thickness(spec, x, eps))
            return levels * (eps * K)[:, None]
        case "rectangle":
            return levels.copy()
        case _:
            raise ValueError(f"Unknown mesh target {target}")


def _lattice_triangles(nx: int, ny: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    v00 = (i * (ny + 1) + j).ravel()
    v10 = v00 + ny + 1
    v11 = v10 + 1
    v01 = v00 + 1
    lower = np.stack([v00, v10, v11], axis=1)
    upper = np.stack([v00, v11, v01], axis=1)
    return np.stack([lower, upper], axis=1).reshape(-1, 3)


def _lattice_boundary(nx: int, ny: int) -> Tuple[np.ndarray, np.ndarray]:
    def vid(i, j):
        return i * (ny + 1) + j

    i = np.arange(nx)
    j = np.arange(ny)
    bottom = np.stack([vid(i, 0), vid(i + 1, 0)], axis=1)
    right = np.stack([vid(nx, j), vid(nx, j + 1)], axis=1)
    top = np.stack([vid(i + 1, ny), vid(i, ny)], axis=1)
    left = np.stack([vid(0, j + 1), vid(0, j)], axis=1)
    edges = np.concatenate([bottom, right, top, left])
    tags = np.array(["bottom"] * nx + ["right"] * ny + ["top"] * nx + ["left"] * ny)
    return edges, tags


def signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def check_orientation(vertices: np.ndarray, triangles: np.ndarray):
    areas = signed_areas(vertices, triangles)
    bad = np.flatnonzero(areas <= 0.0)
    if bad.size:
        raise MeshError(
            f"{bad.size} triangles with non-positive area (first {bad[:5].tolist()}), "
            "the horizontal resolution may be too coarse for the boundary oscillation"
        )


@log_step
def generate_mesh(
    spec: ThinDomainSpec, eps: float, params: Optional[MeshParams] = None, target: Target = "physical"
) -> TriMesh:
    """Triangulate R^eps, R_a^eps or Q with the strip face aligned to mesh edges.

    Each lattice quad is split along its (i, j)-(i+1, j+1) diagonal into
    triangles 2q and 2q + 1, q = i ny + j.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    params = params or MeshParams()
    if not spec.strip_inside(eps):
        raise MeshError(f"Strip is not contained in the domain at eps={eps}")

    nx = default_nx(spec, eps, params)
    ny = params.ny
    x_nodes = np.linspace(*spec.interval, nx + 1)
    levels = lattice_levels(spec, x_nodes, eps, params)
    Y = map_levels(spec, x_nodes, levels, eps, target)

    vertices = np.column_stack([np.repeat(x_nodes, ny + 1), Y.ravel()])
    triangles = _lattice_triangles(nx, ny)
    check_orientation(vertices, triangles)

    layer = np.tile(np.repeat(np.arange(ny), 2), nx)
    region = np.where(layer >= params.ny_bulk, STRIP, BULK)
    edges, tags = _lattice_boundary(nx, ny)
    logger.debug(f"Mesh {target} eps={eps}: {nx} columns, {ny} layers, {len(triangles)} triangles")
    return TriMesh(
        vertices=vertices,
        triangles=triangles,
        region=region,
        boundary_edges=edges,
        boundary_tags=tags,
        target=target,
        eps=eps,
        x_nodes=x_nodes,
        levels=levels,
        ny_bulk=params.ny_bulk,
        ny_strip=params.ny_strip,
    )


def quality_report(mesh: TriMesh) -> MeshQuality:
    """Minimum angle (degrees), maximum aspect (longest edge over shortest altitude), counts per tag."""
    p = mesh.vertices[mesh.triangles]
    edges = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    lengths = np.linalg.norm(edges, axis=2)
    # angle at vertex k sits between the two edges adjacent to it
    cos = np.empty_like(lengths)
    for k in range(3):
        a, b = edges[:, (k + 1) % 3], edges[:, (k + 2) % 3]
        cos[:, k] = -np.sum(a * b, axis=1) / (lengths[:, (k + 1) % 3] * lengths[:, (k + 2) % 3])
    angles = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    areas = np.abs(signed_areas(mesh.vertices, mesh.triangles))
    longest = lengths.max(axis=1)
    shortest_altitude = 2.0 * areas / longest
    tags, counts = np.unique(mesh.region, return_counts=True)
    return MeshQuality(
        min_angle=float(angles.min()),
        max_aspect=float(np.max(longest / shortest_altitude)),
        counts={str(t): int(c) for t, c in zip(tags, counts)},
    )


def locate_points(mesh: TriMesh, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Containing triangle and barycentric coordinates of each point.

    Uses the lattice: the column by bisection in x, the layer by comparing y
    with the straight level lines of that column, then the diagonal.
    Points outside the mesh get triangle -1 and NaN coordinates.
    """
    if not mesh.has_lattice:
        raise MeshError("Point location needs a lattice mesh, meshes read from text have none")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x, y = np.broadcast_arrays(x, y)
    shape = x.shape
    x, y = x.ravel(), y.ravel()

    nx, ny = mesh.nx, mesh.ny
    Y = mesh.vertices[:, 1].reshape(nx + 1, ny + 1)
    xs = mesh.x_nodes
    span = xs[-1] - xs[0]
    tol = 1e-12 * max(1.0, span)
    inside_x = (x >= xs[0] - tol) & (x <= xs[-1] + tol)
    col = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, nx - 1)
    s = (x - xs[col]) / (xs[col + 1] - xs[col])
    level_y = (1.0 - s)[:, None] * Y[col] + s[:, None] * Y[col + 1]
    height = level_y[:, -1] - level_y[:, 0]
    ytol = 1e-12 * np.maximum(1.0, np.abs(height))
    inside = inside_x & (y >= level_y[:, 0] - ytol) & (y <= level_y[:, -1] + ytol)
    layer = np.clip(np.sum(level_y[:, 1:-1] <= y[:, None], axis=1), 0, ny - 1)

    diag = (1.0 - s) * Y[col, layer] + s * Y[col + 1, layer + 1]
    quad = col * ny + layer
    tri = 2 * quad + (y > diag).astype(int)

    p = mesh.vertices[mesh.triangles[tri]]
    v0, v1 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    w = np.column_stack([x, y]) - p[:, 0]
    det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    l1 = (w[:, 0] * v1[:, 1] - w[:, 1] * v1[:, 0]) / det
    l2 = (v0[:, 0] * w[:, 1] - v0[:, 1] * w[:, 0]) / det
    bary = np.column_stack([1.0 - l1 - l2, l1, l2])

    tri = np.where(inside, tri, -1)
    bary[~inside] = np.nan
    return tri.reshape(shape), bary.reshape(shape + (3,))


def mesh_area(mesh: TriMesh, region: Optional[str] = None) -> float:
    areas = signed_areas(mesh.vertices, mesh.triangles)
    if region is not None:
        areas = areas[mesh.region == region]
    return float(np.sum(areas))


def write_mesh(mesh: TriMesh, filename: Path) -> Path:
    """Plain-text export: header, "x y" lines, then "i j k tag" lines."""
    filename = Path(filename)
    filename.parent.mkdir(parents=True, exist_ok=True)
    logger.info(f"Write {filename}")
    with open(filename, "w") as file:
        file.write(f"vertices {mesh.n_vertices} triangles {mesh.n_triangles}\n")
        np.savetxt(file, mesh.vertices, fmt=FLOAT_FORMAT, delimiter=" ")
        for (i, j, k), tag in zip(mesh.triangles, mesh.region):
            file.write(f"{i} {j} {k} {tag}\n")
    return filename


def _classify_boundary(vertices: np.ndarray, triangles: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    local = np.array([[0, 1], [1, 2], [2, 0]])
    edges = triangles[:, local].reshape(-1, 2)
    key = np.sort(edges, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    edges = edges[counts[inverse.ravel()] == 1]

    # counterclockwise triangles run along the bottom left to right and along the top right to left
    x_min, x_max = vertices[:, 0].min(), vertices[:, 0].max()
    xe = vertices[edges][:, :, 0]
    tags = np.where(xe[:, 1] > xe[:, 0], "bottom", "top").astype("<U6")
    tags[np.all(xe == x_min, axis=1)] = "left"
    tags[np.all(xe == x_max, axis=1)] = "right"
    return edges, tags


def read_mesh(filename: Path) -> TriMesh:
    """Inverse of write_mesh; the result carries no lattice."""
    filename = Path(filename)
    with open(filename) as file:
        lines = file.read().splitlines()
    header = lines[0].split() if lines else []
    if len(header) != 4 or header[0] != "vertices" or header[2] != "triangles":
        raise MeshError(f"Unexpected mesh header in {filename}: {' '.join(header)}")
    n_vertices, n_triangles = int(header[1]), int(header[3])
    vertex_lines = lines[1 : 1 + n_vertices]
    rows = [line.split() for line in lines[1 + n_vertices : 1 + n_vertices + n_triangles]]
    if len(vertex_lines) != n_vertices or len(rows) != n_triangles or any(len(r) != 4 for r in rows):
        raise MeshError(f"Mesh file {filename} does not match its header")
    vertices = np.loadtxt(vertex_lines, ndmin=2)
    if vertices.shape != (n_vertices, 2):
        raise MeshError(f"Mesh file {filename} does not match its header")
    triangles = np.array([r[:3] for r in rows], dtype=np.int64).reshape(-1, 3)
    region = np.array([r[3] for r in rows])
    check_orientation(vertices, triangles)
    edges, tags = _classify_boundary(vertices, triangles)
    return TriMesh(vertices=vertices, triangles=triangles, region=region, boundary_edges=edges, boundary_tags=tags)
