import numpy as np
import pytest

from src.thinhom.analysis.scripts.helpers.errors import DomainError, MeshError
from src.thinhom.analysis.scripts.helpers.geometry import StripSpec, ThinDomainSpec
from src.thinhom.analysis.scripts.helpers.meshgen import (
    MeshParams,
    TriMesh,
    default_nx,
    generate_mesh,
    locate_points,
    mesh_area,
    quality_report,
    read_mesh,
    signed_areas,
    write_mesh,
)

from builders import profile


def unit_square_mesh() -> TriMesh:
    """2 x 2 squares of side 1/2, each cut along its rising diagonal."""
    xs = np.array([0.0, 0.5, 1.0])
    vertices = np.array([(x, y) for x in xs for y in xs])
    triangles = []
    for i in range(2):
        for j in range(2):
            v00 = 3 * i + j
            v10, v11, v01 = v00 + 3, v00 + 4, v00 + 1
            triangles += [(v00, v10, v11), (v00, v11, v01)]
    return TriMesh(
        vertices=vertices,
        triangles=np.array(triangles),
        region=np.array(["bulk"] * 8),
        boundary_edges=np.empty((0, 2), dtype=int),
        boundary_tags=np.array([]),
    )


def test_lattice_counts(make_constant_spec):
    mesh = generate_mesh(make_constant_spec(), 0.1, MeshParams(nx=4, ny_bulk=1, ny_strip=1), target="rectangle")
    assert mesh.n_vertices == 15
    assert mesh.n_triangles == 16
    assert (mesh.nx, mesh.ny) == (4, 2)
    assert quality_report(mesh).counts == {"bulk": 8, "strip": 8}


@pytest.mark.parametrize("target", ["physical", "shifted", "rectangle"])
def test_constant_profiles_give_congruent_layers(make_constant_spec, target):
    mesh = generate_mesh(make_constant_spec(), 0.1, MeshParams(nx=10, ny_bulk=3, ny_strip=2), target=target)
    areas = signed_areas(mesh.vertices, mesh.triangles).reshape(10, 5, 2)
    assert np.all(areas > 0)
    np.testing.assert_allclose(areas, areas[:1, :, :1], rtol=1e-12)


def test_targets_share_the_lattice(benchmark, small_params):
    meshes = {t: generate_mesh(benchmark, 0.1, small_params, target=t) for t in ("physical", "shifted", "rectangle")}
    for mesh in meshes.values():
        np.testing.assert_array_equal(mesh.vertices[:, 0], meshes["physical"].vertices[:, 0])
        np.testing.assert_array_equal(mesh.triangles, meshes["physical"].triangles)
    np.testing.assert_array_equal(meshes["rectangle"].vertices[:, 1], meshes["rectangle"].levels.ravel())


def test_benchmark_fine_mesh_is_valid(benchmark):
    mesh = generate_mesh(benchmark, 0.1, MeshParams(nx=2000))
    assert np.all(signed_areas(mesh.vertices, mesh.triangles) > 0)
    assert quality_report(mesh).min_angle > 0


def test_strip_layer_count(benchmark):
    params = MeshParams()
    mesh = generate_mesh(benchmark, 0.04, params)
    assert quality_report(mesh).counts["strip"] == 2 * mesh.nx * params.ny_strip


def test_default_resolution_follows_fastest_oscillation(benchmark):
    params = MeshParams()
    nx = default_nx(benchmark, 0.1, params)
    assert nx * benchmark.shortest_wavelength(0.1) / benchmark.length >= params.cells_per_period
    assert default_nx(benchmark, 0.1, MeshParams(nx=17)) == 17


def test_unit_square_quality():
    quality = quality_report(unit_square_mesh())
    assert quality.min_angle == pytest.approx(45.0)
    assert quality.max_aspect == pytest.approx(2.0)


@pytest.mark.parametrize("eps", [0.1, 0.04])
def test_benchmark_areas(benchmark, eps):
    mesh = generate_mesh(benchmark, eps)
    assert mesh_area(mesh) == pytest.approx(eps * 320.0, rel=1e-10)
    c = eps ** (1.0 / 3.0)
    exact_strip = eps ** (1.0 + 1.0 / 18.0) * (40.0 + c * (1.0 - np.cos(20.0 / c)))
    assert mesh_area(mesh, "strip") == pytest.approx(exact_strip, rel=1e-3)


def test_area_converges_second_order():
    spec = ThinDomainSpec(
        interval=(0.0, 3.7),
        lower=profile(0.0),
        upper=profile(1.0, ((0.5, 1.0, 0.0),)),
        strip=StripSpec(gamma=0.5, height_profile=profile(0.1)),
    )
    eps = 0.1
    exact = eps * (3.7 + 0.5 * (1.0 - np.cos(3.7)))
    errors = [abs(mesh_area(generate_mesh(spec, eps, MeshParams(nx=n, ny_bulk=2, ny_strip=1))) - exact) for n in (16, 32)]
    assert 3.7 <= errors[0] / errors[1] <= 4.3


def test_strip_outside_domain(make_constant_spec):
    with pytest.raises(MeshError):
        generate_mesh(make_constant_spec(), 1.0, MeshParams(nx=4))


def test_nonpositive_eps(make_constant_spec):
    with pytest.raises(DomainError):
        generate_mesh(make_constant_spec(), 0.0)


def test_write_read_round_trip(benchmark, small_params, tmp_path):
    mesh = generate_mesh(benchmark, 0.1, small_params)
    back = read_mesh(write_mesh(mesh, tmp_path / "mesh.txt"))
    np.testing.assert_array_equal(back.vertices, mesh.vertices)
    np.testing.assert_array_equal(back.triangles, mesh.triangles)
    np.testing.assert_array_equal(back.region, mesh.region)
    assert not back.has_lattice
    tags, counts = np.unique(back.boundary_tags, return_counts=True)
    assert dict(zip(tags, counts)) == {
        "bottom": mesh.nx,
        "left": mesh.ny,
        "right": mesh.ny,
        "top": mesh.nx,
    }


def test_read_rejects_bad_header(tmp_path):
    path = tmp_path / "broken.txt"
    path.write_text("points 3\n0 0\n")
    with pytest.raises(MeshError):
        read_mesh(path)


def test_read_rejects_truncated_file(benchmark, small_params, tmp_path):
    path = write_mesh(generate_mesh(benchmark, 0.1, small_params), tmp_path / "mesh.txt")
    path.write_text("\n".join(path.read_text().splitlines()[:-3]) + "\n")
    with pytest.raises(MeshError):
        read_mesh(path)


def test_locate_vertices_and_outside_points(benchmark, small_params):
    mesh = generate_mesh(benchmark, 0.1, small_params)
    x, y = mesh.vertices[::7, 0], mesh.vertices[::7, 1]
    tri, bary = locate_points(mesh, x, y)
    assert np.all(tri >= 0)
    assert np.all(bary >= -1e-9)
    corners = mesh.vertices[mesh.triangles[tri]]
    np.testing.assert_allclose(np.einsum("pk,pkd->pd", bary, corners), np.column_stack([x, y]), atol=1e-12)

    tri, bary = locate_points(mesh, np.array([5.0, -1.0]), np.array([2.0, 0.0]))
    assert np.all(tri == -1)
    assert np.all(np.isnan(bary))


def test_locate_needs_lattice(benchmark, small_params, tmp_path):
    back = read_mesh(write_mesh(generate_mesh(benchmark, 0.1, small_params), tmp_path / "mesh.txt"))
    with pytest.raises(MeshError):
        locate_points(back, 1.0, 0.0)
