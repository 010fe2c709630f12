import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st
from scipy import sparse

from src.thinhom.analysis.scripts.helpers.errors import ContractError, ConvergenceError, PartialSliceError
from src.thinhom.analysis.scripts.helpers.fem1d import Field1D, Grid1D, error_1d
from src.thinhom.analysis.scripts.helpers.fem2d import (
    CoefficientField,
    Field2D,
    NormKind,
    diff_with_1d,
    energy_identity,
    export_field_csv,
    norm,
    pcg,
    q_energy,
    raster,
    slice_extract,
    solve_problem,
    strip_load_norm,
    tensor_determinant,
)
from src.thinhom.analysis.scripts.helpers.geometry import Forcing
from src.thinhom.analysis.scripts.helpers.meshgen import MeshParams, generate_mesh

from builders import two_scale_spec, two_scale_specs

L2 = NormKind(kind="L2")
H1 = NormKind(kind="H1")
DY = NormKind(kind="seminorm_dy")


@pytest.fixture
def benchmark_mesh(benchmark):
    return generate_mesh(benchmark, 0.1, MeshParams(nx=200, ny_bulk=8, ny_strip=2))


@pytest.fixture
def unit_square(make_constant_spec):
    return generate_mesh(make_constant_spec(), 0.1, MeshParams(nx=8, ny_bulk=4, ny_strip=2), target="rectangle")


class TestSolver:
    def test_identity_converges_in_one_iteration(self):
        b = np.arange(1.0, 11.0)
        x, iterations = pcg(sparse.identity(10, format="csr"), b)
        np.testing.assert_allclose(x, b)
        assert iterations == 1

    def test_random_spd(self):
        rng = np.random.default_rng(7)
        M = rng.standard_normal((50, 50))
        A = M @ M.T + 50.0 * np.eye(50)
        b = rng.standard_normal(50)
        x, _ = pcg(A, b, rel_tol=1e-12)
        np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-8)

    def test_iteration_cap(self):
        rng = np.random.default_rng(7)
        M = rng.standard_normal((50, 50))
        A = M @ M.T + 50.0 * np.eye(50)
        with pytest.raises(ConvergenceError) as err:
            pcg(A, np.ones(50), rel_tol=1e-14, max_iter=1)
        assert err.value.iterations == 1
        assert err.value.residual > 1e-14

    def test_zero_load(self, benchmark, benchmark_mesh):
        field, system = solve_problem(benchmark_mesh, benchmark, Forcing(), 0.1)
        assert np.all(system.rhs == 0.0)
        assert np.all(field.values == 0.0)
        assert field.iterations == 0

    @pytest.mark.parametrize("variant", ["physical", "Q_full_B", "Q_simplified"])
    def test_bulk_constant_is_reproduced(self, benchmark, variant):
        target = "physical" if variant == "physical" else "rectangle"
        mesh = generate_mesh(benchmark, 0.1, MeshParams(nx=100, ny_bulk=6, ny_strip=2), target=target)
        forcing = Forcing(constant_term=2.5, mode="bulk")
        field, _ = solve_problem(mesh, benchmark, forcing, 0.1, variant=variant, rel_tol=1e-12)
        np.testing.assert_allclose(field.values, 2.5, atol=1e-6)

    def test_energy_identity(self, benchmark, benchmark_mesh, forcing):
        field, system = solve_problem(benchmark_mesh, benchmark, forcing, 0.1, rel_tol=1e-12)
        energy, work, mismatch = energy_identity(system, field)
        assert energy > 0
        assert mismatch <= 1e-8

    def test_nonnegative_load_gives_nonnegative_solution(self, benchmark, benchmark_mesh, forcing):
        field, _ = solve_problem(benchmark_mesh, benchmark, forcing, 0.1)
        assert field.values.min() >= -1e-8 * field.values.max()

    def test_variant_needs_matching_mesh(self, benchmark, benchmark_mesh, forcing):
        with pytest.raises(ContractError):
            solve_problem(benchmark_mesh, benchmark, forcing, 0.1, variant="Q_full_B")

    def test_unknown_variant(self, benchmark):
        with pytest.raises(ValueError):
            CoefficientField(variant="anisotropic", spec=benchmark, eps=0.1)


@settings(max_examples=10)
@given(spec=two_scale_specs(), eps=st.sampled_from([0.2, 0.1, 0.01]), seed=st.integers(0, 2**16))
def test_tensor_determinant(spec, eps, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(*spec.interval, 10_000)
    y = rng.uniform(0.0, 1.0, 10_000)
    for variant in ("Q_full_B", "Q_simplified"):
        det = tensor_determinant(CoefficientField(variant=variant, spec=spec, eps=eps), x, y)
        np.testing.assert_allclose(det * eps**2, 1.0, rtol=1e-12)


class TestNorms:
    def test_constant_field_on_benchmark(self, benchmark_mesh):
        ones = Field2D(benchmark_mesh, np.ones(benchmark_mesh.n_vertices))
        assert norm(ones, NormKind(kind="L2", rescaled=True), 0.1) == pytest.approx(np.sqrt(320.0), rel=1e-9)
        assert norm(ones, NormKind(kind="H1", rescaled=True), 0.1) == pytest.approx(np.sqrt(320.0), rel=1e-9)

    def test_zero_field(self, benchmark_mesh):
        zero = Field2D(benchmark_mesh, np.zeros(benchmark_mesh.n_vertices))
        assert norm(zero, H1, 0.1) == 0.0

    def test_linear_field_on_unit_square(self, unit_square):
        field = Field2D(unit_square, unit_square.vertices[:, 0].copy())
        assert norm(field, L2, 0.1) == pytest.approx(1.0 / np.sqrt(3.0), rel=1e-12)
        assert norm(field, H1, 0.1) == pytest.approx(np.sqrt(4.0 / 3.0), rel=1e-12)
        assert norm(field, DY, 0.1) == pytest.approx(0.0, abs=1e-12)

    def test_rescaling(self, unit_square):
        field = Field2D(unit_square, np.sin(unit_square.vertices[:, 0]))
        plain = norm(field, H1, 0.25)
        assert norm(field, NormKind(kind="H1", rescaled=True), 0.25) == pytest.approx(2.0 * plain)

    def test_difference_with_1d(self, unit_square):
        field = Field2D(unit_square, 3.0 + unit_square.vertices[:, 0])
        grid = Grid1D(unit_square.x_nodes)
        assert diff_with_1d(field, Field1D(grid, 3.0 + grid.nodes), H1, 0.1) == pytest.approx(0.0, abs=1e-12)
        assert diff_with_1d(field, lambda x: np.zeros_like(x), H1, 0.1) == pytest.approx(norm(field, H1, 0.1))

    def test_wrong_length(self, unit_square):
        with pytest.raises(ContractError):
            Field2D(unit_square, np.zeros(3))

    def test_strip_load_norm_constant(self, make_constant_spec):
        spec = make_constant_spec()
        mesh = generate_mesh(spec, 0.1, MeshParams(nx=8, ny_bulk=4, ny_strip=2))
        assert strip_load_norm(mesh, Forcing(constant_term=1.0), 0.1, 0.5) == pytest.approx(1.0, rel=1e-10)


class TestPostProcessing:
    def test_constant_slice(self, benchmark_mesh):
        field = Field2D(benchmark_mesh, np.full(benchmark_mesh.n_vertices, 4.0))
        sliced = slice_extract(field, 0.0, 101)
        np.testing.assert_allclose(sliced.values, 4.0)
        assert sliced.grid.n_nodes == 101

    def test_linear_slice(self, benchmark_mesh):
        field = Field2D(benchmark_mesh, benchmark_mesh.vertices[:, 0].copy())
        sliced = slice_extract(field, 0.2, 401)
        np.testing.assert_allclose(sliced.values, sliced.grid.nodes, atol=1e-12)

    def test_slice_leaving_the_domain(self, benchmark_mesh):
        field = Field2D(benchmark_mesh, np.ones(benchmark_mesh.n_vertices))
        with pytest.raises(PartialSliceError) as err:
            slice_extract(field, 0.95, 101)
        assert err.value.y == 0.95
        assert err.value.x_range[0] <= err.value.x_range[1]

    def test_raster_masks_outside(self, benchmark_mesh):
        field = Field2D(benchmark_mesh, np.ones(benchmark_mesh.n_vertices))
        table = raster(field, 50, 20)
        assert list(table.columns) == ["x", "y", "value"]
        assert len(table) == 1000
        assert table["value"].isna().any()
        np.testing.assert_allclose(table["value"].dropna(), 1.0)

    def test_export_round_trip(self, unit_square, tmp_path):
        field = Field2D(unit_square, np.sin(unit_square.vertices[:, 0]) / 3.0)
        table = pd.read_csv(export_field_csv(field, tmp_path / "field.csv"), float_precision="round_trip")
        np.testing.assert_array_equal(table["value"].to_numpy(), field.values)
        np.testing.assert_array_equal(table[["x", "y"]].to_numpy(), unit_square.vertices)

    @pytest.mark.slow
    def test_slices_align_as_eps_shrinks(self, benchmark, forcing):
        levels = (-0.2, 0.0, 0.2)
        spread = {}
        for eps in (0.2, 0.05):
            field, _ = solve_problem(generate_mesh(benchmark, eps), benchmark, forcing, eps)
            lines = [slice_extract(field, y, 1001) for y in levels]
            scale = error_1d(lines[1], Field1D(lines[1].grid, np.zeros(lines[1].grid.n_nodes)))
            spread[eps] = [
                error_1d(lines[i], lines[j]) / scale for i in range(len(levels)) for j in range(i + 1, len(levels))
            ]
        assert all(fine < coarse for fine, coarse in zip(spread[0.05], spread[0.2]))


@pytest.mark.slow
def test_shifted_solution_matches_transformed_solution(forcing):
    spec = two_scale_spec()
    eps = 0.1
    gaps = []
    for nx, ny_bulk, ny_strip in ((40, 4, 2), (80, 8, 4), (160, 16, 8)):
        params = MeshParams(nx=nx, ny_bulk=ny_bulk, ny_strip=ny_strip)
        shifted = generate_mesh(spec, eps, params, target="shifted")
        rectangle = generate_mesh(spec, eps, params, target="rectangle")
        v, _ = solve_problem(shifted, spec, forcing, eps, variant="shifted_Ra", rel_tol=1e-12)
        u, _ = solve_problem(rectangle, spec, forcing, eps, variant="Q_full_B", rel_tol=1e-12)
        np.testing.assert_array_equal(shifted.vertices[:, 0], rectangle.vertices[:, 0])
        gaps.append(q_energy(rectangle, v.values - u.values, eps))
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] <= 0.5 * gaps[0]
