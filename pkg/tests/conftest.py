import pytest

from src.thinhom.analysis.scripts.helpers.geometry import Forcing, benchmark_forcing, benchmark_spec
from src.thinhom.analysis.scripts.helpers.meshgen import MeshParams
from src.thinhom.analysis.scripts.settings import StudyConfig

from builders import constant_spec, profile


@pytest.fixture
def benchmark():
    return benchmark_spec()


@pytest.fixture
def forcing():
    return benchmark_forcing()


@pytest.fixture
def make_constant_spec():
    return constant_spec


@pytest.fixture
def make_profile():
    return profile


@pytest.fixture
def small_params():
    return MeshParams(nx=32, ny_bulk=4, ny_strip=2)


@pytest.fixture
def small_config(tmp_path):
    """Constant unit-thickness domain on (0, 2), cheap enough for harness tests."""

    def build(**updates):
        options = dict(
            stages=[],
            eps=[0.2, 0.1],
            output_folder=str(tmp_path),
            output_suffix="",
            grid1d=257,
            slice_samples=101,
            raster=(40, 10),
            domain=dict(
                interval=(0.0, 2.0),
                lower=dict(constant_term=0.5),
                upper=dict(constant_term=0.5),
                strip=dict(gamma=0.5, height=dict(constant_term=1.0)),
            ),
            forcing=Forcing(constant_term=1.0, components=((1.0, 1.0, 0.0),)),
            mesh=MeshParams(nx=40, ny_bulk=4, ny_strip=2),
        )
        options.update(updates)
        return StudyConfig(**options)

    return build
