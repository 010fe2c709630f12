import datetime as dt
import os
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator
from pydantic.functional_validators import field_validator

from .helpers.geometry import BoundaryProfile, Forcing, ScaledProfile, StripSpec, ThinDomainSpec
from .helpers.meshgen import MeshParams
from .helpers.qmean import MeanOptions
from .helpers.utilities import eps_label

STAGES = ("mesh", "solve2d", "reduced", "limit", "study", "chain", "means")


class ProfileConfig(BaseModel):
    constant_term: float = 0.0
    components: List[Tuple[float, ...]] = []
    scale_exponent: float = 0.0

    def to_profile(self) -> ScaledProfile:
        return ScaledProfile(
            base=BoundaryProfile(constant_term=self.constant_term, components=self.components),
            scale_exponent=self.scale_exponent,
        )


class StripConfig(BaseModel):
    gamma: float = 1.0 / 18.0
    height: ProfileConfig = ProfileConfig(constant_term=2.0, components=[(1.0, 1.0, 0.0)], scale_exponent=1.0 / 3.0)


class DomainConfig(BaseModel):
    interval: Tuple[float, float] = (0.0, 20.0)
    lower: ProfileConfig = ProfileConfig(constant_term=0.5)
    upper: ProfileConfig = ProfileConfig(constant_term=0.5)
    strip: StripConfig = StripConfig()

    def to_spec(self) -> ThinDomainSpec:
        return ThinDomainSpec(
            interval=self.interval,
            lower=self.lower.to_profile(),
            upper=self.upper.to_profile(),
            strip=StripSpec(gamma=self.strip.gamma, height_profile=self.strip.height.to_profile()),
        )


class StudyConfig(BaseModel):
    """Validated contents of the [global] table of a study configuration."""

    stages: List[str] = []
    eps: List[float] = [0.1, 0.08, 0.04]
    output_folder: str = "output"
    output_suffix: str = "timestamp"
    tol: float = 1e-10
    max_iter: int = 20000
    grid1d: int = Field(default=4096, ge=2)
    n_workers: int = Field(default=1, ge=1)
    n_quad_y: int = Field(default=4, ge=2)
    slices: List[float] = [-0.2, 0.0, 0.2]
    slice_samples: int = Field(default=1001, ge=2)
    raster: Tuple[int, int] = (400, 60)
    study_chain: bool = False
    reference_errors: Optional[List[float]] = None
    domain: DomainConfig = DomainConfig()
    forcing: Forcing = Forcing(constant_term=1.0)
    mesh: MeshParams = MeshParams()
    means: MeanOptions = MeanOptions()

    @field_validator("stages")
    @classmethod
    def check_stages(cls, stages: List[str]):
        unknown = [s for s in stages if s not in STAGES]
        if unknown:
            raise ValueError(f"Unknown stages {unknown}, choose from {STAGES}")
        return stages

    @field_validator("eps")
    @classmethod
    def check_eps(cls, eps: List[float]):
        if not eps:
            raise ValueError("At least one eps value is needed")
        if any(e <= 0 for e in eps):
            raise ValueError(f"eps values {eps} should be positive")
        if any(a <= b for a, b in zip(eps, eps[1:])):
            raise ValueError(f"eps values {eps} should be strictly decreasing")
        return eps

    @field_validator("tol")
    @classmethod
    def check_tolerance(cls, value: float):
        if not 0 < value < 1:
            raise ValueError(f"Tolerance {value} should lie in (0, 1)")
        return value

    @field_validator("max_iter")
    @classmethod
    def check_positive(cls, value: int):
        if value < 1:
            raise ValueError(f"Value {value} should be positive")
        return value

    @field_validator("raster")
    @classmethod
    def check_raster(cls, raster: Tuple[int, int]):
        if min(raster) < 2:
            raise ValueError(f"Raster {raster} needs at least 2 points per axis")
        return raster

    @field_validator("output_folder")
    @classmethod
    def normalise_dir(cls, name: str):
        return os.path.normpath(name)

    @field_validator("output_suffix")
    @classmethod
    def make_output(cls, suffix: str):
        match suffix:
            case "timestamp":
                return dt.datetime.now().strftime("%Y%m%d_%H%M")
            case _:
                return suffix

    @model_validator(mode="after")
    def check_domain(self):
        spec = self.domain.to_spec()
        for eps in self.eps:
            if not spec.strip_inside(eps):
                raise ValueError(f"Strip is not contained in the domain at eps={eps}")
        if self.reference_errors is not None and len(self.reference_errors) != len(self.eps):
            raise ValueError(f"{len(self.reference_errors)} reference errors for {len(self.eps)} eps values")
        return self

    def spec(self) -> ThinDomainSpec:
        return self.domain.to_spec()

    @property
    def run_dir(self) -> Path:
        if self.output_suffix:
            return Path(self.output_folder) / f"run_{self.output_suffix}"
        return Path(self.output_folder)

    def output_path(self, filetype: str, eps: Optional[float] = None) -> Path:
        match filetype:
            case "mesh" | "field" | "slices" | "raster":
                suffix = "txt" if filetype == "mesh" else "csv"
                return self.run_dir / eps_label(eps) / f"{filetype}.{suffix}"
            case "reduced_field" | "limit_field":
                if eps is None:
                    return self.run_dir / f"{filetype}.csv"
                return self.run_dir / eps_label(eps) / f"{filetype}.csv"
            case "mesh_table" | "solve2d" | "reduced" | "study" | "chain" | "means":
                name = "mesh" if filetype == "mesh_table" else filetype
                return self.run_dir / f"{name}.csv"
            case "study_summary" | "solve2d_summary" | "chain_summary" | "means_summary":
                return self.run_dir / f"{filetype.removesuffix('_summary')}.json"
            case "limit":
                return self.run_dir / "limit.json"
            case _:
                raise ValueError(f"Unknown output type {filetype}")
