"""Means of quasi-periodic functions and the homogenized coefficients.

Three averaging routes are offered: the exact mean of a trigonometric
polynomial (its constant term), tensor trapezoid quadrature over a period
cell of the torus a quasi-periodic function lifts to, and symmetric long
interval averages (1/2T) int_{-T}^{T} f for anything else.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .errors import DomainError, NumericError, UnsupportedError
from .geometry import BoundaryProfile, Forcing, ThinDomainSpec

logger = logging.getLogger(__name__)

Block = Literal["alpha", "beta"]

MAX_TORUS_DIMENSION = 4
MIN_TORUS_POINTS = 16
MAX_TORUS_SAMPLES = 2**28
# Gauss-Legendre order per panel; panels are half the shortest period long
PANEL_ORDER = 8
# frequency ratios p/q with q up to this bound and matching to RATIO_TOL count as commensurate
MAX_DENOMINATOR = 64
RATIO_TOL = 1e-10


class QPComponent(BaseModel):
    model_config = ConfigDict(frozen=True)

    coefficient: float
    frequency: float
    phase: float = 0.0
    block: Block = "alpha"


class QPFunction(BaseModel):
    """a0 + sum coefficient * sin(frequency * s + phase).

    Components carry a block tag separating frequencies that scale with
    eps^alpha from those scaling with eps^beta. Negative frequencies are
    flipped and duplicates within a block are merged on construction.
    """

    model_config = ConfigDict(frozen=True)

    constant_term: float = 0.0
    components: Tuple[QPComponent, ...] = ()

    @field_validator("components", mode="before")
    @classmethod
    def accept_tuples(cls, components):
        out = []
        for item in components or ():
            if isinstance(item, (tuple, list)):
                item = QPComponent(**dict(zip(("coefficient", "frequency", "phase", "block"), item)))
            out.append(item)
        return tuple(out)

    @model_validator(mode="after")
    def merge_frequencies(self):
        phasors = {}
        for c in self.components:
            if c.frequency == 0.0:
                raise ValueError("Frequencies should be nonzero, fold constants into constant_term")
            coefficient, frequency, phase = c.coefficient, c.frequency, c.phase
            if frequency < 0:
                coefficient, frequency, phase = -coefficient, -frequency, -phase
            key = (c.block, frequency)
            phasors[key] = phasors.get(key, 0.0) + coefficient * np.exp(1j * phase)
        scale = max([1.0, abs(self.constant_term)] + [abs(c.coefficient) for c in self.components])
        merged = tuple(
            QPComponent(coefficient=float(abs(p)), frequency=w, phase=float(np.angle(p)), block=block)
            for (block, w), p in sorted(phasors.items())
            if abs(p) > 1e-14 * scale
        )
        # frozen model, bypass __setattr__
        object.__setattr__(self, "components", merged)
        return self

    @classmethod
    def from_profile(cls, profile: BoundaryProfile, block: Block = "alpha") -> "QPFunction":
        return cls(
            constant_term=profile.constant_term,
            components=[
                QPComponent(coefficient=a, frequency=w, phase=phi, block=block)
                for a, w, phi in profile.components
                if a != 0.0 and w != 0.0
            ],
        )

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.full(s.shape, self.constant_term)
        for c in self.components:
            out = out + c.coefficient * np.sin(c.frequency * s + c.phase)
        return out

    def __add__(self, other: "QPFunction") -> "QPFunction":
        return QPFunction(
            constant_term=self.constant_term + other.constant_term,
            components=self.components + other.components,
        )

    def scaled(self, factor: float) -> "QPFunction":
        return QPFunction(
            constant_term=factor * self.constant_term,
            components=[c.model_copy(update={"coefficient": factor * c.coefficient}) for c in self.components],
        )

    @property
    def max_frequency(self) -> float:
        return max((c.frequency for c in self.components), default=0.0)

    @property
    def is_constant(self) -> bool:
        return not self.components


class TorusCell(BaseModel):
    model_config = ConfigDict(frozen=True)

    dimension: int
    periods: Tuple[float, ...]
    # highest harmonic per axis, multiplies the quadrature points along it
    harmonics: Tuple[int, ...] = ()

    @model_validator(mode="after")
    def check_periods(self):
        if len(self.periods) != self.dimension:
            raise ValueError(f"Expected {self.dimension} periods, got {len(self.periods)}")
        if any(not L > 0 for L in self.periods):
            raise ValueError(f"Periods should be positive, got {self.periods}")
        if not self.harmonics:
            object.__setattr__(self, "harmonics", (1,) * self.dimension)
        if len(self.harmonics) != self.dimension or any(n < 1 for n in self.harmonics):
            raise ValueError(f"Expected {self.dimension} harmonics of at least 1, got {self.harmonics}")
        return self

    @property
    def volume(self) -> float:
        return float(np.prod(self.periods))


class MeanOptions(BaseModel):
    """Controls for the reciprocal thickness mean (the [global.means] table)."""

    model_config = ConfigDict(frozen=True)

    t_grid: Tuple[float, ...] = (1e2, 1e3, 1e4)
    torus_points: int = 64
    independent: bool = False

    @field_validator("t_grid")
    @classmethod
    def check_t_grid(cls, t_grid):
        if not t_grid or any(t <= 0 for t in t_grid) or any(np.diff(t_grid) <= 0):
            raise ValueError(f"t_grid should be positive and increasing, got {t_grid}")
        return t_grid

    @field_validator("torus_points")
    @classmethod
    def check_points(cls, n):
        if n < MIN_TORUS_POINTS:
            raise ValueError(f"torus_points should be at least {MIN_TORUS_POINTS}")
        return n


@dataclass(frozen=True)
class HomogenizedCoefficients:
    K1: float
    K2: float
    P: float
    q: float
    muH: float
    p_method: str
    forcing: Forcing

    def f0(self, x):
        """Weak limit of the concentrated load, mu(H) f(x) (or (K1+K2) f(x) for a bulk load)."""
        fx = self.forcing.profile.value(np.asarray(x, dtype=float))
        if self.forcing.mode == "bulk":
            return (self.K1 + self.K2) * fx
        return self.muH * fx

    def fhat(self, x):
        return self.f0(x) / (self.K1 + self.K2)


def mean_trig(f: QPFunction) -> float:
    return f.constant_term


def _gauss_mean(f: Callable, T: float, panel: float) -> float:
    n_panels = max(1, int(np.ceil(2.0 * T / panel)))
    nodes, weights = np.polynomial.legendre.leggauss(PANEL_ORDER)
    edges = np.linspace(-T, T, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    s = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    values = np.asarray(f(s), dtype=float)
    if not np.all(np.isfinite(values)):
        raise NumericError(f"Non-finite samples while averaging over [-{T}, {T}]")
    integral = np.sum((half[:, None] * weights[None, :]).ravel() * values)
    return float(integral / (2.0 * T))


def mean_long_interval(
    f: Callable, T_grid: Sequence[float], shortest_period: float = 2.0 * np.pi
) -> Tuple[float, List[float]]:
    """Symmetric long-interval average (1/2T) int_{-T}^{T} f.

    Args:
        f: vectorised function of one real variable
        T_grid: increasing positive half-widths
        shortest_period: shortest apparent period of f, sets the panel size

    Returns:
        the estimate at the largest T and the estimates along T_grid
    """
    T_grid = [float(T) for T in T_grid]
    if not T_grid or T_grid[0] <= 0 or any(np.diff(T_grid) <= 0):
        raise DomainError(f"T_grid should be positive and increasing, got {T_grid}")
    if not shortest_period > 0:
        raise DomainError(f"shortest_period should be positive, got {shortest_period}")
    panel = 0.5 * shortest_period
    tail = [_gauss_mean(f, T, panel) for T in T_grid]
    return tail[-1], tail


def besicovitch_norm(
    f: Callable, T_grid: Sequence[float], shortest_period: float = 2.0 * np.pi
) -> Tuple[float, List[float]]:
    """Mean-square norm sqrt(mean |f|^2), with its tail along T_grid."""
    _, tail = mean_long_interval(lambda s: np.abs(f(s)) ** 2, T_grid, shortest_period)
    tail = [float(np.sqrt(v)) for v in tail]
    return tail[-1], tail


def mean_torus(F: Callable, cell: TorusCell, n_points: int = 64) -> float:
    """Average of F over the cell by the tensor trapezoid rule.

    F receives one broadcastable coordinate array per axis. An axis gets
    n_points samples per harmonic of the cell. The first axis is processed
    slab by slab and slab means are combined with numpy's pairwise
    summation.
    """
    if cell.dimension > MAX_TORUS_DIMENSION:
        raise UnsupportedError(
            f"Torus dimension {cell.dimension} exceeds {MAX_TORUS_DIMENSION}, use mean_long_interval"
        )
    if n_points < MIN_TORUS_POINTS:
        raise DomainError(f"n_points should be at least {MIN_TORUS_POINTS}, got {n_points}")
    counts = [n_points * n for n in cell.harmonics]
    if np.prod(counts, dtype=float) > MAX_TORUS_SAMPLES:
        raise UnsupportedError(f"Torus grid {counts} exceeds {MAX_TORUS_SAMPLES} samples, use mean_long_interval")
    axes = [L * np.arange(m) / m for L, m in zip(cell.periods, counts)]
    if cell.dimension == 1:
        values = np.asarray(F(axes[0]), dtype=float)
        if not np.all(np.isfinite(values)):
            raise NumericError("Non-finite samples in torus quadrature")
        return float(np.mean(np.broadcast_to(values, axes[0].shape)))

    inner = np.meshgrid(*axes[1:], indexing="ij", sparse=True)
    slab_means = np.empty(counts[0])
    for k, t0 in enumerate(axes[0]):
        values = np.broadcast_to(np.asarray(F(t0, *inner), dtype=float), tuple(counts[1:]))
        if not np.all(np.isfinite(values)):
            raise NumericError("Non-finite samples in torus quadrature")
        slab_means[k] = np.mean(values)
    return float(np.mean(slab_means))


@dataclass(frozen=True)
class Family:
    """Components of one block whose frequencies are harmonics of base_frequency."""

    base_frequency: float
    components: Tuple[QPComponent, ...]
    harmonics: Tuple[int, ...]

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.base_frequency


def _rational_ratio(ratio: float) -> Optional[Fraction]:
    approx = Fraction(ratio).limit_denominator(MAX_DENOMINATOR)
    if abs(ratio - float(approx)) <= RATIO_TOL * ratio:
        return approx
    return None


def commensurate_families(f: QPFunction) -> List[Family]:
    """Group the components of each block into families of commensurate frequencies.

    A component joins the first family of its block whose lowest frequency
    it is a rational multiple of. Frequencies of one family are integer
    multiples of its base frequency; different families and different
    blocks are treated as independent.
    """
    groups: List[List[Tuple[QPComponent, Fraction]]] = []
    for c in f.components:
        for group in groups:
            lead = group[0][0]
            if lead.block != c.block:
                continue
            ratio = _rational_ratio(c.frequency / lead.frequency)
            if ratio is not None:
                group.append((c, ratio))
                break
        else:
            groups.append([(c, Fraction(1))])

    families = []
    for group in groups:
        denominator = lcm(*(ratio.denominator for _, ratio in group))
        multiples = [ratio.numerator * (denominator // ratio.denominator) for _, ratio in group]
        common = gcd(*multiples)
        families.append(
            Family(
                base_frequency=group[0][0].frequency * common / denominator,
                components=tuple(c for c, _ in group),
                harmonics=tuple(m // common for m in multiples),
            )
        )
    return families


def torus_lift(f: QPFunction) -> Tuple[Callable, TorusCell]:
    """Lift f to the torus, one axis per commensurate family of frequencies.

    The axis of a family has the period of its base frequency, so a
    periodic profile with harmonics stays on a single axis. The trace
    F(s, ..., s) equals f(s).
    """
    if f.is_constant:
        return (lambda *t: np.full(np.broadcast(*t).shape, f.constant_term)), TorusCell(
            dimension=1, periods=(2.0 * np.pi,)
        )
    families = commensurate_families(f)

    def lifted(*theta):
        out = f.constant_term
        for family, t in zip(families, theta):
            for c, n in zip(family.components, family.harmonics):
                out = out + c.coefficient * np.sin(n * family.base_frequency * t + c.phase)
        return out

    cell = TorusCell(
        dimension=len(families),
        periods=tuple(family.period for family in families),
        harmonics=tuple(max(family.harmonics) for family in families),
    )
    return lifted, cell


def reciprocal_mean(spec: ThinDomainSpec, options: Optional[MeanOptions] = None) -> Tuple[float, str]:
    """Mean of 1/K for the profiles of spec.

    Constant thickness gives the exact reciprocal. Different scale
    exponents lift g and h to separate torus axes, each profile on as many
    axes as it has commensurate frequency families. Equal exponents use
    the torus only when the families are declared independent, otherwise
    the long-interval mean of 1/(g + h).

    Returns:
        the mean and the name of the method used
    """
    options = options or MeanOptions()
    if spec.K0 <= 0:
        raise DomainError(f"Thickness lower bound {spec.K0} is not positive, mean of 1/K undefined")
    if spec.constant_thickness:
        K = spec.lower.base.constant_term + spec.upper.base.constant_term
        return 1.0 / K, "exact"

    g = QPFunction.from_profile(spec.lower.base, "alpha")
    if spec.lower.scale_exponent != spec.upper.scale_exponent:
        K = g + QPFunction.from_profile(spec.upper.base, "beta")
        lifted, cell = torus_lift(K)
        if cell.dimension > MAX_TORUS_DIMENSION:
            raise UnsupportedError(
                f"{cell.dimension} independent frequency families over two scales cannot be averaged "
                f"on a torus of dimension at most {MAX_TORUS_DIMENSION}"
            )
        return mean_torus(lambda *t: 1.0 / lifted(*t), cell, options.torus_points), "torus"

    K = g + QPFunction.from_profile(spec.upper.base, "alpha")
    if options.independent:
        lifted, cell = torus_lift(K)
        if cell.dimension <= MAX_TORUS_DIMENSION:
            return mean_torus(lambda *t: 1.0 / lifted(*t), cell, options.torus_points), "torus"

    estimate, tail = mean_long_interval(lambda s: 1.0 / K(s), options.t_grid, 2.0 * np.pi / K.max_frequency)
    logger.debug(f"Long-interval mean of 1/K along T grid: {tail}")
    return estimate, "long_interval"


def homogenized_coefficients(
    spec: ThinDomainSpec, forcing: Forcing, options: Optional[MeanOptions] = None
) -> HomogenizedCoefficients:
    """Limit constants K1, K2, P, q and mu(H), together with the limit load.

    A y-dependent part of the forcing is dropped: the strip collapses onto
    y = 0 and the term vanishes in the limit.
    """
    if spec.K0 <= 0:
        raise DomainError(f"Thickness lower bound {spec.K0} is not positive, P undefined")
    K1 = mean_trig(QPFunction.from_profile(spec.lower.base))
    K2 = mean_trig(QPFunction.from_profile(spec.upper.base))
    if not K1 + K2 > 0:
        raise DomainError(f"Mean thickness {K1 + K2} is not positive")
    P, method = reciprocal_mean(spec, options)
    q = 1.0 / (P * (K1 + K2))
    muH = mean_trig(QPFunction.from_profile(spec.strip.height_profile.base))
    logger.info(f"Homogenized coefficients K1={K1:.6g} K2={K2:.6g} P={P:.10g} ({method}) q={q:.10g} mu(H)={muH:.6g}")
    return HomogenizedCoefficients(K1=K1, K2=K2, P=P, q=q, muH=muH, p_method=method, forcing=forcing)
