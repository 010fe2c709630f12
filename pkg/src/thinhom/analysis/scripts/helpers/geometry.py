"""Oscillating boundary profiles, thin domains and their coordinate maps.

The thin domain is

    R^eps = {(x, y) : x in I, -eps k1_eps(x) < y < eps k2_eps(x)}

with profiles k_eps(x) = p(x / eps^s) built from finite trigonometric
polynomials p(s) = a0 + sum_k a_k sin(w_k s + phi_k). The forcing acts in the
strip of depth eps^(1+gamma) H_eps(x) directly below the upper boundary.

All models are frozen pydantic models; every function here is pure and
vectorised over numpy arrays of coordinates.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.integrate import trapezoid

from .errors import DomainError

ArrayLike = Union[float, np.ndarray]
Direction = Literal["forward", "inverse"]


def _check_eps(eps: float):
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")


def _as_output(values: np.ndarray, like) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(values)
    return values


def _pad_components(components) -> Tuple[Tuple[float, float, float], ...]:
    # [amplitude, frequency] is shorthand for a zero phase
    padded = []
    for item in components or ():
        item = tuple(float(v) for v in item)
        if len(item) == 2:
            item = item + (0.0,)
        if len(item) != 3:
            raise ValueError(f"Component {item} should be (amplitude, frequency[, phase])")
        padded.append(item)
    return tuple(padded)


class BoundaryProfile(BaseModel):
    """Trigonometric polynomial a0 + sum amplitude * sin(frequency * s + phase)."""

    model_config = ConfigDict(frozen=True)

    constant_term: float = 0.0
    components: Tuple[Tuple[float, float, float], ...] = ()

    @field_validator("components", mode="before")
    @classmethod
    def pad_phase(cls, components):
        return _pad_components(components)

    def value(self, s: ArrayLike) -> ArrayLike:
        s_arr = np.asarray(s, dtype=float)
        out = np.full(s_arr.shape, self.constant_term, dtype=float)
        for amplitude, frequency, phase in self.components:
            out = out + amplitude * np.sin(frequency * s_arr + phase)
        return _as_output(out, s)

    def derivative(self, s: ArrayLike) -> ArrayLike:
        s_arr = np.asarray(s, dtype=float)
        out = np.zeros(s_arr.shape, dtype=float)
        for amplitude, frequency, phase in self.components:
            out = out + amplitude * frequency * np.cos(frequency * s_arr + phase)
        return _as_output(out, s)

    @property
    def lower_bound(self) -> float:
        return self.constant_term - sum(abs(a) for a, _, _ in self.components)

    @property
    def upper_bound(self) -> float:
        return self.constant_term + sum(abs(a) for a, _, _ in self.components)

    @property
    def derivative_bound(self) -> float:
        return sum(abs(a * w) for a, w, _ in self.components)

    @property
    def mean(self) -> float:
        return self.constant_term

    @property
    def is_constant(self) -> bool:
        return all(a == 0.0 or w == 0.0 for a, w, _ in self.components)

    @property
    def max_frequency(self) -> float:
        return max((abs(w) for a, w, _ in self.components if a != 0.0), default=0.0)


class ScaledProfile(BaseModel):
    """k_eps(x) = base(x / eps^scale_exponent)."""

    model_config = ConfigDict(frozen=True)

    base: BoundaryProfile
    scale_exponent: float = 0.0

    @field_validator("scale_exponent")
    @classmethod
    def check_weak_oscillation(cls, value: float):
        if not 0.0 <= value < 1.0:
            raise ValueError(f"Scale exponent {value} should lie in [0, 1)")
        return value

    def value(self, x: ArrayLike, eps: float) -> ArrayLike:
        _check_eps(eps)
        out = self.base.value(np.asarray(x, dtype=float) / eps**self.scale_exponent)
        return _as_output(out, x)

    def derivative(self, x: ArrayLike, eps: float) -> ArrayLike:
        _check_eps(eps)
        scale = eps**self.scale_exponent
        out = self.base.derivative(np.asarray(x, dtype=float) / scale) / scale
        return _as_output(out, x)

    def eta_bound(self, eps: float) -> float:
        """Analytic bound of sup |eps * d/dx k_eps|."""
        _check_eps(eps)
        return eps ** (1.0 - self.scale_exponent) * self.base.derivative_bound

    def shortest_wavelength(self, eps: float) -> float:
        """Physical wavelength of the fastest component at this eps (inf if constant)."""
        _check_eps(eps)
        if self.base.max_frequency == 0.0:
            return float("inf")
        return 2.0 * np.pi * eps**self.scale_exponent / self.base.max_frequency


class StripSpec(BaseModel):
    """Concentration exponent gamma and strip height H_eps."""

    model_config = ConfigDict(frozen=True)

    gamma: float
    height_profile: ScaledProfile

    @field_validator("gamma")
    @classmethod
    def check_positive(cls, value: float):
        if not value > 0:
            raise ValueError(f"Concentration exponent {value} should be positive")
        return value

    @property
    def H0(self) -> float:
        return self.height_profile.base.lower_bound

    @property
    def H1(self) -> float:
        return self.height_profile.base.upper_bound


class ThinDomainSpec(BaseModel):
    """Interval, lower profile k1, upper profile k2 and strip."""

    model_config = ConfigDict(frozen=True)

    interval: Tuple[float, float]
    lower: ScaledProfile
    upper: ScaledProfile
    strip: StripSpec

    @field_validator("interval")
    @classmethod
    def check_interval(cls, interval: Tuple[float, float]):
        if not interval[0] < interval[1]:
            raise ValueError(f"Interval start {interval[0]} should be smaller than its end {interval[1]}")
        return interval

    @model_validator(mode="after")
    def check_bounds(self):
        if not self.upper.base.lower_bound > 0:
            raise ValueError(f"Upper profile lower bound {self.upper.base.lower_bound} should be positive")
        if self.lower.base.lower_bound < 0:
            raise ValueError(f"Lower profile lower bound {self.lower.base.lower_bound} should be non-negative")
        if self.strip.H0 < 0:
            raise ValueError(f"Strip height lower bound {self.strip.H0} should be non-negative")
        return self

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]

    @property
    def K0(self) -> float:
        """Lower bound of the thickness K_eps, uniform in eps."""
        return self.lower.base.lower_bound + self.upper.base.lower_bound

    @property
    def K1(self) -> float:
        return self.lower.base.upper_bound + self.upper.base.upper_bound

    @property
    def constant_thickness(self) -> bool:
        """True when K_eps does not depend on x for any eps."""
        if self.lower.base.is_constant and self.upper.base.is_constant:
            return True
        if self.lower.scale_exponent != self.upper.scale_exponent:
            return False
        phasors: Dict[float, complex] = {}
        for profile in (self.lower.base, self.upper.base):
            for a, w, phi in profile.components:
                if w < 0:
                    a, w, phi = -a, -w, -phi
                phasors[w] = phasors.get(w, 0.0) + a * np.exp(1j * phi)
        scale = max(1.0, abs(self.lower.base.constant_term) + abs(self.upper.base.constant_term))
        return all(abs(p) <= 1e-14 * scale or w == 0.0 for w, p in phasors.items())

    def shortest_wavelength(self, eps: float) -> float:
        return min(
            self.lower.shortest_wavelength(eps),
            self.upper.shortest_wavelength(eps),
            self.strip.height_profile.shortest_wavelength(eps),
        )

    def strip_inside(self, eps: float, n_samples: int = 4096) -> bool:
        """Whether eps^(1+gamma) H_eps < eps K_eps on the whole interval."""
        _check_eps(eps)
        if eps**self.strip.gamma * self.strip.H1 < self.K0:
            return True
        x = np.linspace(*self.interval, n_samples)
        return bool(np.all(strip_depth(self, x, eps) < eps * thickness(self, x, eps)))


class Forcing(BaseModel):
    """Load f(x, y) = f_x(x) + y_coefficient * y.

    In "strip" mode the load is eps^-gamma chi_theta f; "bulk" mode spreads
    f over the whole domain without amplification (manufactured checks).
    """

    model_config = ConfigDict(frozen=True)

    constant_term: float = 0.0
    components: Tuple[Tuple[float, float, float], ...] = ()
    y_coefficient: float = 0.0
    mode: Literal["strip", "bulk"] = "strip"

    @field_validator("components", mode="before")
    @classmethod
    def pad_phase(cls, components):
        return _pad_components(components)

    @property
    def profile(self) -> BoundaryProfile:
        """The x-dependent part f_x as a profile."""
        return BoundaryProfile(constant_term=self.constant_term, components=self.components)

    def __call__(self, x: ArrayLike, y: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.profile.value(x) + self.y_coefficient * y


@dataclass(frozen=True)
class HypothesisReport:
    eps: float
    eta1: float
    eta2: float
    eta: float
    eta1_bound: float
    eta2_bound: float
    bounds_ok: Dict[str, bool] = field(default_factory=dict)
    sampled_means: Dict[str, float] = field(default_factory=dict)


def eval_profile(p: ScaledProfile, x: ArrayLike, eps: float, derivative: bool = False) -> ArrayLike:
    """Evaluate k_eps(x) = base(x / eps^s), or its x-derivative."""
    _check_eps(eps)
    if derivative:
        return p.derivative(x, eps)
    return p.value(x, eps)


def thickness(spec: ThinDomainSpec, x: ArrayLike, eps: float, derivative: bool = False) -> ArrayLike:
    """K_eps(x) = k1_eps(x) + k2_eps(x), or dK_eps/dx."""
    return eval_profile(spec.lower, x, eps, derivative) + eval_profile(spec.upper, x, eps, derivative)


def domain_bounds(spec: ThinDomainSpec, x: ArrayLike, eps: float) -> Tuple[ArrayLike, ArrayLike]:
    """Lower and upper boundary (-eps k1_eps, eps k2_eps) of R^eps."""
    return -eps * eval_profile(spec.lower, x, eps), eps * eval_profile(spec.upper, x, eps)


def strip_depth(spec: ThinDomainSpec, x: ArrayLike, eps: float) -> ArrayLike:
    """eps^(1+gamma) H_eps(x)."""
    return eps ** (1.0 + spec.strip.gamma) * eval_profile(spec.strip.height_profile, x, eps)


def strip_bounds(spec: ThinDomainSpec, x: ArrayLike, eps: float) -> Tuple[ArrayLike, ArrayLike]:
    """Lower and upper face of the strip theta^eps in physical coordinates."""
    top = eps * eval_profile(spec.upper, x, eps)
    return top - strip_depth(spec, x, eps), top


def strip_fraction(spec: ThinDomainSpec, x: ArrayLike, eps: float) -> ArrayLike:
    """Relative strip depth eps^gamma H_eps / K_eps, the strip of Q is (1 - fraction, 1)."""
    return strip_depth(spec, x, eps) / (eps * thickness(spec, x, eps))


def in_strip(spec: ThinDomainSpec, x: ArrayLike, y: ArrayLike, eps: float) -> Union[bool, np.ndarray]:
    """Membership in theta^eps, open at both faces."""
    _check_eps(eps)
    lower_face, upper_face = strip_bounds(spec, x, eps)
    y_arr = np.asarray(y, dtype=float)
    inside = (lower_face < y_arr) & (y_arr < upper_face)
    if np.ndim(inside) == 0:
        return bool(inside)
    return inside


def map_L(
    spec: ThinDomainSpec, x: ArrayLike, y: ArrayLike, eps: float, direction: Direction = "forward"
) -> Tuple[ArrayLike, ArrayLike]:
    """L^eps: R_a^eps -> R^eps, (x, y) -> (x, y - eps k1_eps(x)); inverse adds the shift."""
    shift = eps * eval_profile(spec.lower, x, eps)
    match direction:
        case "forward":
            return x, y - shift
        case "inverse":
            return x, y + shift
        case _:
            raise ValueError(f"Unknown direction {direction}")


def map_S(
    spec: ThinDomainSpec, x: ArrayLike, y: ArrayLike, eps: float, direction: Direction = "forward"
) -> Tuple[ArrayLike, ArrayLike]:
    """S^eps: Q -> R_a^eps, (x, y) -> (x, y eps K_eps(x)); inverse divides."""
    _check_eps(eps)
    height = eps * thickness(spec, x, eps)
    match direction:
        case "forward":
            return x, y * height
        case "inverse":
            return x, y / height
        case _:
            raise ValueError(f"Unknown direction {direction}")


def jacobian_determinant(
    mapping: Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]],
    x: ArrayLike,
    y: ArrayLike,
    step: float = 1e-6,
) -> np.ndarray:
    """Determinant of the Jacobian of a planar map by central differences."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xp, yp = mapping(x + step, y)
    xm, ym = mapping(x - step, y)
    dX_dx, dY_dx = (np.asarray(xp) - xm) / (2 * step), (np.asarray(yp) - ym) / (2 * step)
    xp, yp = mapping(x, y + step)
    xm, ym = mapping(x, y - step)
    dX_dy, dY_dy = (np.asarray(xp) - xm) / (2 * step), (np.asarray(yp) - ym) / (2 * step)
    return dX_dx * dY_dy - dX_dy * dY_dx


def eta_sup(
    spec: ThinDomainSpec,
    eps: float,
    n_samples: int = 4096,
    eps_grid: Optional[Sequence[float]] = None,
) -> HypothesisReport:
    """Sampled and analytic estimates of eta^i(eps) = sup |eps d/dx k^i_eps|.

    H.1 passes when the analytic bounds vanish as eps -> 0 (scale exponents
    below one, and non-increasing along ``eps_grid`` when given). H.2 passes
    when k1 >= 0, k2 > 0 and K > 0 hold uniformly. The sampled means of k1,
    k2 and 1/K over I are weak-limit surrogates for H.3 and H.4.
    """
    _check_eps(eps)
    if n_samples < 2:
        raise DomainError(f"n_samples should be at least 2, got {n_samples}")
    x = np.linspace(*spec.interval, n_samples)

    eta1 = float(np.max(np.abs(eps * eval_profile(spec.lower, x, eps, derivative=True))))
    eta2 = float(np.max(np.abs(eps * eval_profile(spec.upper, x, eps, derivative=True))))

    vanishing = all(p.scale_exponent < 1.0 or p.base.derivative_bound == 0.0 for p in (spec.lower, spec.upper))
    if eps_grid is not None and len(eps_grid) > 1:
        ordered = sorted(eps_grid, reverse=True)
        for profile in (spec.lower, spec.upper):
            bounds = np.array([profile.eta_bound(e) for e in ordered])
            vanishing &= bool(np.all(np.diff(bounds) <= 0.0))

    positive = (
        spec.lower.base.lower_bound >= 0.0
        and spec.upper.base.lower_bound > 0.0
        and spec.lower.base.lower_bound + spec.upper.base.lower_bound > 0.0
    )

    k1 = np.asarray(eval_profile(spec.lower, x, eps))
    k2 = np.asarray(eval_profile(spec.upper, x, eps))
    K = k1 + k2
    with np.errstate(divide="ignore"):
        inv_K = np.where(K > 0, 1.0 / np.where(K > 0, K, 1.0), np.inf)
    sampled_means = {
        "k1": float(trapezoid(k1, x) / spec.length),
        "k2": float(trapezoid(k2, x) / spec.length),
        "1/K": float(trapezoid(inv_K, x) / spec.length),
    }

    return HypothesisReport(
        eps=eps,
        eta1=eta1,
        eta2=eta2,
        eta=eta1 + eta2,
        eta1_bound=spec.lower.eta_bound(eps),
        eta2_bound=spec.upper.eta_bound(eps),
        bounds_ok={"H.1": bool(vanishing), "H.2": bool(positive)},
        sampled_means=sampled_means,
    )


def benchmark_spec() -> ThinDomainSpec:
    """Quasi-periodic strip example on I = (0, 20).

    k1 = 8 - sin(s) - sin(pi s / 8), k2 = 8 + sin(s) + sin(pi s / 8) at scale
    eps^(1/5), H = 2 + sin(s) at scale eps^(1/3), gamma = 1/18.
    """
    oscillation = ((1.0, 1.0, 0.0), (1.0, np.pi / 8.0, 0.0))
    return ThinDomainSpec(
        interval=(0.0, 20.0),
        lower=ScaledProfile(
            base=BoundaryProfile(constant_term=8.0, components=tuple((-a, w, p) for a, w, p in oscillation)),
            scale_exponent=1.0 / 5.0,
        ),
        upper=ScaledProfile(
            base=BoundaryProfile(constant_term=8.0, components=oscillation),
            scale_exponent=1.0 / 5.0,
        ),
        strip=StripSpec(
            gamma=1.0 / 18.0,
            height_profile=ScaledProfile(
                base=BoundaryProfile(constant_term=2.0, components=((1.0, 1.0, 0.0),)),
                scale_exponent=1.0 / 3.0,
            ),
        ),
    )


def benchmark_forcing() -> Forcing:
    """f(x) = 1 + sin(x)."""
    return Forcing(constant_term=1.0, components=((1.0, 1.0, 0.0),))
