import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st
from pydantic import ValidationError

from src.thinhom.analysis.scripts.helpers.errors import DomainError
from src.thinhom.analysis.scripts.helpers.geometry import (
    BoundaryProfile,
    Forcing,
    ScaledProfile,
    StripSpec,
    ThinDomainSpec,
    benchmark_spec,
    domain_bounds,
    eta_sup,
    eval_profile,
    in_strip,
    jacobian_determinant,
    map_L,
    map_S,
    strip_bounds,
    strip_depth,
    thickness,
)
from src.thinhom.analysis.scripts.helpers.utilities import fit_loglog_slope

from builders import profile


def test_eval_constant_profile(make_profile):
    assert eval_profile(make_profile(2.0), 3.7, 0.1) == 2.0
    assert np.all(eval_profile(make_profile(2.0), np.linspace(0, 1, 5), 0.1) == 2.0)


def test_eval_rescales_argument(make_profile):
    p = make_profile(0.0, ((1.0, 1.0, 0.0),), 0.5)
    assert eval_profile(p, 1.0, 0.25) == pytest.approx(np.sin(2.0), abs=1e-15)


def test_eval_derivative(make_profile):
    p = make_profile(0.0, ((1.0, 1.0, 0.0),), 0.5)
    assert eval_profile(p, 1.0, 0.25, derivative=True) == pytest.approx(np.cos(2.0) / 0.5)


def test_eval_benchmark_upper_at_origin(benchmark):
    assert eval_profile(benchmark.upper, 0.0, 0.1) == pytest.approx(8.0)


def test_eval_rejects_nonpositive_eps(make_profile):
    with pytest.raises(DomainError):
        eval_profile(make_profile(1.0), 0.5, 0.0)
    with pytest.raises(DomainError):
        eval_profile(make_profile(1.0), 0.5, -0.1)


def test_two_element_components_get_zero_phase():
    profile = BoundaryProfile(constant_term=1.0, components=[[2.0, 3.0]])
    assert profile.components == ((2.0, 3.0, 0.0),)


def test_scale_exponent_below_one():
    with pytest.raises(ValidationError):
        ScaledProfile(base=BoundaryProfile(constant_term=1.0), scale_exponent=1.0)


@pytest.mark.parametrize("eps", [0.1, 0.04, 0.01])
def test_benchmark_thickness_is_constant(benchmark, eps):
    x = np.linspace(0, 20, 1001)
    np.testing.assert_allclose(thickness(benchmark, x, eps), 16.0, rtol=1e-12)
    np.testing.assert_allclose(thickness(benchmark, x, eps, derivative=True), 0.0, atol=1e-12)
    assert benchmark.constant_thickness


def test_thickness_zero_lower_profile(make_profile):
    spec = ThinDomainSpec(
        interval=(0.0, 1.0),
        lower=make_profile(0.0),
        upper=make_profile(2.0, ((1.0, 1.0, 0.0),), 0.5),
        strip=StripSpec(gamma=0.5, height_profile=make_profile(1.0)),
    )
    assert thickness(spec, 0.0, 0.1) == pytest.approx(2.0)
    assert not spec.constant_thickness


def test_thickness_within_uniform_bounds(benchmark, make_profile):
    spec = benchmark.model_copy(update={"upper": make_profile(3.0, ((1.0, 2.0, 0.3), (0.5, 1.0, 0.0)), 0.2)})
    x = np.linspace(0, 20, 10000)
    K = thickness(spec, x, 0.05)
    assert np.all(K >= spec.K0)
    assert np.all(K <= spec.K1)


def test_bounds_relations(benchmark):
    x = np.linspace(0, 20, 257)
    bottom, top = domain_bounds(benchmark, x, 0.1)
    lower_face, upper_face = strip_bounds(benchmark, x, 0.1)
    np.testing.assert_allclose(top - bottom, 0.1 * thickness(benchmark, x, 0.1))
    np.testing.assert_array_equal(upper_face, top)
    np.testing.assert_allclose(upper_face - lower_face, strip_depth(benchmark, x, 0.1))
    assert np.all(lower_face > bottom)


def test_in_strip_examples(benchmark):
    eps, x = 0.1, 1.3
    lower_face, upper_face = strip_bounds(benchmark, x, eps)
    bottom, _ = domain_bounds(benchmark, x, eps)
    assert not in_strip(benchmark, x, upper_face, eps)
    assert not in_strip(benchmark, x, lower_face, eps)
    assert in_strip(benchmark, x, 0.5 * (lower_face + upper_face), eps)
    assert not in_strip(benchmark, x, 0.5 * bottom, eps)


@given(
    x=st.floats(min_value=0.0, max_value=20.0),
    t=st.floats(min_value=-0.5, max_value=1.5),
    eps=st.sampled_from([0.2, 0.1, 0.05]),
)
def test_strip_membership_implies_domain_membership(x, t, eps):
    benchmark = benchmark_spec()
    bottom, top = domain_bounds(benchmark, x, eps)
    y = bottom + t * (top - bottom)
    if in_strip(benchmark, x, y, eps):
        assert bottom < y < top


def test_map_L_shifts_by_lower_profile(make_constant_spec):
    spec = make_constant_spec(k1=1.0, k2=1.0)
    x, y = map_L(spec, 0.0, 0.05, 0.1)
    assert x == 0.0
    assert y == pytest.approx(-0.05, abs=1e-15)


def test_map_S_scales_by_thickness(make_constant_spec):
    spec = make_constant_spec(k1=8.0, k2=8.0)
    x, y = map_S(spec, 1.0, 0.5, 0.1)
    assert x == 1.0
    assert y == pytest.approx(0.8)


def test_map_unknown_direction(benchmark):
    with pytest.raises(ValueError):
        map_L(benchmark, 0.0, 0.0, 0.1, direction="sideways")


@given(
    x=st.floats(min_value=0.0, max_value=20.0),
    y=st.floats(min_value=-2.0, max_value=2.0),
    eps=st.floats(min_value=0.01, max_value=0.5),
)
def test_maps_invert(x, y, eps):
    benchmark = benchmark_spec()
    for mapping in (map_L, map_S):
        fx, fy = mapping(benchmark, x, y, eps)
        bx, by = mapping(benchmark, fx, fy, eps, direction="inverse")
        assert bx == x
        assert by == pytest.approx(y, abs=1e-12)


def test_jacobian_determinants(benchmark):
    eps = 0.1
    x = np.linspace(0.5, 19.5, 50)
    y = np.linspace(0.0, 0.9, 50)
    det_L = jacobian_determinant(lambda a, b: map_L(benchmark, a, b, eps), x, y)
    np.testing.assert_allclose(det_L, 1.0, rtol=1e-6)
    det_S = jacobian_determinant(lambda a, b: map_S(benchmark, a, b, eps), x, y / 1.6)
    np.testing.assert_allclose(det_S, eps * thickness(benchmark, x, eps), rtol=1e-6)


def test_eta_bound_example(make_profile):
    spec = ThinDomainSpec(
        interval=(0.0, 20.0),
        lower=make_profile(2.0, ((1.0, 1.0, 0.0),), 0.5),
        upper=make_profile(1.0),
        strip=StripSpec(gamma=0.5, height_profile=make_profile(1.0)),
    )
    report = eta_sup(spec, 0.01, n_samples=200001)
    assert report.eta1_bound == pytest.approx(0.1)
    assert report.eta1 <= report.eta1_bound * (1 + 1e-12)
    assert report.eta1 == pytest.approx(0.1, rel=1e-4)
    assert report.eta2 == 0.0
    assert report.bounds_ok == {"H.1": True, "H.2": True}


def test_eta_constant_profiles(make_constant_spec):
    report = eta_sup(make_constant_spec(), 0.1)
    assert report.eta == 0.0
    assert all(report.bounds_ok.values())
    assert report.sampled_means["1/K"] == pytest.approx(1.0)


def test_eta_flags_sign_change(make_profile):
    spec = ThinDomainSpec.model_construct(
        interval=(0.0, 1.0),
        lower=make_profile(0.0),
        upper=make_profile(0.0, ((1.0, 1.0, 0.0),)),
        strip=StripSpec(gamma=0.5, height_profile=make_profile(1.0)),
    )
    report = eta_sup(spec, 0.1)
    assert report.bounds_ok["H.2"] is False


def test_validation_rejects_sign_change(make_profile):
    with pytest.raises(ValidationError):
        ThinDomainSpec(
            interval=(0.0, 1.0),
            lower=make_profile(0.0),
            upper=make_profile(0.0, ((1.0, 1.0, 0.0),)),
            strip=StripSpec(gamma=0.5, height_profile=make_profile(1.0)),
        )


def test_eta_needs_two_samples(benchmark):
    with pytest.raises(DomainError):
        eta_sup(benchmark, 0.1, n_samples=1)


@settings(max_examples=10)
@given(alpha=st.floats(min_value=0.0, max_value=0.9))
def test_eta_decays_with_rate_one_minus_alpha(alpha):
    make_profile = profile
    spec = ThinDomainSpec(
        interval=(0.0, 20.0),
        lower=make_profile(2.0, ((1.0, 1.0, 0.0),), alpha),
        upper=make_profile(1.0),
        strip=StripSpec(gamma=0.5, height_profile=make_profile(1.0)),
    )
    eps_grid = [2.0**-k for k in range(1, 7)]
    etas = [eta_sup(spec, e, n_samples=100001, eps_grid=eps_grid).eta for e in eps_grid]
    assert np.all(np.diff(etas) < 0)
    assert fit_loglog_slope(eps_grid, etas) == pytest.approx(1.0 - alpha, rel=0.05)


def test_forcing_strip_and_y_terms():
    forcing = Forcing(constant_term=1.0, components=((1.0, 1.0, 0.0),), y_coefficient=2.0)
    assert forcing(np.pi / 2, 0.25) == pytest.approx(2.5)
    assert forcing.mode == "strip"
