import math
import pytest
from hypothesis import given, settings, strategies as st

from fraclab.core.errors import DivergenceError, DomainError, HypothesisError
from fraclab.models import Atom, DensityProfile, Domain, MeasureSpec
from fraclab.services import MeasureService, critical_exponent

UNIFORM = DensityProfile(kind="uniform")


def test_critical_exponent():
    assert critical_exponent(1.0, 1, 0.0) == pytest.approx(2.0)
    assert critical_exponent(1.0, 1, 0.5) == pytest.approx(5 / 3)
    with pytest.raises(DomainError):
        critical_exponent(0.0, 1, 0.0)
    with pytest.raises(DomainError):
        critical_exponent(1.0, 0, 0.0)


@given(
    alpha=st.floats(min_value=1e-3, max_value=2.0),
    d=st.integers(min_value=1, max_value=6),
    l=st.floats(min_value=0.0, max_value=5.0),
)
def test_critical_exponent_exceeds_one(alpha, d, l):
    assert critical_exponent(alpha, d, l) > 1


def test_interior_profiles():
    supercritical = MeasureService.interior_profile(0.5, 3.0, 1.0, 1)
    assert (supercritical.exponent, supercritical.log_exponent, supercritical.radius) == (0.5, 0.0, 1.0)
    assert not supercritical.critical

    critical = MeasureService.interior_profile(0.5, 2.0, 1.0, 1)
    assert critical.exponent == pytest.approx(1.0)
    assert critical.log_exponent == pytest.approx(2.0)
    assert critical.radius == 0.5
    assert critical.critical


def test_interior_profile_subcritical_rejected():
    with pytest.raises(HypothesisError) as exc:
        MeasureService.interior_profile(0.5, 1.5, 1.0, 1)
    assert "Theorem 1.1(i)" in str(exc.value)


def test_interior_profile_needs_interior_center(unit_interval):
    with pytest.raises(DomainError):
        MeasureService.interior_profile(0.0, 3.0, 1.0, 1, unit_interval)


def test_boundary_profiles():
    supercritical = MeasureService.boundary_profile(0.0, 2.0, 1.0, 1)
    assert (supercritical.exponent, supercritical.radius) == (1.0, 1.0)
    critical = MeasureService.boundary_profile(0.0, 5 / 3, 1.0, 1)
    assert critical.exponent == pytest.approx(1.5)
    assert critical.log_exponent == pytest.approx(2.5)
    assert critical.radius == 0.5
    with pytest.raises(HypothesisError) as exc:
        MeasureService.boundary_profile(0.0, 1.2, 1.0, 1)
    assert "Theorem 1.2(i)" in str(exc.value)


def test_uniform_unweighted_ball_mass(unit_interval):
    mu = MeasureSpec(interior=UNIFORM, weighted=False)
    assert MeasureService.ball_mass(mu, unit_interval, 0.5, 0.1, 1.0) == pytest.approx(0.2, rel=1e-10)


def test_singular_density_ball_mass(unit_interval):
    profile = DensityProfile(kind="power", center=0.5, exponent=0.5, radius=1.0)
    raw = MeasureSpec(interior=profile, weighted=False)
    assert MeasureService.ball_mass(raw, unit_interval, 0.5, 0.01, 1.0) == pytest.approx(0.4, rel=1e-6)
    weighted = MeasureSpec(interior=profile)
    assert MeasureService.ball_mass(weighted, unit_interval, 0.5, 0.01, 1.0) == pytest.approx(
        0.4 * math.sqrt(0.5), rel=2e-2
    )


def test_atom_contributes_its_mass(unit_interval):
    mu = MeasureSpec(atoms=(Atom(location=0.5, mass=1.0),), amplitude=3.0)
    assert MeasureService.ball_mass(mu, unit_interval, 0.5, 0.01, 1.0) == pytest.approx(3.0)
    assert MeasureService.ball_mass(mu, unit_interval, 0.2, 0.1, 1.0) == 0.0


def test_zero_measure(unit_interval):
    assert MeasureService.ball_mass(MeasureSpec.zero(), unit_interval, 0.5, 0.2, 1.0) == 0.0


def test_ball_mass_exterior_center(unit_interval):
    with pytest.raises(DomainError):
        MeasureService.ball_mass(MeasureSpec(interior=UNIFORM), unit_interval, 2.0, 0.2, 1.0)


def test_nonintegrable_density_diverges(unit_interval):
    mu = MeasureSpec(interior=DensityProfile(kind="power", center=0.5, exponent=1.0, radius=0.5), weighted=False)
    with pytest.raises(DivergenceError):
        MeasureService.ball_mass(mu, unit_interval, 0.5, 0.1, 1.0)


def test_ball_mass_is_additive(unit_interval):
    mu = MeasureSpec(interior=UNIFORM)
    left = MeasureService.ball_mass(mu, unit_interval, 0.25, 0.25, 1.0)
    right = MeasureService.ball_mass(mu, unit_interval, 0.75, 0.25, 1.0)
    whole = MeasureService.ball_mass(mu, unit_interval, 0.5, 0.5, 1.0)
    assert left + right == pytest.approx(whole, rel=1e-6)


def test_boundary_density_counts_boundary_points(unit_interval):
    mu = MeasureSpec(boundary_density=((0.0, 2.0), (1.0, 5.0)))
    assert MeasureService.ball_mass(mu, unit_interval, 0.0, 0.3, 1.0) == pytest.approx(2.0)
    assert MeasureService.boundary_masses(mu, unit_interval) == {0.0: 2.0, 1.0: 5.0}


@given(
    z=st.floats(min_value=0.0, max_value=1.0),
    s1=st.floats(min_value=1e-3, max_value=1.0),
    s2=st.floats(min_value=1e-3, max_value=1.0),
)
@settings(max_examples=30, deadline=None)
def test_ball_mass_monotone_in_radius(z, s1, s2):
    dom = Domain.interval(0.0, 1.0)
    mu = MeasureSpec(interior=UNIFORM)
    small, large = sorted((s1, s2))
    assert MeasureService.ball_mass(mu, dom, z, small, 1.0) <= MeasureService.ball_mass(mu, dom, z, large, 1.0) + 1e-9


@given(kappa=st.floats(min_value=1e-3, max_value=1e3))
@settings(max_examples=20, deadline=None)
def test_ball_mass_homogeneous_in_amplitude(kappa):
    dom = Domain.interval(0.0, 1.0)
    mu = MeasureSpec(interior=UNIFORM)
    base = MeasureService.ball_mass(mu, dom, 0.3, 0.2, 1.0)
    assert MeasureService.ball_mass(mu.scaled(kappa), dom, 0.3, 0.2, 1.0) == pytest.approx(kappa * base, rel=1e-12)


def test_half_space_uniform_ball_mass():
    dom = Domain.half_space(2)
    mu = MeasureSpec(interior=UNIFORM, weighted=False)
    # half disk of radius 1
    assert MeasureService.ball_mass(mu, dom, (0.0, 0.0), 1.0, 1.0) == pytest.approx(math.pi / 2, rel=1e-6)
