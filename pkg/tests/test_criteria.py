import math
import numpy as np
import pytest

from fraclab.core.errors import DomainError, HypothesisError
from fraclab.models import DensityProfile, MeasureSpec
from fraclab.services import CriteriaService
from fraclab.services.criteria import NECESSARY, SUFFICIENT, growth_factor, verdict_for

UNIFORM = MeasureSpec(interior=DensityProfile(kind="uniform"))


@pytest.fixture
def criteria(unit_interval, coarse_search):
    return CriteriaService(unit_interval, 1.0, coarse_search)


def test_zero_datum_gives_zero(criteria):
    zero = MeasureSpec.zero()
    assert criteria.necessary_subcritical(zero, 3.0, 0.05).value == 0.0
    assert criteria.necessary_critical(zero, 2.0, 0.05).value == 0.0
    assert criteria.sufficient_kernel_integral(zero, 3.0, 0.05).value == 0.0
    assert criteria.sufficient_qnorm(zero, 3.0, 2.0, 0.05).value == 0.0
    assert criteria.sufficient_log(zero, 2.0, 0.5, 0.05).value == 0.0


def test_necessary_value_is_linear_in_amplitude(criteria):
    one = criteria.necessary_subcritical(UNIFORM, 3.0, 0.05)
    two = criteria.necessary_subcritical(UNIFORM.scaled(2.0), 3.0, 0.05)
    assert 0 < one.value < math.inf
    assert two.value == pytest.approx(2 * one.value, rel=1e-9)
    assert one.necessary
    assert one.sigma_profile


def test_sufficient_value_scales_with_power(criteria):
    one = criteria.sufficient_kernel_integral(UNIFORM.scaled(0.1), 3.0, 0.05)
    two = criteria.sufficient_kernel_integral(UNIFORM.scaled(0.2), 3.0, 0.05)
    assert 0 < one.value < math.inf
    # (κ sup)^{p−1} with p = 3
    assert two.value == pytest.approx(4 * one.value, rel=1e-6)
    assert one.threshold_role == SUFFICIENT


def test_verdicts_follow_gamma(criteria):
    report = criteria.necessary_subcritical(UNIFORM, 3.0, 0.05, gamma=1e-12)
    assert report.verdict == "nonexistence"
    report = criteria.sufficient_kernel_integral(UNIFORM.scaled(0.1), 3.0, 0.05, gamma=1e12)
    assert report.verdict == "existence"
    assert criteria.necessary_subcritical(UNIFORM, 3.0, 0.05).verdict == "n/a"


def test_horizon_beyond_t_star_rejected(criteria):
    with pytest.raises(HypothesisError):
        criteria.necessary_subcritical(UNIFORM, 3.0, 0.5, t_star=0.1)
    with pytest.raises(DomainError):
        criteria.necessary_subcritical(UNIFORM, 3.0, 0.0)


def test_critical_condition_needs_critical_exponent(criteria):
    with pytest.raises(HypothesisError) as exc:
        criteria.necessary_critical(UNIFORM, 3.0, 0.05, "interior")
    assert "Theorem 3.1" in str(exc.value)
    with pytest.raises(HypothesisError):
        criteria.necessary_critical(UNIFORM, 2.0, 0.05, "boundary")


def test_boundary_critical_ignores_interior_mass(criteria):
    bump = MeasureSpec(interior=DensityProfile(kind="table", table_x=(0.4, 0.5, 0.6), table_f=(0.0, 1.0, 0.0)))
    report = criteria.necessary_critical(bump, 5 / 3, 0.05, "boundary")
    assert report.value == 0.0


def test_nonintegrable_datum_reported_unbounded(criteria):
    mu = MeasureSpec(interior=DensityProfile(kind="power", center=0.5, exponent=1.0, radius=0.5), weighted=False)
    report = criteria.necessary_subcritical(mu, 3.0, 0.05)
    assert math.isinf(report.value)
    assert report.unbounded


def test_qnorm_hypotheses(criteria):
    with pytest.raises(DomainError):
        criteria.sufficient_qnorm(UNIFORM, 3.0, 1.0, 0.05)
    with_boundary = MeasureSpec(boundary_density=((0.0, 1.0),))
    with pytest.raises(HypothesisError) as exc:
        criteria.sufficient_qnorm(with_boundary, 3.0, 2.0, 0.05)
    assert "Theorem 4.3" in str(exc.value)


def test_qnorm_boundary_part_below_threshold(criteria):
    mu = MeasureSpec(boundary_density=((0.0, 1.0),), amplitude=0.1)
    report = criteria.sufficient_qnorm(mu, 1.5, 2.0, 0.05)
    assert report.value > 0
    assert report.details["boundary"] > 0


def test_log_condition_hypotheses(criteria):
    with pytest.raises(HypothesisError) as exc:
        criteria.sufficient_log(UNIFORM, 3.0, 0.5, 0.05)
    assert "Theorem 4.4" in str(exc.value)
    with pytest.raises(DomainError):
        criteria.sufficient_log(UNIFORM, 2.0, 0.0, 0.05)
    with pytest.raises(HypothesisError) as exc:
        criteria.sufficient_log(UNIFORM, 5 / 3, 0.5, 0.05, "boundary")
    assert "Theorem 4.5" in str(exc.value)


def test_log_condition_on_uniform_datum(criteria):
    report = criteria.sufficient_log(UNIFORM.scaled(0.1), 2.0, 0.5, 0.05)
    assert 0 < report.value < math.inf


def test_dirac_on_boundary(criteria):
    report = criteria.dirac_boundary(1.0, 0.0, 3.0, 0.05)
    assert report.verdict == "nonexistence"
    assert math.isinf(report.value)
    assert report.details["critical_exponent"] == pytest.approx(5 / 3)
    with pytest.raises(DomainError):
        criteria.dirac_boundary(1.0, 0.5, 3.0, 0.05)


def test_dirac_below_threshold_has_local_solution(criteria):
    report = criteria.dirac_boundary(0.1, 0.0, 1.5, 0.05)
    assert report.kind == "dirac_boundary"
    assert report.verdict == "existence"


def test_growth_factor_and_verdicts():
    sigmas = np.logspace(-6, 0, 25)
    flat = [(s, 1.0) for s in sigmas]
    assert growth_factor(flat) == pytest.approx(1.0)
    steep = [(s, 1 / s) for s in sigmas]
    assert growth_factor(steep) >= 10.0
    assert verdict_for(5.0, NECESSARY, None) == "n/a"
    assert verdict_for(5.0, NECESSARY, 1.0) == "nonexistence"
    assert verdict_for(5.0, SUFFICIENT, 1.0) == "inconclusive"
