import math
import numpy as np
import pytest

from fraclab.core.errors import DomainError, HypothesisError
from fraclab.models import DensityProfile, IntegralInequalityInstance, KappaBracket, MeasureSpec, Verdict
from fraclab.services import MeasureService, PicardService, integral_inequality_bound
from fraclab.services.picard import (
    analytic_inequality_constant,
    default_schedule,
    etd_weights,
    fitted_inequality_constant,
    ode_blows_up,
    time_mesh,
)

UNIFORM = MeasureSpec(interior=DensityProfile(kind="uniform"))


@pytest.fixture
def picard(small_grid):
    return PicardService(small_grid)


def test_zero_datum_converges_immediately(picard, small_grid):
    run = picard.solve(MeasureSpec.zero(), small_grid.T_star, 3.0)
    assert run.verdict is Verdict.CONVERGED
    assert run.j == 1
    assert run.sup_history == [0.0]
    assert run.residual == 0.0


def test_small_datum_converges(picard, small_grid):
    run = picard.solve(UNIFORM.scaled(0.1), small_grid.T_star, 3.0)
    assert run.verdict is Verdict.CONVERGED
    assert run.verdict.solvable
    assert run.residual < 1e-4
    assert all(b >= a for a, b in zip(run.sup_history, run.sup_history[1:]))
    assert run.max_monotone_violation <= 1e-9
    assert np.all(run.current >= run.u1)


def test_large_datum_is_not_solvable(picard, small_grid):
    ok, T = picard.solvable(UNIFORM, 1e4, 3.0, [small_grid.T_star / 16])
    assert not ok
    assert T is None


def test_zero_amplitude_is_solvable(picard):
    assert picard.solvable(UNIFORM, 0.0, 3.0, [0.01, 0.001]) == (True, 0.001)


def test_subcritical_exponent_has_unbounded_bracket(picard):
    bracket = picard.kappa_star_bisect(UNIFORM, 1.5)
    assert bracket.unbounded_above
    assert math.isinf(bracket.kappa_hi)
    assert not bracket.evaluations


def test_exponent_must_exceed_one(picard, small_grid):
    with pytest.raises(DomainError):
        picard.new_run(UNIFORM, small_grid.T_star, 1.0)


def test_horizon_beyond_t_star_rejected(picard, small_grid):
    with pytest.raises(HypothesisError):
        picard.initial_term(UNIFORM, time_mesh(2 * small_grid.T_star))


def test_kappa_sweep_keeps_order(picard, small_grid):
    runs = picard.kappa_sweep(UNIFORM, 3.0, [0.0, 0.05], small_grid.T_star / 4, workers=2)
    assert [r.kappa for r in runs] == [0.0, 0.05]
    assert all(r.verdict is Verdict.CONVERGED for r in runs)


@pytest.mark.slow
def test_kappa_star_bracket(picard, small_grid):
    schedule = default_schedule(small_grid.T_star, 3)
    bracket = picard.kappa_star_bisect(UNIFORM, 3.0, schedule, tol_kappa=0.1)
    assert 0 < bracket.kappa_lo < bracket.kappa_hi < math.inf
    assert bracket.relative_width <= 0.1
    assert bracket.T_used in schedule


def test_boundary_family_uses_boundary_exponent(picard):
    # 1.8 lies below p_1(1, 0) = 2 but above p_1(1, 1/2) = 5/3
    assert picard.kappa_star_bisect(UNIFORM, 1.8).unbounded_above
    assert picard.kappa_star_bisect(UNIFORM, 1.6, locus="boundary").unbounded_above


@pytest.mark.slow
def test_kappa_star_bracket_for_boundary_profile(picard, small_grid):
    p = 5 / 3
    family = MeasureSpec.from_profile(MeasureService.boundary_profile(0.0, p, 1.0, 1, small_grid.domain))
    schedule = default_schedule(small_grid.T_star, 2)
    bracket = picard.kappa_star_bisect(family, p, schedule, tol_kappa=0.25, locus="boundary")
    assert bracket.evaluations
    assert not bracket.unbounded_above
    assert 0 < bracket.kappa_lo < bracket.kappa_hi < math.inf


def test_certify_uses_solved_horizon():
    seen = []

    def ratio(kappa, T):
        seen.append(T)
        return kappa * T

    # at the largest horizon 2 × 1 > 0.6 would always certify
    bracket = PicardService.certify(KappaBracket(kappa_lo=1.0, kappa_hi=2.0, T_used=0.25), ratio, 0.6, 1.0)
    assert seen == [0.25]
    assert bracket.necessary_ratio_hi == pytest.approx(0.5)
    assert bracket.gamma1 == 0.6
    assert not bracket.certified
    assert PicardService.certify(KappaBracket(kappa_lo=1.0, kappa_hi=2.0, T_used=0.25), ratio, 0.4, 1.0).certified


def test_certify_falls_back_to_smallest_horizon():
    bracket = PicardService.certify(KappaBracket(kappa_lo=0.0, kappa_hi=1.0), lambda k, T: k * T, None, 0.0625)
    assert bracket.necessary_ratio_hi == pytest.approx(0.0625)
    assert not bracket.certified
    assert math.isnan(bracket.gamma1)


def test_time_mesh():
    mesh = time_mesh(0.5)
    assert mesh[-1] == pytest.approx(0.5)
    assert mesh[0] <= 0.5 * 1e-4
    assert np.all(np.diff(mesh) > 0)
    with pytest.raises(DomainError):
        time_mesh(0.0)


def test_default_schedule():
    assert default_schedule(1.0, 3) == [1.0, 0.25, 0.0625]


def test_etd_weights():
    z = np.array([1e-6, 1e-2, 1.0, 30.0])
    alpha, beta = etd_weights(z)
    assert alpha + beta == pytest.approx((1 - np.exp(-z)) / z, rel=1e-6)
    assert alpha[0] == pytest.approx(0.5)
    assert beta[0] == pytest.approx(0.5)


def test_logarithmic_inequality_bounds():
    inst = IntegralInequalityInstance(c1=1.0, c2=1.0, alpha=1.0, beta=2.0, t_star=1 / (2 * math.e), T=1.0)
    bound = integral_inequality_bound(inst, fitted=False)
    assert bound.sharp == pytest.approx(1.0)
    assert bound.general == pytest.approx(1 / math.log(2))
    assert bound.best == bound.sharp

    inst = IntegralInequalityInstance(c1=1.0, c2=1.0, alpha=1.0, beta=2.0, t_star=1 / (2 * math.e ** 4), T=1.0)
    assert integral_inequality_bound(inst, fitted=False).sharp == pytest.approx(0.25)


def test_inequality_instance_validation():
    with pytest.raises(DomainError):
        IntegralInequalityInstance(c1=1.0, c2=1.0, alpha=1.0, beta=1.0, t_star=0.1, T=1.0)
    with pytest.raises(DomainError):
        IntegralInequalityInstance(c1=1.0, c2=1.0, alpha=1.0, beta=2.0, t_star=0.6, T=1.0)


def test_inequality_constants():
    assert analytic_inequality_constant(1.0, 2.0) == pytest.approx(1 / math.log(2))
    # ζ′ = ζ², ζ(1) = c₁ blows up at 1 + 1/c₁
    assert analytic_inequality_constant(0.0, 2.0) == pytest.approx(1.0)
    assert fitted_inequality_constant(0.0, 2.0) == pytest.approx(1.0, rel=1e-4)


def test_ode_blow_up_time():
    inst = IntegralInequalityInstance(c1=2.0, c2=1.0, alpha=0.0, beta=2.0, t_star=1.0, T=2.5)
    blew_up, when = ode_blows_up(inst)
    assert blew_up
    assert when == pytest.approx(1.5, rel=1e-4)
    assert ode_blows_up(inst, c1=0.5) == (False, None)
