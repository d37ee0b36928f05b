import math
import pytest
from hypothesis import given, settings, strategies as st

from fraclab.core.errors import DomainError
from fraclab.models import StableParams
from fraclab.services import StableKernelService


@pytest.fixture(scope="module")
def cauchy_kernel():
    return StableKernelService(StableParams(dim=1, order=1.0))


@pytest.fixture(scope="module")
def stable_kernel():
    return StableKernelService(StableParams(dim=1, order=1.5))


def test_cauchy_closed_form(cauchy_kernel):
    assert cauchy_kernel.eval_gamma(0.0, 1.0) == pytest.approx(1 / math.pi, rel=1e-12)
    assert cauchy_kernel.eval_gamma(1.0, 1.0) == pytest.approx(1 / (2 * math.pi), rel=1e-12)


@pytest.mark.parametrize(
    "dim, expected",
    [
        # Cauchy kernels t/(π² (t²+r²)²) and t/(2π (t²+r²)^{3/2}) at r = 1/2, t = 1
        (3, 1 / (math.pi ** 2 * 1.25 ** 2)),
        (2, 1 / (2 * math.pi * 1.25 ** 1.5)),
    ],
)
def test_radial_inversion_in_higher_dimension(dim, expected):
    kernel = StableKernelService(StableParams(dim=dim, order=1.0))
    point = (0.5,) + (0.0,) * (dim - 1)
    assert kernel.eval_gamma(point, 1.0) == pytest.approx(expected, rel=1e-4)


def test_nonpositive_time_rejected(cauchy_kernel):
    with pytest.raises(DomainError):
        cauchy_kernel.eval_gamma(0.0, 0.0)
    with pytest.raises(DomainError):
        cauchy_kernel.eval_envelope(1.0, -1.0)


def test_envelope_branches(cauchy_kernel):
    assert cauchy_kernel.eval_envelope(0.0, 2.0) == pytest.approx(0.5)
    assert cauchy_kernel.eval_envelope(10.0, 1.0) == pytest.approx(0.01)
    # crossover |x| = t^{1/θ}: both branches give t^{-N/θ}
    assert cauchy_kernel.eval_envelope(3.0, 3.0) == pytest.approx(1 / 3)


def test_cauchy_envelope_constants(cauchy_kernel):
    c1, c2 = cauchy_kernel.envelope_constants()
    # Γ/envelope ranges over [1/(2π), 1/π] and touches the lower end at |x| = t
    assert c1 == pytest.approx(1 / (2 * math.pi), rel=1e-9)
    assert c1 < c2 <= 1 / math.pi * (1 + 1e-12)


def test_kernel_value_within_envelope(cauchy_kernel):
    kv = cauchy_kernel.kernel_value(0.7, 0.3)
    assert kv.envelope_low <= kv.value <= kv.envelope_high


def test_mass_is_one(cauchy_kernel):
    assert cauchy_kernel.mass(1.0) == pytest.approx(1.0, abs=1e-6)


def test_mass_is_one_off_cauchy(stable_kernel):
    assert stable_kernel.mass(0.5) == pytest.approx(1.0, abs=1e-3)


def test_self_similarity(stable_kernel):
    for r, t in ((0.0, 0.3), (0.5, 0.3), (2.0, 4.0)):
        assert stable_kernel.self_similarity_residual(r, t) < 1e-4


def test_table_matches_direct_inversion(stable_kernel):
    direct = stable_kernel.eval_gamma(0.8, 0.5)
    tabulated = float(stable_kernel.gamma_array(0.8, 0.5))
    assert tabulated == pytest.approx(direct, rel=1e-4)


def test_time_comparison_never_below_one(cauchy_kernel):
    ratio = cauchy_kernel.time_comparison_ratio(0.4, [0.05, 0.2, 0.5], [0.6, 0.6, 0.6])
    assert ratio.min() >= 1 - 1e-12


def test_diagnostics_budget_flags_incomplete(cauchy_kernel):
    report = cauchy_kernel.kernel_diagnostics([0.5, 1.0, 2.0], budget=2)
    assert report.incomplete
    assert len(report.rows) == 2
    assert report.max_mass_error < 1e-6
    assert any("budget" in m for m in report.messages)


@given(x=st.floats(min_value=0.0, max_value=30.0), t=st.floats(min_value=1e-3, max_value=10.0))
@settings(max_examples=40, deadline=None)
def test_kernel_is_even(stable_kernel, x, t):
    assert float(stable_kernel.gamma_array(x, t)) == float(stable_kernel.gamma_array(-x, t))
