import math
import pytest

from fraclab.core.errors import DomainError
from fraclab.models import OrliczGauge


def test_power_gauge_quantities():
    gauge = OrliczGauge.power(2.0, 3.0)
    assert float(gauge.psi(3.0)) == pytest.approx(9.0)
    assert gauge.psi_inverse(4.0) == pytest.approx(2.0)
    # A(τ) = Ψ⁻¹(τ)^p/τ, B(τ) = τ/Ψ⁻¹(τ)
    assert gauge.A(4.0) == pytest.approx(2.0)
    assert gauge.B(4.0) == pytest.approx(2.0)
    assert gauge.admissible()


def test_gauge_rejects_bad_parameters():
    with pytest.raises(DomainError):
        OrliczGauge.power(1.0, 3.0)
    with pytest.raises(DomainError):
        OrliczGauge.power(2.0, 1.0)
    with pytest.raises(DomainError):
        OrliczGauge(kind="log_refined", parameter=0.0, p=2.0)


def test_log_refined_shift_is_admissible():
    gauge = OrliczGauge.log_refined(0.5, 2.0)
    assert gauge.shift >= math.e
    assert gauge.admissible()
    assert gauge.epsilon == pytest.approx(0.5)


def test_log_refined_inverse():
    gauge = OrliczGauge.log_refined(0.5, 2.0)
    for value in (1e-6, 0.3, 10.0, 1e8):
        tau = gauge.psi_inverse(value)
        assert float(gauge.psi(tau)) == pytest.approx(value, rel=1e-9)
    assert gauge.psi_inverse(0.0) == 0.0


def test_psi_is_convex():
    gauge = OrliczGauge.log_refined(1.0, 2.0)
    tau = [0.1, 1.0, 10.0, 100.0]
    assert all(v >= 0 for v in gauge.second_derivative(tau))
