import math
import warnings
from typing import Callable, Optional, Sequence
import numpy as np
from scipy import integrate
from scipy.integrate import IntegrationWarning
from fraclab.core.config import get_settings
from fraclab.core.errors import AccuracyError, DivergenceError

settings = get_settings()

# Reported quadrature error may exceed the request by this factor before it counts as a failure.
ERROR_SLACK = 1e3


def integrate_1d(
    f: Callable[[float], float],
    a: float,
    b: float,
    *,
    epsabs: Optional[float] = None,
    epsrel: Optional[float] = None,
    limit: Optional[int] = None,
    points: Optional[Sequence[float]] = None,
    weight: Optional[str] = None,
    wvar: Optional[float] = None,
) -> tuple[float, float]:
    """Adaptive quadrature with the laboratory's tolerances.

    Raises:
        AccuracyError: the error estimate misses the tolerance by more than ERROR_SLACK.
    """
    epsabs = settings.QUAD_EPSABS if epsabs is None else epsabs
    epsrel = settings.QUAD_EPSREL if epsrel is None else epsrel
    limit = settings.QUAD_LIMIT if limit is None else limit
    if a == b:
        return 0.0, 0.0
    kwargs: dict = {"epsabs": epsabs, "epsrel": epsrel, "limit": limit}
    if weight is not None:
        kwargs.update(weight=weight, wvar=wvar)
    elif points is not None and math.isfinite(a) and math.isfinite(b):
        inner = sorted(p for p in points if a < p < b)
        if inner:
            kwargs["points"] = inner
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        value, err = integrate.quad(f, a, b, **kwargs)
    if not math.isfinite(value):
        raise DivergenceError(f"integral over [{a:.6g}, {b:.6g}] is not finite", where=a)
    if err > ERROR_SLACK * max(epsabs, epsrel * abs(value)):
        raise AccuracyError(f"quadrature over [{a:.6g}, {b:.6g}] did not converge", achieved=err)
    return value, err


def singular_weight_integral(a: float, b: float, eps: float) -> float:
    """∫_0^ε u^{−a} |log u|^{−b} du in closed form (or by a smooth quadrature in s = −log u).

    Raises:
        DivergenceError: the integral is infinite (a > 1, or a = 1 with b ≤ 1).
    """
    if eps <= 0:
        return 0.0
    if b > 0 and eps >= 1:
        raise DivergenceError("log-corrected singular integrals need ε < 1", where=eps)
    if b == 0:
        if a >= 1:
            raise DivergenceError(f"u^-{a:.6g} is not integrable at the origin", where=0.0)
        return eps ** (1 - a) / (1 - a)
    if a > 1 or (a == 1 and b <= 1):
        raise DivergenceError(f"u^-{a:.6g}|log u|^-{b:.6g} is not integrable at the origin", where=0.0)
    lead = -math.log(eps)
    if a == 1:
        return lead ** (1 - b) / (b - 1)
    value, _ = integrate_1d(lambda s: math.exp(-(1 - a) * s) * s ** (-b), lead, math.inf)
    return value


def singular_integral(
    g: Callable[[float], float],
    g0: float,
    a: float,
    b: float,
    eps: float,
    *,
    points: Optional[Sequence[float]] = None,
) -> float:
    """∫_0^ε u^{−a} |log u|^{−b} g(u) du for continuous g with g(0) = g0.

    The singular part g0·∫ u^{−a}|log u|^{−b} is taken analytically; the remainder
    (g(u) − g0) vanishes at the origin and is left to adaptive quadrature.
    """
    if eps <= 0:
        return 0.0
    head = g0 * singular_weight_integral(a, b, eps) if g0 != 0 else 0.0

    def remainder(u: float) -> float:
        if u <= 0:
            return 0.0
        w = u ** (-a)
        if b:
            w *= abs(math.log(u)) ** (-b)
        return w * (g(u) - g0)

    tail, _ = integrate_1d(remainder, 0.0, eps, points=points)
    return head + tail


def log_substitution_integral(
    integrand: Callable[[float], float],
    s_lo: float,
    s_cut: float = 60.0,
) -> float:
    """∫_{s_lo}^∞ F(s) ds for an integrand with algebraic decay, such as the
    log-substituted form of a power-log singularity.

    Integrates to ``s_lo + s_cut`` and extrapolates the remaining tail from the
    local power law F(s) ≈ F(S)(s/S)^q.

    Raises:
        DivergenceError: the fitted decay is not integrable (q ≥ −1).
    """
    s_hi = s_lo + s_cut
    head, _ = integrate_1d(integrand, s_lo, s_hi, limit=max(settings.QUAD_LIMIT, 400))
    return head + power_tail(integrand(s_hi), integrand(2 * s_hi), s_hi, 2 * s_hi, upper=True)


def power_tail(f1: float, f2: float, s1: float, s2: float, *, upper: bool) -> float:
    """Tail of a power law through (s1, f1), (s2, f2).

    ``upper=True`` returns ∫_{s1}^∞, otherwise ∫_0^{s1}.
    """
    if f1 == 0:
        return 0.0
    if f2 <= 0 or f1 < 0:
        return 0.0
    q = math.log(f2 / f1) / math.log(s2 / s1)
    if upper:
        if q >= -1:
            raise DivergenceError(f"tail decays like s^{q:.3g}, not integrable at infinity", where=s1)
        return f1 * s1 / (-q - 1)
    if q <= -1:
        raise DivergenceError(f"integrand grows like s^{q:.3g} near zero, not integrable", where=s1)
    return f1 * s1 / (q + 1)


def log_trapezoid(s: np.ndarray, values: np.ndarray) -> float:
    """∫ F(s) ds over a log-spaced grid by the trapezoid rule in log s."""
    s = np.asarray(s, dtype=float)
    w = np.asarray(values, dtype=float) * s
    return float(np.trapezoid(w, np.log(s))) if hasattr(np, "trapezoid") else float(np.trapz(w, np.log(s)))
