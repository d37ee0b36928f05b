import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence
import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline
from fraclab.core.config import get_settings
from fraclab.core.errors import AccuracyError, DomainError, LabError
from fraclab.models import KernelValue, StableKernelReport, StableParams
from fraclab.utils.quadrature import integrate_1d

settings = get_settings()
logger = logging.getLogger(__name__)

# exp(-40) ~ 4e-18: the Fourier integrand is negligible beyond t|ξ|^θ = 40
FOURIER_CUTOFF = 40.0
SERIES_TERMS = 6
TABLE_POINTS = 401


def sphere_area(dim: int) -> float:
    """|S^{N−1}|, with |S^0| = 2."""
    return 2 * math.pi ** (dim / 2) / math.gamma(dim / 2)


def series_coefficients(params: StableParams, terms: int = SERIES_TERMS) -> np.ndarray:
    """Coefficients A_k of the heavy-tail expansion Γ_θ(y,1) ≈ Σ_k A_k |y|^{−kθ−N}.

    A_1 equals c(N,θ).
    """
    n, th = params.dim, params.order
    k = np.arange(1, terms + 1, dtype=float)
    return (
        math.pi ** (-n / 2 - 1)
        * (-1.0) ** (k + 1)
        / special.factorial(k)
        * 2.0 ** (k * th)
        * special.gamma(k * th / 2 + 1)
        * special.gamma((k * th + n) / 2)
        * np.sin(k * math.pi * th / 2)
    )


def _check_time(t: float) -> None:
    if not (t > 0) or not math.isfinite(t):
        raise DomainError(f"time must be positive and finite, got {t}")


def _radius(params: StableParams, x) -> float:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.size != 1 and arr.size != params.dim:
        raise DomainError(f"point of dimension {arr.size} given for N={params.dim}")
    return float(np.linalg.norm(arr))


def _is_cauchy(params: StableParams) -> bool:
    return params.dim == 1 and params.order == 1.0


def origin_value(params: StableParams, t: float) -> float:
    """Γ_θ(0,t) = t^{−N/θ} |S^{N−1}| Γ(N/θ) / (θ (2π)^N)."""
    n, th = params.dim, params.order
    return t ** (-n / th) * sphere_area(n) * math.gamma(n / th) / (th * (2 * math.pi) ** n)


def fourier_inversion(
    params: StableParams,
    r: float,
    t: float,
    *,
    epsabs: Optional[float] = None,
    epsrel: Optional[float] = None,
) -> float:
    """Radial inversion of exp(−t|ξ|^θ) at radius r, without any far-field switch.

    N = 1 is a cosine transform and N = 3 a sine transform, both by weighted
    (QAWO) quadrature; other N use the Hankel form with J_{N/2−1}.
    """
    _check_time(t)
    if r == 0:
        return origin_value(params, t)
    n, th = params.dim, params.order
    cutoff = (FOURIER_CUTOFF / t) ** (1 / th)
    split = min(t ** (-1 / th), cutoff)
    tol = {"epsabs": epsabs, "epsrel": epsrel}

    def damping(k: float) -> float:
        return math.exp(-t * k ** th)

    if n == 1:
        head, _ = integrate_1d(damping, 0.0, split, weight="cos", wvar=r, **tol)
        tail, _ = integrate_1d(damping, split, cutoff, weight="cos", wvar=r, **tol)
        value = (head + tail) / math.pi
    elif n == 3:
        def radial(k: float) -> float:
            return k * damping(k)

        head, _ = integrate_1d(radial, 0.0, split, weight="sin", wvar=r, **tol)
        tail, _ = integrate_1d(radial, split, cutoff, weight="sin", wvar=r, **tol)
        value = (head + tail) / (2 * math.pi ** 2 * r)
    else:
        order = n / 2 - 1

        def hankel(k: float) -> float:
            return damping(k) * k ** (n / 2) * special.jv(order, k * r)

        # oscillation period 2π/r; give quadrature enough subintervals
        limit = max(settings.QUAD_LIMIT, int(cutoff * r / math.pi) + 50)
        value_raw, _ = integrate_1d(hankel, 0.0, cutoff, limit=limit, **tol)
        value = value_raw * (2 * math.pi) ** (-n / 2) * r ** (1 - n / 2)
    return max(value, 0.0)


@dataclass(frozen=True)
class _KernelTable:
    """Γ_θ(·,1) on [0, switch] as a cubic spline, and the recalibrated tail series beyond."""

    switch: float
    spline: Optional[CubicSpline]
    coefficients: np.ndarray

    def near(self, y: np.ndarray) -> np.ndarray:
        return np.maximum(self.spline(y), 0.0)


@lru_cache(maxsize=32)
def _kernel_table(dim: int, order: float, switch: float, epsabs: float, epsrel: float) -> _KernelTable:
    params = StableParams(dim=dim, order=order)
    coefficients = series_coefficients(params)
    if _is_cauchy(params):
        return _KernelTable(switch=switch, spline=None, coefficients=coefficients)
    logger.info(f"Tabulating Γ_θ(·,1) for N={dim}, θ={order} on [0, {switch}]")
    grid = np.linspace(0.0, switch, TABLE_POINTS)
    values = np.array([fourier_inversion(params, y, 1.0, epsabs=epsabs, epsrel=epsrel) for y in grid])
    spline = CubicSpline(grid, values, bc_type=((1, 0.0), "not-a-knot"))
    k = np.arange(2, coefficients.size + 1)
    rest = float(np.sum(coefficients[1:] * switch ** (-k * order - dim)))
    matched = (values[-1] - rest) * switch ** (order + dim)
    logger.debug(f"Tail coefficient A_1 recalibrated from {coefficients[0]:.10g} to {matched:.10g}")
    coefficients = coefficients.copy()
    coefficients[0] = matched
    return _KernelTable(switch=switch, spline=spline, coefficients=coefficients)


class StableKernelService:
    """Evaluates the free fractional heat kernel Γ_θ and certifies its structure.

    Scalar evaluation (`eval_gamma`) inverts the Fourier transform directly; bulk
    evaluation (`gamma_array`) reads a cached spline table of Γ_θ(·,1) and uses
    self-similarity Γ_θ(x,t) = t^{−N/θ} Γ_θ(t^{−1/θ}x, 1).

    Attributes:
        params: Dimension, order and normalizing constant.
    """

    def __init__(self, params: StableParams):
        self.params = params

    @property
    def switch(self) -> float:
        return settings.FAR_FIELD_FACTOR

    def _table(self) -> _KernelTable:
        return _kernel_table(
            self.params.dim, self.params.order, self.switch, settings.QUAD_EPSABS, settings.QUAD_EPSREL
        )

    def _far(self, y: np.ndarray) -> np.ndarray:
        table = self._table()
        y = np.asarray(y, dtype=float)
        k = np.arange(1, table.coefficients.size + 1)
        terms = table.coefficients * y[..., None] ** (-(k * self.params.order) - self.params.dim)
        return np.maximum(terms.sum(axis=-1), 0.0)

    def eval_gamma(self, x, t: float) -> float:
        """Γ_θ(x,t).

        Args:
            x: Point of R^N (a float in 1-D).
            t: Positive time.

        Returns:
            The kernel value; closed form for the Cauchy case (N, θ) = (1, 1).

        Raises:
            DomainError: t is not positive.
            AccuracyError: the Fourier quadrature missed its tolerance.
        """
        _check_time(t)
        r = _radius(self.params, x)
        if _is_cauchy(self.params):
            return t / (math.pi * (r * r + t * t))
        n, th = self.params.dim, self.params.order
        y = r * t ** (-1 / th)
        if y >= self.switch:
            return t ** (-n / th) * float(self._far(np.array(y)))
        return t ** (-n / th) * fourier_inversion(self.params, y, 1.0)

    def gamma_array(self, r, t) -> np.ndarray:
        """Vectorized Γ_θ for radii ``r`` and times ``t`` (broadcast together)."""
        r = np.abs(np.asarray(r, dtype=float))
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise DomainError("time must be positive")
        r, t = np.broadcast_arrays(r, t)
        if _is_cauchy(self.params):
            return t / (np.pi * (r * r + t * t))
        n, th = self.params.dim, self.params.order
        shape = r.shape
        y = (r * t ** (-1 / th)).ravel()
        out = np.empty_like(y)
        near = y < self.switch
        out[near] = self._table().near(y[near])
        if np.any(~near):
            out[~near] = self._far(y[~near])
        return out.reshape(shape) * t ** (-n / th)

    def eval_envelope(self, x, t: float) -> float:
        """min(t^{−N/θ}, t/|x|^{N+θ})."""
        _check_time(t)
        r = _radius(self.params, x)
        n, th = self.params.dim, self.params.order
        near = t ** (-n / th)
        if r == 0:
            return near
        return min(near, t / r ** (n + th))

    def envelope_array(self, r, t) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        t = np.asarray(t, dtype=float)
        n, th = self.params.dim, self.params.order
        with np.errstate(divide="ignore"):
            return np.minimum(t ** (-n / th), t / r ** (n + th))

    def envelope_constants(self) -> tuple[float, float]:
        """Fitted c₁ ≤ Γ/envelope ≤ c₂ over four decades of |x| and of t."""
        return _envelope_constants(self.params.dim, self.params.order)

    def kernel_value(self, x, t: float) -> KernelValue:
        c1, c2 = self.envelope_constants()
        env = self.eval_envelope(x, t)
        return KernelValue(value=self.eval_gamma(x, t), envelope_low=c1 * env, envelope_high=c2 * env)

    def series_tail_mass(self, radius: float, t: float) -> float:
        """|S^{N−1}| ∫_R^∞ r^{N−1} Γ_θ(r,t) dr from the tail series."""
        table = self._table()
        th = self.params.order
        k = np.arange(1, table.coefficients.size + 1)
        terms = table.coefficients * t ** k * radius ** (-k * th) / (k * th)
        return sphere_area(self.params.dim) * float(terms.sum())

    def mass(self, t: float) -> float:
        """∫_{R^N} Γ_θ(x,t) dx by radial quadrature plus the closed-form tail."""
        _check_time(t)
        n, th = self.params.dim, self.params.order
        scale = t ** (1 / th)
        radius = self.switch * scale

        def radial(r: float) -> float:
            return r ** (n - 1) * float(self.gamma_array(r, t)) if n > 1 else float(self.gamma_array(r, t))

        core, _ = integrate_1d(radial, 0.0, radius, points=[scale], epsabs=1e-12, epsrel=1e-10)
        return sphere_area(n) * core + self.series_tail_mass(radius, t)

    def self_similarity_residual(self, r: float, t: float) -> float:
        """Relative gap between Γ(x,t) inverted at time t and t^{−N/θ}Γ(t^{−1/θ}x, 1)."""
        n, th = self.params.dim, self.params.order
        direct = fourier_inversion(self.params, r, t)
        scaled = t ** (-n / th) * fourier_inversion(self.params, r * t ** (-1 / th), 1.0)
        return abs(direct - scaled) / max(abs(scaled), 1e-300)

    def semigroup_residual(self, x: float, y: float, t: float, s: float) -> float:
        """Relative residual of ∫Γ(x−z,t)Γ(z−y,s)dz = Γ(x−y,t+s) (1-D)."""
        if self.params.dim != 1:
            raise DomainError("the free semigroup check is one-dimensional")

        def product(z: float) -> float:
            return float(self.gamma_array(x - z, t) * self.gamma_array(z - y, s))

        lo, hi = min(x, y), max(x, y)
        parts = [
            integrate_1d(product, -math.inf, lo, epsabs=1e-12, epsrel=1e-9)[0],
            integrate_1d(product, lo, hi, epsabs=1e-12, epsrel=1e-9)[0] if hi > lo else 0.0,
            integrate_1d(product, hi, math.inf, epsabs=1e-12, epsrel=1e-9)[0],
        ]
        target = float(self.gamma_array(x - y, t + s))
        return abs(sum(parts) - target) / target

    def time_comparison_ratio(self, r, s, t) -> np.ndarray:
        """Γ(x, 2t−s) / ((s/2t)^{N/θ} Γ(x, s)) for s < t; never below 1."""
        n, th = self.params.dim, self.params.order
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return self.gamma_array(r, 2 * t - s) / ((s / (2 * t)) ** (n / th) * self.gamma_array(r, s))

    def kernel_diagnostics(
        self,
        t_grid: Sequence[float],
        budget: Optional[int] = None,
        workers: int = 1,
    ) -> StableKernelReport:
        """Mass, fitted envelope constants and self-similarity residual per time.

        Args:
            t_grid: Positive times.
            budget: Maximum number of times processed; the report is flagged
                incomplete when the grid is longer.
            workers: Size of the thread pool for the per-time map.

        Returns:
            A report with one (t, mass, c1, c2, max_residual) row per processed time.
        """
        for t in t_grid:
            _check_time(t)
        report = StableKernelReport()
        times = list(t_grid)
        if budget is not None and len(times) > budget:
            report.incomplete = True
            report.messages.append(f"budget of {budget} times exhausted; {len(times) - budget} skipped")
            times = times[:budget]
        c1, c2 = self.envelope_constants()
        report.c1, report.c2 = c1, c2

        def per_time(t: float) -> tuple[tuple[float, float, float, float, float], Optional[str]]:
            try:
                mass = self.mass(t)
                scale = t ** (1 / self.params.order)
                residual = max(self.self_similarity_residual(f * scale, t) for f in (0.0, 0.1, 0.5, 1.0, 2.0, 5.0))
                return (t, mass, c1, c2, residual), None
            except LabError as exc:
                return (t, float("nan"), c1, c2, float("nan")), f"t={t:.6g}: {exc}"

        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            results = list(pool.map(per_time, times))
        for row, message in results:
            report.rows.append(row)
            if message:
                report.incomplete = True
                report.messages.append(message)
                logger.warning(f"Stable-kernel diagnostic incomplete at {message}")
        finite = [r[4] for r in report.rows if math.isfinite(r[4])]
        report.max_residual = max(finite, default=float("nan"))

        r_sample = np.array([0.0, 0.3, 1.0, 3.0])
        s_sample, t_sample = np.meshgrid([0.01, 0.1, 0.5], [0.6, 1.0, 2.0])
        ratios = [self.time_comparison_ratio(r, s_sample, t_sample).min() for r in r_sample]
        report.lower_bound_ratio = float(min(ratios))
        if self.params.dim == 1:
            try:
                report.semigroup_residual = max(
                    self.semigroup_residual(x, y, t, s)
                    for x, y, t, s in ((0.0, 0.0, 0.5, 0.5), (0.2, -0.7, 0.3, 1.1), (1.5, 0.0, 1.0, 0.25))
                )
            except AccuracyError as exc:
                report.incomplete = True
                report.messages.append(f"semigroup residual: {exc}")
        return report


@lru_cache(maxsize=32)
def _envelope_constants(dim: int, order: float) -> tuple[float, float]:
    service = StableKernelService(StableParams(dim=dim, order=order))
    r = np.concatenate([[0.0], np.logspace(-2, 2, 41)])
    t = np.logspace(-2, 2, 41)
    rr, tt = np.meshgrid(r, t)
    ratio = service.gamma_array(rr, tt) / service.envelope_array(rr, tt)
    return float(ratio.min()), float(ratio.max())
