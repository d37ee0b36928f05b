import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional
import numpy as np
from scipy import special
from fraclab.core.errors import DivergenceError, DomainError, HypothesisError
from fraclab.models import DensityProfile, Domain, MeasureSpec, SingularProfile
from fraclab.services.geometry import GeometryService
from fraclab.services.stable_kernel import sphere_area
from fraclab.utils.quadrature import integrate_1d, log_substitution_integral, singular_integral

logger = logging.getLogger(__name__)

# relative slack when deciding that two points coincide
POINT_TOL = 1e-12


@dataclass(frozen=True)
class Weight:
    """Multiplier w(d) of a density, written as a function of the distance d to ∂Ω,
    with w(d) ≈ lead·d^power as d → 0."""

    fn: Callable[[float], float]
    power: float = 0.0
    lead: float = 1.0

    @classmethod
    def unit(cls) -> "Weight":
        return cls(fn=lambda d: 1.0)

    @classmethod
    def distance_power(cls, exponent: float) -> "Weight":
        """d^l."""

        def fn(d: float) -> float:
            if d > 0 or exponent == 0:
                return d ** exponent if d > 0 else 1.0
            return 0.0 if exponent > 0 else math.inf

        return cls(fn=fn, power=exponent)

    @classmethod
    def boundary_factor(cls, theta: float, s: float) -> "Weight":
        """D(y,s) = d^{θ/2}/(d^{θ/2} + √s)."""
        root = math.sqrt(s)
        return cls(fn=lambda d: d ** (theta / 2) / (d ** (theta / 2) + root), power=theta / 2, lead=1 / root)

    @classmethod
    def inverse_sum(cls, theta: float, s: float) -> "Weight":
        """1/(d^{θ/2} + √s)."""
        root = math.sqrt(s)
        return cls(fn=lambda d: 1.0 / (d ** (theta / 2) + root), lead=1 / root)

    def times_power(self, exponent: float, scale: float = 1.0) -> "Weight":
        """(d/scale)^exponent · w(d)."""
        base = self
        return Weight(
            fn=lambda d: (d / scale) ** exponent * base.fn(d),
            power=self.power + exponent,
            lead=self.lead * scale ** (-exponent),
        )


def critical_exponent(alpha: float, d: int, l: float) -> float:
    """p_α(d,l) = 1 + α/(d+l)."""
    if alpha <= 0 or d < 1 or l < 0:
        raise DomainError(f"critical exponent needs α > 0, d ≥ 1, l ≥ 0; got ({alpha}, {d}, {l})")
    return 1.0 + alpha / (d + l)


def _is_close(a: float, b: float) -> bool:
    return abs(a - b) <= POINT_TOL * max(1.0, abs(a), abs(b))


def _radius(profile: DensityProfile, y) -> float:
    c = np.atleast_1d(np.asarray(profile.center, dtype=float))
    return float(np.linalg.norm(np.atleast_1d(np.asarray(y, dtype=float)) - c))


def density_at(profile: DensityProfile, y, q: float = 1.0) -> float:
    """f(y)^q for a density profile (1-D tables and radial laws in any dimension)."""
    if profile.is_zero:
        return 0.0
    if profile.kind == "uniform":
        return profile.value ** q
    if profile.kind == "table":
        x = float(np.atleast_1d(y)[0])
        if x < profile.table_x[0] or x > profile.table_x[-1]:
            return 0.0
        return float(np.interp(x, profile.table_x, profile.table_f)) ** q
    r = _radius(profile, y)
    if r > profile.radius:
        return 0.0
    if r == 0.0:
        return math.inf
    value = profile.value * r ** (-profile.exponent)
    if profile.kind == "power_log":
        value *= abs(math.log(r)) ** (-profile.log_exponent)
    return value ** q


class MeasureService:
    """Ball masses and weighted ball integrals of initial data μ on Ω̄.

    Integrals near the centre c of a singular profile are split off: the
    power part of |u|^{−a}|log|u||^{−b} is integrated analytically and only
    a bounded remainder is left to adaptive quadrature. Nonlinear transforms
    of the density (Orlicz gauges) use the substitution u = e^{−s} instead.
    """

    # ------------------------------------------------------------- profiles
    @staticmethod
    def interior_profile(z, p: float, theta: float, N: int, dom: Optional[Domain] = None) -> SingularProfile:
        """Optimal interior singularity at z.

        Raises:
            HypothesisError: p < p_θ(N,0); every measure is then admissible.
            DomainError: z is not an interior point of ``dom``.
        """
        p_crit = critical_exponent(theta, N, 0.0)
        if p < p_crit and not _is_close(p, p_crit):
            raise HypothesisError(
                f"p={p:.6g} < p_θ(N,0)={p_crit:.6g}: subcritical regime, any initial measure admits a local solution",
                theorem="Theorem 1.1(i)",
            )
        if dom is not None and GeometryService.distance_to_boundary(dom, z) <= 0:
            raise DomainError(f"interior profile needs z ∈ Ω, got boundary point {z}")
        center = z if isinstance(z, (int, float)) else tuple(float(v) for v in z)
        if _is_close(p, p_crit):
            return SingularProfile(
                center=center, exponent=float(N), log_exponent=N / theta + 1, radius=0.5, locus="interior", critical=True
            )
        return SingularProfile(center=center, exponent=theta / (p - 1), radius=1.0, locus="interior")

    @staticmethod
    def boundary_profile(z, p: float, theta: float, N: int, dom: Optional[Domain] = None) -> SingularProfile:
        """Optimal boundary singularity at z ∈ ∂Ω.

        Raises:
            HypothesisError: p < p_θ(N,θ/2).
            DomainError: z does not lie on ∂Ω.
        """
        p_crit = critical_exponent(theta, N, theta / 2)
        if p < p_crit and not _is_close(p, p_crit):
            raise HypothesisError(
                f"p={p:.6g} < p_θ(N,θ/2)={p_crit:.6g}: subcritical regime, any initial measure admits a local solution",
                theorem="Theorem 1.2(i)",
            )
        if dom is not None and GeometryService.distance_to_boundary(dom, z) > 0:
            raise DomainError(f"boundary profile needs z ∈ ∂Ω, got d(z) > 0 at {z}")
        center = z if isinstance(z, (int, float)) else tuple(float(v) for v in z)
        if _is_close(p, p_crit):
            return SingularProfile(
                center=center,
                exponent=N + theta / 2,
                log_exponent=(2 * N + theta) / (2 * theta) + 1,
                radius=0.5,
                locus="boundary",
                critical=True,
            )
        return SingularProfile(center=center, exponent=theta / (p - 1), radius=1.0, locus="boundary")

    # ------------------------------------------------------------ integrals
    @staticmethod
    def ball_mass(mu: MeasureSpec, dom: Domain, z, sigma: float, theta: float) -> float:
        """μ(B_Ω(z,σ)), atoms counted in the closed ball.

        Raises:
            DomainError: z ∉ Ω̄ or σ ≤ 0.
            DivergenceError: the interior density is not integrable near its centre.
        """
        if mu.is_zero:
            GeometryService.ball_intersect(dom, z, sigma)
            return 0.0
        weight = Weight.distance_power(theta / 2) if mu.weighted else Weight.unit()
        total = MeasureService.interior_integral(mu.interior, dom, z, sigma, weight)
        total += MeasureService.boundary_integral(mu, dom, z, sigma)
        total += MeasureService.atom_mass(mu, dom, z, sigma)
        return mu.amplitude * total

    @staticmethod
    def atom_mass(mu: MeasureSpec, dom: Domain, z, sigma: float, weight: Optional[Weight] = None) -> float:
        """Σ m_i w(d(y_i)) over atoms y_i in the closed ball (amplitude excluded)."""
        zz = GeometryService.as_point(dom, z)
        total = 0.0
        for atom in mu.atoms:
            y = GeometryService.as_point(dom, atom.location)
            if np.linalg.norm(y - zz) <= sigma * (1 + POINT_TOL):
                total += atom.mass * (weight.fn(GeometryService.distance_to_boundary(dom, atom.location)) if weight else 1.0)
        return total

    @staticmethod
    def boundary_integral(
        mu: MeasureSpec,
        dom: Domain,
        z,
        sigma: float,
        q: float = 1.0,
        transform: Optional[Callable[[float], float]] = None,
    ) -> float:
        """∫_{∂Ω ∩ B(z,σ)} F(h) dS with F = h^q or ``transform`` (amplitude excluded).

        1-D: the surface measure is counting measure on the boundary points.
        Half-space: h is a radial profile about a boundary point c, and z must lie
        on the normal line through c.
        """
        F = transform if transform is not None else (lambda v: v ** q)
        if dom.kind != "half_space":
            x = float(GeometryService.as_point(dom, z)[0])
            return sum(F(h) for b, h in mu.boundary_density if h > 0 and abs(b - x) <= sigma * (1 + POINT_TOL))
        profile = mu.boundary_profile
        if profile.is_zero:
            return 0.0
        if profile.kind == "uniform":
            center = GeometryService.as_point(dom, z).copy()
            center[-1] = 0.0
            profile = profile.model_copy(update={"center": tuple(center)})
        c = np.atleast_1d(np.asarray(profile.center, dtype=float))
        if c.size != dom.dim or c[-1] != 0.0:
            raise DomainError("half-space boundary density must be centred on ∂Ω")
        zz = GeometryService.as_point(dom, z)
        if not np.allclose(zz[:-1], c[:-1], atol=POINT_TOL):
            raise DomainError("ball centres must lie on the normal line through the boundary density centre")
        if zz[-1] >= sigma:
            return 0.0
        disk = math.sqrt(sigma ** 2 - zz[-1] ** 2)
        n = dom.dim
        area = sphere_area(n - 1)
        upper = disk if profile.kind == "uniform" else min(disk, profile.radius)
        if profile.kind == "uniform":
            return area * F(profile.value) * upper ** (n - 1) / (n - 1)

        def radial(rho: float) -> float:
            value = density_at(profile.model_copy(update={"center": 0.0}), rho)
            return area * rho ** (n - 2) * F(value) if value > 0 else 0.0

        if transform is not None:
            return MeasureService._log_segment(radial, upper)
        a_eff = profile.exponent * q - (n - 2)
        b_eff = profile.log_exponent * q
        g0 = area * profile.value ** q
        return singular_integral(lambda rho: g0, g0, a_eff, b_eff, upper)

    @staticmethod
    def interior_integral(
        profile: DensityProfile,
        dom: Domain,
        z,
        sigma: float,
        weight: Weight,
        q: float = 1.0,
        transform: Optional[Callable[[float], float]] = None,
    ) -> float:
        """∫_{B_Ω(z,σ)} w(d(y)) F(f(y)) dy with F = f^q, or F = ``transform``.

        Raises:
            DivergenceError: the integrand is not integrable at the profile centre.
        """
        ball = GeometryService.ball_intersect(dom, z, sigma)
        if profile.is_zero:
            return 0.0
        if dom.kind == "half_space":
            return MeasureService._half_space_integral(profile, dom, ball, weight, q, transform)
        total = 0.0
        for lo, hi in ball.pieces:
            if profile.kind in ("power", "power_log"):
                c = float(np.atleast_1d(profile.center)[0])
                lo, hi = max(lo, c - profile.radius), min(hi, c + profile.radius)
            elif profile.kind == "table":
                lo, hi = max(lo, profile.table_x[0]), min(hi, profile.table_x[-1])
            if hi > lo:
                total += MeasureService.segment_integral(profile, dom, lo, hi, weight, q=q, transform=transform)
        return total

    @staticmethod
    def segment_integral(
        profile: DensityProfile,
        dom: Domain,
        lo: float,
        hi: float,
        weight: Weight,
        *,
        q: float = 1.0,
        transform: Optional[Callable[[float], float]] = None,
        shape: Optional[Callable[[float], float]] = None,
    ) -> float:
        """∫_lo^hi shape(y) w(d(y)) F(f(y)) dy over a segment of one component of Ω̄ (1-D)."""
        if hi <= lo or profile.is_zero:
            return 0.0
        F = transform if transform is not None else (lambda v: v ** q)
        shape_fn = shape or (lambda y: 1.0)

        def integrand(y: float) -> float:
            f = density_at(profile, y)
            if f == 0.0:
                return 0.0
            return shape_fn(y) * weight.fn(GeometryService.distance_to_boundary(dom, y)) * F(f)

        cuts = [lo, hi]
        cuts += [k for k in GeometryService.kinks(dom) if lo < k < hi]
        singular = profile.kind in ("power", "power_log") and (profile.exponent > 0 or profile.log_exponent > 0)
        c = float(np.atleast_1d(profile.center)[0]) if profile.is_radial else None
        if c is not None:
            cuts += [e for e in (c - profile.radius, c, c + profile.radius) if lo < e < hi]
        if profile.kind == "table":
            cuts += [x for x in profile.table_x if lo < x < hi]
        cuts = sorted(set(cuts))

        total = 0.0
        for u, v in zip(cuts, cuts[1:]):
            if singular and (_is_close(u, c) or _is_close(v, c)):
                side = 1.0 if _is_close(u, c) else -1.0
                total += MeasureService._singular_segment(profile, dom, c, side, v - u, weight, q, transform, shape_fn)
            else:
                value, _ = integrate_1d(integrand, u, v, epsabs=0.0)
                total += value
        return total

    @staticmethod
    def _singular_segment(profile, dom, c, side, eps, weight, q, transform, shape_fn) -> float:
        """∫_0^ε of the integrand at y = c + side·u, singular at u = 0."""
        d_c = GeometryService.distance_to_boundary(dom, c)
        at_boundary = d_c == 0.0 and weight.power != 0.0

        if transform is not None:
            def integrand(u: float) -> float:
                y = c + side * u
                f = density_at(profile, y)
                return shape_fn(y) * weight.fn(GeometryService.distance_to_boundary(dom, y)) * transform(f) if f > 0 else 0.0

            return MeasureService._log_segment(integrand, eps)

        V = profile.value ** q
        beta = weight.power if at_boundary else 0.0
        a_eff = profile.exponent * q - beta
        b_eff = profile.log_exponent * q if profile.kind == "power_log" else 0.0

        def g(u: float) -> float:
            y = c + side * u
            return shape_fn(y) * weight.fn(GeometryService.distance_to_boundary(dom, y)) * V / u ** beta

        g0 = shape_fn(c) * V * (weight.lead if at_boundary else weight.fn(d_c))
        try:
            return singular_integral(g, g0, a_eff, b_eff, eps)
        except DivergenceError as exc:
            raise DivergenceError(f"density is not integrable at its centre {c:.6g}: {exc}", where=c) from exc

    @staticmethod
    def _log_segment(integrand: Callable[[float], float], eps: float) -> float:
        """∫_0^ε G(u) du via u = e^{−s}."""
        return log_substitution_integral(lambda s: integrand(math.exp(-s)) * math.exp(-s), -math.log(eps))

    @staticmethod
    def _half_space_integral(profile, dom, ball, weight, q, transform) -> float:
        """Radial integration about the profile centre c; the ball centre z must lie on
        the normal line through c, so the angular part depends only on ρ."""
        n = dom.dim
        z = np.asarray(ball.center, dtype=float)
        if profile.kind == "table":
            raise DomainError("tabulated densities are one-dimensional")
        if profile.kind == "uniform":
            profile = profile.model_copy(update={"center": tuple(z), "radius": math.inf})
        c = np.atleast_1d(np.asarray(profile.center, dtype=float))
        if c.size != n:
            raise DomainError(f"profile centre must have {n} coordinates")
        if not np.allclose(z[:-1], c[:-1], atol=POINT_TOL):
            raise DomainError("ball centres must lie on the normal line through the profile centre")
        if c[-1] < 0:
            raise DomainError("profile centre lies outside the half-space")
        c_n, delta, sigma = float(c[-1]), float(z[-1] - c[-1]), ball.radius
        side_area = sphere_area(n - 1)
        F = transform if transform is not None else (lambda v: v ** q)

        def angular(rho: float) -> float:
            """|S^{N−2}| ∫ sin^{N−2}φ w(c_N + ρ cos φ) dφ over the admissible angles."""
            lo, hi = -1.0, 1.0
            if rho > c_n:
                lo = max(lo, -c_n / rho)
            if delta > 0:
                lo = max(lo, (rho ** 2 + delta ** 2 - sigma ** 2) / (2 * rho * delta))
            elif delta < 0:
                hi = min(hi, (rho ** 2 + delta ** 2 - sigma ** 2) / (2 * rho * delta))
            elif rho > sigma:
                return 0.0
            if lo >= hi:
                return 0.0
            phi_lo, phi_hi = math.acos(min(hi, 1.0)), math.acos(max(lo, -1.0))
            value, _ = integrate_1d(
                lambda phi: math.sin(phi) ** (n - 2) * weight.fn(max(c_n + rho * math.cos(phi), 0.0)),
                phi_lo, phi_hi, epsabs=0.0,
            )
            return side_area * value

        rho_lo = max(0.0, abs(delta) - sigma)
        rho_hi = min(profile.radius, abs(delta) + sigma)
        if rho_hi <= rho_lo:
            return 0.0
        radial_law = profile.model_copy(update={"center": 0.0})

        def integrand(rho: float) -> float:
            f = density_at(radial_law, rho)
            return rho ** (n - 1) * angular(rho) * F(f) if f > 0 else 0.0

        singular = profile.kind != "uniform" and (profile.exponent > 0 or profile.log_exponent > 0)
        if not singular or rho_lo > 0:
            value, _ = integrate_1d(integrand, rho_lo, rho_hi, epsabs=0.0, points=[c_n] if c_n > 0 else None)
            return value
        if transform is not None:
            return MeasureService._log_segment(integrand, rho_hi)
        at_boundary = c_n == 0.0 and weight.power != 0.0
        beta = weight.power if at_boundary else 0.0
        V = profile.value ** q
        if at_boundary:
            # ∫_0^{π/2} sin^{N−2}φ cos^β φ dφ
            g0 = V * weight.lead * side_area * 0.5 * special.beta((n - 1) / 2, (beta + 1) / 2)
        else:
            g0 = V * weight.fn(c_n) * sphere_area(n)
        a_eff = profile.exponent * q - (n - 1) - beta
        b_eff = profile.log_exponent * q if profile.kind == "power_log" else 0.0
        try:
            return singular_integral(lambda rho: V * angular(rho) / rho ** beta, g0, a_eff, b_eff, rho_hi, points=[c_n] if c_n > 0 else None)
        except DivergenceError as exc:
            raise DivergenceError(f"density is not integrable at its centre: {exc}", where=0.0) from exc

    @staticmethod
    def weighted_volume(dom: Domain, z, sigma: float, exponent: float) -> float:
        """∫_{B_Ω(z,σ)} d(y)^l dy (closed form in 1-D, radial quadrature on a half-space)."""
        if dom.kind == "half_space":
            uniform = DensityProfile(kind="uniform")
            return MeasureService.interior_integral(uniform, dom, z, sigma, Weight.distance_power(exponent))
        return GeometryService.weighted_volume(dom, z, sigma, exponent)

    # ----------------------------------------------------------- grid loads
    @staticmethod
    def cell_loads(mu: MeasureSpec, grid) -> tuple[np.ndarray, list[int]]:
        """c_j = ∫ ψ_j d^{−θ/2} dμ over the interior part and interior atoms.

        ψ_j is the hat of node j; next to ∂Ω the outer half-hat is replaced by
        (d/d_j)^{θ/2}, the boundary behaviour of G(x, ·, t). Boundary atoms and the
        boundary density are not included (they act through K(x,b,t)).
        Cells whose integral diverges get +inf and are returned as flagged.
        """
        half = grid.params.half
        dom = grid.domain
        loads = np.zeros(grid.size)
        flagged: list[int] = []
        if mu.is_zero:
            return loads, flagged
        base = Weight.unit() if mu.weighted else Weight.distance_power(-half)
        x, comp = grid.nodes, grid.component
        for j in range(grid.size):
            if mu.interior.is_zero:
                break
            a, b = dom.intervals[int(comp[j])]
            left = x[j - 1] if j > 0 and comp[j - 1] == comp[j] else None
            right = x[j + 1] if j + 1 < grid.size and comp[j + 1] == comp[j] else None
            try:
                total = 0.0
                if left is None:
                    total += MeasureService.segment_integral(mu.interior, dom, a, x[j], base.times_power(half, grid.distance[j]))
                else:
                    total += MeasureService.segment_integral(
                        mu.interior, dom, left, x[j], base, shape=lambda y, l=left, xj=x[j]: (y - l) / (xj - l)
                    )
                if right is None:
                    total += MeasureService.segment_integral(mu.interior, dom, x[j], b, base.times_power(half, grid.distance[j]))
                else:
                    total += MeasureService.segment_integral(
                        mu.interior, dom, x[j], right, base, shape=lambda y, r=right, xj=x[j]: (r - y) / (r - xj)
                    )
                loads[j] = total
            except DivergenceError:
                loads[j] = math.inf
                flagged.append(j)
        for atom in mu.atoms:
            y = float(np.atleast_1d(atom.location)[0])
            d = GeometryService.distance_to_boundary(dom, y)
            if d == 0:
                continue
            k = int(np.searchsorted(x, y))
            lo_j = k - 1 if k > 0 and comp[k - 1] == GeometryService.component_of(dom, y) else None
            hi_j = k if k < grid.size and comp[k] == GeometryService.component_of(dom, y) else None
            if lo_j is not None and hi_j is not None:
                w = (y - x[lo_j]) / (x[hi_j] - x[lo_j])
                loads[lo_j] += atom.mass * (1 - w) * d ** (-half)
                loads[hi_j] += atom.mass * w * d ** (-half)
            else:
                j = lo_j if lo_j is not None else hi_j
                loads[j] += atom.mass * grid.distance[j] ** (-half)
        if flagged:
            logger.warning(f"Initial datum not integrable on {len(flagged)} cells (first node x={x[flagged[0]]:.6g})")
        return mu.amplitude * loads, flagged

    @staticmethod
    def boundary_masses(mu: MeasureSpec, dom: Domain) -> dict[float, float]:
        """Boundary point → total mass concentrated there (density h plus boundary atoms), amplitude included."""
        masses: dict[float, float] = {}
        for b, h in mu.boundary_density:
            if h > 0:
                masses[b] = masses.get(b, 0.0) + h
        for atom in mu.atoms:
            y = float(np.atleast_1d(atom.location)[0])
            if GeometryService.distance_to_boundary(dom, y) == 0:
                masses[y] = masses.get(y, 0.0) + atom.mass
        return {b: mu.amplitude * m for b, m in masses.items()}
