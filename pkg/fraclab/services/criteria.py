import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional
import numpy as np
from pydantic import BaseModel, Field
from fraclab.core.config import get_settings
from fraclab.core.errors import DivergenceError, DomainError, HypothesisError
from fraclab.models import Atom, CriterionReport, Domain, MeasureSpec, OrliczGauge
from fraclab.services.geometry import GeometryService
from fraclab.services.measures import MeasureService, Weight, critical_exponent
from fraclab.utils.quadrature import log_trapezoid, power_tail

settings = get_settings()
logger = logging.getLogger(__name__)

NECESSARY = "necessary: a large value certifies nonexistence for the calibrated constant"
SUFFICIENT = "sufficient: a small value certifies existence for the calibrated constant"
# growth over three σ-decades beyond this factor is reported as unbounded
GROWTH_LIMIT = 10.0
# denominators below this are treated as underflow
TINY = 1e-300


class SearchSpec(BaseModel):
    """Sampling of the (z, σ) region searched by the criteria."""

    centers_per_component: int = Field(default_factory=lambda: settings.CENTERS_PER_COMPONENT, ge=1)
    sigma_per_decade: int = Field(default_factory=lambda: settings.SIGMA_PER_DECADE, ge=1)
    sigma_decades: int = Field(default_factory=lambda: settings.SIGMA_DECADES, ge=1)
    refine: bool = True
    workers: int = Field(default_factory=lambda: settings.WORKERS, ge=1)

    def sigmas(self, T: float, theta: float) -> np.ndarray:
        """σ_k = T^{1/θ}·10^{−k/n}, k = 1..n·decades (ascending)."""
        n = self.sigma_per_decade
        k = np.arange(n * self.sigma_decades, 0, -1)
        return T ** (1 / theta) * 10.0 ** (-k / n)


def growth_factor(profile: list[tuple[float, float]]) -> float:
    """max of the σ-profile over its lowest decade divided by its max three decades higher."""
    if not profile:
        return 1.0
    s_min = min(s for s, _ in profile)
    low = max((v for s, v in profile if s_min <= s < 10 * s_min), default=0.0)
    ref = max((v for s, v in profile if 1e3 * s_min <= s < 1e4 * s_min), default=0.0)
    if ref == 0.0:
        return math.inf if low > 0 else 1.0
    return low / ref


def verdict_for(value: float, role: str, gamma: Optional[float]) -> str:
    if gamma is None:
        return "n/a"
    if role == NECESSARY:
        return "nonexistence" if value > gamma else "inconclusive"
    return "existence" if value <= gamma else "inconclusive"


class CriteriaService:
    """Necessary and sufficient solvability conditions evaluated as functionals
    of the initial datum, with a sup over ball centres and radii."""

    def __init__(self, dom: Domain, theta: float, search: Optional[SearchSpec] = None):
        self.dom = dom
        self.theta = theta
        self.search = search or SearchSpec()

    @property
    def N(self) -> int:
        return self.dom.dim

    # --------------------------------------------------------------- search
    def interior_centers(self, mu: MeasureSpec) -> list:
        """Coarse centre grid: uniform per component, all boundary points and the focal points of μ."""
        if self.dom.kind == "half_space":
            return self._axis_centers(mu)
        n = self.search.centers_per_component
        centers: list = []
        for a, b in self.dom.clipped():
            centers.extend(a + (b - a) * (np.arange(n) + 0.5) / n)
        centers.extend(self.dom.boundary_points)
        for point in mu.focal_points():
            x = float(np.atleast_1d(point)[0])
            if GeometryService.contains_closure(self.dom, x):
                centers.append(x)
        return sorted({float(c) for c in centers})

    def boundary_centers(self, mu: MeasureSpec) -> list:
        if self.dom.kind == "half_space":
            return [self._axis_base(mu)]
        return list(self.dom.boundary_points)

    def _axis_base(self, mu: MeasureSpec) -> tuple:
        for profile in (mu.interior, mu.boundary_profile):
            if profile.is_radial:
                c = list(np.atleast_1d(np.asarray(profile.center, dtype=float)))
                return tuple(c[:-1] + [0.0])
        for atom in mu.atoms:
            c = list(np.atleast_1d(np.asarray(atom.location, dtype=float)))
            return tuple(c[:-1] + [0.0])
        return tuple([0.0] * self.N)

    def _axis_centers(self, mu: MeasureSpec) -> list:
        """Half-space centres on the normal line through the focal point of μ."""
        base = self._axis_base(mu)
        heights = {0.0}
        heights.update(float(h) for h in np.logspace(-6, 0, 25))
        if mu.interior.is_radial:
            heights.add(float(np.atleast_1d(mu.interior.center)[-1]))
        return [tuple(list(base[:-1]) + [h]) for h in sorted(heights)]

    def _refined(self, z, sigma: float) -> list:
        if self.dom.kind == "half_space":
            h = float(z[-1])
            return [tuple(list(z[:-1]) + [max(0.0, h + step * sigma)]) for step in (-0.5, -0.25, 0.25, 0.5)]
        return GeometryService.cover_centers(self.dom, z, sigma, 0.5)

    def _sweep(
        self,
        evaluate: Callable[[object, float], Optional[float]],
        centers: list,
        sigmas: np.ndarray,
        admissible: Optional[Callable[[object, float], bool]] = None,
        refine: bool = True,
    ) -> tuple[float, object, Optional[float], list[tuple[float, float]], int]:
        """sup over the (z,σ) grid, the argmax refined once with a δ = 1/2 cover."""
        work = [(z, float(s)) for s in sigmas for z in centers if admissible is None or admissible(z, s)]
        with ThreadPoolExecutor(max_workers=self.search.workers) as pool:
            values = list(pool.map(lambda item: evaluate(*item), work))
        best, witness, skipped = 0.0, (None, None), 0
        per_sigma: dict[float, float] = {float(s): 0.0 for s in sigmas}
        for (z, s), value in zip(work, values):
            if value is None:
                skipped += 1
                continue
            per_sigma[s] = max(per_sigma[s], value)
            if value > best:
                best, witness = value, (z, s)
        if refine and self.search.refine and witness[0] is not None:
            z0, s0 = witness
            for z in self._refined(z0, s0):
                if admissible is not None and not admissible(z, s0):
                    continue
                value = evaluate(z, s0)
                if value is not None and value > best:
                    best, witness = value, (z, s0)
                    per_sigma[s0] = max(per_sigma[s0], value)
        if skipped:
            logger.warning(f"Skipped {skipped} (z, σ) samples with underflowing denominators")
        return best, witness[0], witness[1], sorted(per_sigma.items()), skipped

    def _check_horizon(self, T: float, t_star: Optional[float]) -> None:
        if not T > 0:
            raise DomainError(f"horizon T must be positive, got {T}")
        if t_star is not None and T > t_star * (1 + 1e-12):
            raise HypothesisError(f"T={T:.6g} exceeds T_*={t_star:.6g}", theorem="Theorem 3.1")

    def _report(self, kind, role, T, p, mu, search_result, gamma, **details) -> CriterionReport:
        value, z, sigma, profile, skipped = search_result
        factor = growth_factor(profile)
        report = CriterionReport(
            kind=kind,
            value=value,
            threshold_role=role,
            T=T,
            p=p,
            theta=self.theta,
            kappa=mu.amplitude,
            witness_z=z,
            witness_sigma=sigma,
            sigma_profile=profile,
            growth_factor=factor,
            unbounded=factor >= GROWTH_LIMIT or math.isinf(value),
            skipped=skipped,
            details=details,
        )
        report.verdict = verdict_for(value, role, gamma)
        logger.info(f"{kind}: value={value:.6g}, growth={factor:.3g}, verdict={report.verdict}")
        return report

    def _divergent(self, kind, role, T, p, mu, exc: DivergenceError, gamma) -> CriterionReport:
        logger.warning(f"{kind}: {exc}")
        report = CriterionReport(
            kind=kind, value=math.inf, threshold_role=role, T=T, p=p, theta=self.theta,
            kappa=mu.amplitude, growth_factor=math.inf, unbounded=True, details={"divergence": str(exc)},
        )
        report.verdict = verdict_for(math.inf, role, gamma)
        return report

    # ----------------------------------------------------------- necessary
    def necessary_subcritical(
        self, mu: MeasureSpec, p: float, T: float, *, gamma: Optional[float] = None, t_star: Optional[float] = None
    ) -> CriterionReport:
        """sup_{z,σ} μ(B_Ω(z,σ)) / (σ^{−θ/(p−1)} ∫_{B_Ω(z,σ)} d^{θ/2} dy) over σ < T^{1/θ}."""
        self._check_horizon(T, t_star)
        kind = "necessary_subcritical"
        th = self.theta
        if mu.is_zero:
            return self._report(kind, NECESSARY, T, p, mu, (0.0, None, None, [], 0), gamma)

        def evaluate(z, sigma: float) -> Optional[float]:
            denominator = sigma ** (-th / (p - 1)) * MeasureService.weighted_volume(self.dom, z, sigma, th / 2)
            if denominator <= TINY:
                return None
            return MeasureService.ball_mass(mu, self.dom, z, sigma, th) / denominator

        try:
            result = self._sweep(evaluate, self.interior_centers(mu), self.search.sigmas(T, th))
        except DivergenceError as exc:
            return self._divergent(kind, NECESSARY, T, p, mu, exc, gamma)
        return self._report(kind, NECESSARY, T, p, mu, result, gamma)

    def necessary_critical(
        self,
        mu: MeasureSpec,
        p: float,
        T: float,
        locus: str = "interior",
        *,
        gamma: Optional[float] = None,
        t_star: Optional[float] = None,
    ) -> CriterionReport:
        """Log-corrected necessary conditions at the critical exponents.

        interior: sup over d(z) ≥ 3σ of d(z)^{−θ/2} μ(B_Ω(z,σ)) / [log(e+√T/σ)]^{−N/θ};
        boundary: sup over z ∈ ∂Ω of μ(B_Ω(z,σ)) / [log(e+T^{1/θ}/σ)]^{−(2N+θ)/(2θ)}.

        Raises:
            HypothesisError: p is not the critical exponent of the locus.
        """
        self._check_horizon(T, t_star)
        th, N = self.theta, self.N
        l = 0.0 if locus == "interior" else th / 2
        if locus not in ("interior", "boundary"):
            raise DomainError(f"unknown locus {locus!r}")
        p_crit = critical_exponent(th, N, l)
        if not math.isclose(p, p_crit, rel_tol=1e-9):
            raise HypothesisError(
                f"{locus} critical condition needs p = p_θ(N,{l:g}) = {p_crit:.6g}, got {p:.6g}",
                theorem="Theorem 3.1(i)" if locus == "interior" else "Theorem 3.1(ii)",
            )
        kind = f"necessary_critical_{locus}"
        if mu.is_zero:
            return self._report(kind, NECESSARY, T, p, mu, (0.0, None, None, [], 0), gamma)

        if locus == "interior":
            def evaluate(z, sigma: float) -> Optional[float]:
                dz = GeometryService.distance_to_boundary(self.dom, z)
                log_factor = math.log(math.e + math.sqrt(T) / sigma) ** (-N / th)
                return dz ** (-th / 2) * MeasureService.ball_mass(mu, self.dom, z, sigma, th) / log_factor

            def admissible(z, sigma: float) -> bool:
                return GeometryService.distance_to_boundary(self.dom, z) >= 3 * sigma

            centers = [z for z in self.interior_centers(mu) if GeometryService.distance_to_boundary(self.dom, z) > 0]
        else:
            def evaluate(z, sigma: float) -> Optional[float]:
                log_factor = math.log(math.e + T ** (1 / th) / sigma) ** (-(2 * N + th) / (2 * th))
                return MeasureService.ball_mass(mu, self.dom, z, sigma, th) / log_factor

            admissible = None
            centers = self.boundary_centers(mu)
        try:
            # boundary centres are not refined: the cover would leave ∂Ω
            result = self._sweep(evaluate, centers, self.search.sigmas(T, th), admissible, refine=locus == "interior")
        except DivergenceError as exc:
            return self._divergent(kind, NECESSARY, T, p, mu, exc, gamma)
        return self._report(kind, NECESSARY, T, p, mu, result, gamma)

    # ----------------------------------------------------------- sufficient
    def inner_sup(self, mu: MeasureSpec, s: float) -> tuple[float, object]:
        """sup_z ∫_{B_Ω(z,s^{1/θ})} dμ(y) / (d(y)^{θ/2} + √s)."""
        th = self.theta
        radius = s ** (1 / th)
        weight = Weight.boundary_factor(th, s) if mu.weighted else Weight.inverse_sum(th, s)
        atom_weight = Weight.inverse_sum(th, s)
        root = math.sqrt(s)

        def evaluate(z) -> float:
            total = MeasureService.interior_integral(mu.interior, self.dom, z, radius, weight)
            total += MeasureService.boundary_integral(mu, self.dom, z, radius) / root
            total += MeasureService.atom_mass(mu, self.dom, z, radius, atom_weight)
            return mu.amplitude * total

        centers = self.interior_centers(mu)
        with ThreadPoolExecutor(max_workers=self.search.workers) as pool:
            values = list(pool.map(evaluate, centers))
        k = int(np.argmax(values))
        return float(values[k]), centers[k]

    def sufficient_kernel_integral(
        self, mu: MeasureSpec, p: float, T: float, *, gamma: Optional[float] = None, t_star: Optional[float] = None
    ) -> CriterionReport:
        """∫_0^T s^{−(N/θ)(p−1)} (sup_z ∫_{B_Ω(z,s^{1/θ})} dμ/(d^{θ/2}+√s))^{p−1} ds.

        The s-integral is a log-trapezoid rule on the σ-grid mapped to s = σ^θ,
        closed by a power-law tail below the smallest sample.

        Raises:
            DivergenceError: the inner sup diverges at some s, or the integrand is
                not integrable at s = 0.
        """
        self._check_horizon(T, t_star)
        kind = "sufficient_kernel_integral"
        th, N = self.theta, self.N
        if mu.is_zero:
            return self._report(kind, SUFFICIENT, T, p, mu, (0.0, None, None, [], 0), gamma)
        s_grid = np.append(self.search.sigmas(T, th) ** th, T)
        integrand, witnesses = [], []
        for s in s_grid:
            try:
                sup, z = self.inner_sup(mu, float(s))
            except DivergenceError as exc:
                raise DivergenceError(f"inner sup diverges at s={s:.6g}: {exc}", where=float(s)) from exc
            integrand.append(s ** (-(N / th) * (p - 1)) * sup ** (p - 1))
            witnesses.append(z)
        integrand = np.asarray(integrand)
        head = log_trapezoid(s_grid, integrand)
        tail = power_tail(integrand[0], integrand[1], s_grid[0], s_grid[1], upper=False)
        value = head + tail
        k = int(np.argmax(integrand * s_grid))
        profile = [(float(si ** (1 / th)), float(v * si)) for si, v in zip(s_grid, integrand)]
        return self._report(
            kind, SUFFICIENT, T, p, mu,
            (value, witnesses[k], float(s_grid[k] ** (1 / th)), profile, 0), gamma,
            tail=tail,
        )

    def sufficient_qnorm(
        self, mu: MeasureSpec, p: float, q: float, T: float, *, gamma: Optional[float] = None, t_star: Optional[float] = None
    ) -> CriterionReport:
        """Power-gauge sufficient condition.

        interior: sup_z ∫_{B_Ω(z,σ)} D(y,σ^θ) f^q dy / σ^{N − θq/(p−1)};
        boundary: sup_{z∈∂Ω} ∫_{B_Ω(z,σ)∩∂Ω} h^q dS / σ^{N−1+θq(1/2+1/θ−1/(p−1))}.
        The reported value is the larger of the two sups over σ.

        Raises:
            DomainError: q ≤ 1.
            HypothesisError: h ≢ 0 while p ≥ p_θ(1,θ/2).
        """
        self._check_horizon(T, t_star)
        th, N = self.theta, self.N
        if q <= 1:
            raise DomainError(f"q must exceed 1, got {q}")
        if mu.has_boundary_part and p >= critical_exponent(th, 1, th / 2):
            raise HypothesisError(
                f"h ≠ 0 requires p < p_θ(1,θ/2) = {critical_exponent(th, 1, th / 2):.6g}", theorem="Theorem 4.3"
            )
        kind = "sufficient_qnorm"
        if mu.is_zero:
            return self._report(kind, SUFFICIENT, T, p, mu, (0.0, None, None, [], 0), gamma, q=q)
        kappa_q = mu.amplitude ** q

        def interior(z, sigma: float) -> float:
            weight = Weight.boundary_factor(th, sigma ** th)
            value = MeasureService.interior_integral(mu.interior, self.dom, z, sigma, weight, q=q)
            return kappa_q * value / sigma ** (N - th * q / (p - 1))

        def boundary(z, sigma: float) -> float:
            value = MeasureService.boundary_integral(mu, self.dom, z, sigma, q=q)
            return kappa_q * value / sigma ** (N - 1 + th * q * (0.5 + 1 / th - 1 / (p - 1)))

        sigmas = self.search.sigmas(T, th)
        try:
            inner = self._sweep(interior, self.interior_centers(mu), sigmas)
            outer = (0.0, None, None, [], 0)
            if mu.has_boundary_part:
                outer = self._sweep(boundary, self.boundary_centers(mu), sigmas, refine=False)
        except DivergenceError as exc:
            return self._divergent(kind, SUFFICIENT, T, p, mu, exc, gamma)
        result = inner if inner[0] >= outer[0] else outer
        return self._report(kind, SUFFICIENT, T, p, mu, result, gamma, q=q, interior=inner[0], boundary=outer[0])

    def sufficient_log(
        self,
        mu: MeasureSpec,
        p: float,
        r: float,
        T: float,
        locus: str = "interior",
        l: float = 0.0,
        *,
        gamma: Optional[float] = None,
        t_star: Optional[float] = None,
    ) -> CriterionReport:
        """Log-refined sufficient conditions at the critical exponents, Φ(τ) = τ[log(e+τ)]^r.

        interior (weight d^l, l ∈ {0, θ/2}, p = p_θ(N,l)):
            sup_z ∫_{B_Ω(z,σ)} d^l Φ(T^{1/(p−1)} f) dy / (T^{(N+l)/θ} [log(e+T^{1/θ}/σ)]^{r−(N+l)/θ});
        boundary (p = p_θ(N,θ/2) < p_θ(1,θ/2), so N ≥ 2):
            sup_{z∈∂Ω} ∫_{B_Ω(z,σ)∩∂Ω} Φ(T^{1/(p−1)} h) dS / (T^{(N−1)/θ} [log(e+T^{1/θ}/σ)]^{r−(2N+θ)/(2θ)}).

        Raises:
            DomainError: r ≤ 0 or unknown locus.
            HypothesisError: p is off-critical for the locus.
        """
        self._check_horizon(T, t_star)
        th, N = self.theta, self.N
        if r <= 0:
            raise DomainError(f"r must be positive, got {r}")
        if locus == "interior":
            if not (math.isclose(l, 0.0) or math.isclose(l, th / 2)):
                raise DomainError(f"l must be 0 or θ/2, got {l}")
            p_crit = critical_exponent(th, N, l)
            theorem = "Theorem 4.4"
        elif locus == "boundary":
            l = th / 2
            p_crit = critical_exponent(th, N, l)
            if not p_crit < critical_exponent(th, 1, th / 2):
                raise HypothesisError(
                    f"boundary log condition needs p_θ(N,θ/2) < p_θ(1,θ/2), which fails for N={N}", theorem="Theorem 4.5"
                )
            theorem = "Theorem 4.5"
        else:
            raise DomainError(f"unknown locus {locus!r}")
        if not math.isclose(p, p_crit, rel_tol=1e-9):
            raise HypothesisError(f"needs p = {p_crit:.6g}, got {p:.6g}", theorem=theorem)
        kind = f"sufficient_log_{locus}"
        if mu.is_zero:
            return self._report(kind, SUFFICIENT, T, p, mu, (0.0, None, None, [], 0), gamma, r=r, l=l)

        phi = OrliczGauge(kind="log_refined", parameter=r, p=p)
        scale = T ** (1 / (p - 1)) * mu.amplitude

        def transform(v: float) -> float:
            return float(phi.psi(scale * v))

        if locus == "interior":
            weight = Weight.distance_power(l)

            def evaluate(z, sigma: float) -> float:
                rhs = T ** ((N + l) / th) * math.log(math.e + T ** (1 / th) / sigma) ** (r - (N + l) / th)
                return MeasureService.interior_integral(mu.interior, self.dom, z, sigma, weight, transform=transform) / rhs

            centers = self.interior_centers(mu)
        else:
            def evaluate(z, sigma: float) -> float:
                rhs = T ** ((N - 1) / th) * math.log(math.e + T ** (1 / th) / sigma) ** (r - (2 * N + th) / (2 * th))
                return MeasureService.boundary_integral(mu, self.dom, z, sigma, transform=transform) / rhs

            centers = self.boundary_centers(mu)
        try:
            result = self._sweep(evaluate, centers, self.search.sigmas(T, th), refine=locus == "interior")
        except DivergenceError as exc:
            return self._divergent(kind, SUFFICIENT, T, p, mu, exc, gamma)
        return self._report(kind, SUFFICIENT, T, p, mu, result, gamma, r=r, l=l)

    def dirac_boundary(self, kappa: float, z, p: float, T: float) -> CriterionReport:
        """μ = κδ_z with z ∈ ∂Ω: no local solution when p ≥ p_θ(N,θ/2); otherwise a
        local solution exists, with the kernel-integral condition as evidence."""
        if GeometryService.distance_to_boundary(self.dom, z) != 0:
            raise DomainError(f"{z} is not a boundary point")
        mu = MeasureSpec(atoms=(Atom(location=z, mass=1.0),), amplitude=kappa)
        p_crit = critical_exponent(self.theta, self.N, self.theta / 2)
        kind = "dirac_boundary"
        if p >= p_crit:
            report = CriterionReport(
                kind=kind, value=math.inf, threshold_role=NECESSARY, T=T, p=p, theta=self.theta, kappa=kappa,
                witness_z=z, unbounded=True, verdict="nonexistence",
                details={"critical_exponent": p_crit},
            )
            logger.info(f"{kind}: p={p:.6g} ≥ {p_crit:.6g}, no local solution for any κ > 0")
            return report
        evidence = self.sufficient_kernel_integral(mu, p, T)
        evidence.kind = kind
        evidence.verdict = "existence"
        evidence.details["critical_exponent"] = p_crit
        return evidence
