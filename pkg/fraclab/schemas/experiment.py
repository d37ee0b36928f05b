import logging
import math
from pathlib import Path
from typing import Literal, Optional
from pydantic import BaseModel, ConfigDict, Field, field_validator
from fraclab.core.config import get_settings
from fraclab.core.errors import DomainError, HypothesisError
from fraclab.models import Atom, DensityProfile, Domain, MeasureSpec, StableParams
from fraclab.services.criteria import SearchSpec
from fraclab.services.dirichlet_kernel import KernelSampleSpec
from fraclab.services.geometry import GeometryService
from fraclab.services.measures import MeasureService, critical_exponent

settings = get_settings()
logger = logging.getLogger(__name__)

Pipeline = Literal["kernel-diagnostics", "condition-sweep", "picard-run", "kappa-star", "calibrate-constants"]
PIPELINES: tuple[str, ...] = ("kernel-diagnostics", "condition-sweep", "picard-run", "kappa-star", "calibrate-constants")
# pipelines that need the assembled 1-D Dirichlet kernel
GRID_PIPELINES = ("kernel-diagnostics", "picard-run", "kappa-star", "calibrate-constants")

Criterion = Literal[
    "necessary_subcritical",
    "necessary_critical",
    "sufficient_kernel_integral",
    "sufficient_qnorm",
    "sufficient_log",
    "dirac_boundary",
]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DomainConfig(_Section):
    kind: Literal["interval_union", "half_space"] = "interval_union"
    intervals: tuple[tuple[float, float], ...] = ((0.0, 1.0),)
    dim: Optional[int] = Field(default=None, ge=1)
    truncation_radius: float = Field(default=50.0, gt=0.0)


class ModelConfig(_Section):
    theta: float = Field(default=1.0, gt=0.0, lt=2.0)
    N: int = Field(default=1, ge=1)
    p: float = Field(default=3.0, gt=1.0)


class GridConfig(_Section):
    M: int = Field(default=512, ge=16, le=4096)


class MeasureConfig(_Section):
    """Initial datum. ``density`` selects the interior part; the optimal profiles
    are generated from (model.p, model.theta, model.N) at ``center``."""

    density: Literal[
        "none", "uniform", "power", "power_log", "table", "interior_profile", "boundary_profile"
    ] = "none"
    center: float | tuple[float, ...] = 0.5
    exponent: float = Field(default=0.0, ge=0.0)
    log_exponent: float = Field(default=0.0, ge=0.0)
    radius: float = Field(default=1.0, gt=0.0)
    value: float = Field(default=1.0, ge=0.0)
    table_x: tuple[float, ...] = ()
    table_f: tuple[float, ...] = ()
    weighted: bool = True
    # (b, h(b)) pairs on a 1-D boundary
    boundary: tuple[tuple[float, float], ...] = ()
    # radial h = value·|y − c|^{−a} on ∂R^N_+
    boundary_power: Optional[float] = Field(default=None, ge=0.0)
    boundary_center: float | tuple[float, ...] = 0.0
    boundary_radius: float = Field(default=1.0, gt=0.0)
    # (location, mass) pairs
    atoms: tuple[tuple[float | tuple[float, ...], float], ...] = ()
    amplitude: float = Field(default=1.0, ge=0.0)

    @property
    def is_profile(self) -> bool:
        return self.density in ("interior_profile", "boundary_profile")

    def build(self, model: ModelConfig, dom: Domain) -> MeasureSpec:
        """The MeasureSpec described by this section.

        Raises:
            HypothesisError: an optimal profile was requested in the subcritical regime.
            DomainError: profile centre on the wrong side of ∂Ω.
        """
        if self.density == "interior_profile":
            interior = MeasureService.interior_profile(self.center, model.p, model.theta, model.N, dom).to_density()
        elif self.density == "boundary_profile":
            interior = MeasureService.boundary_profile(self.center, model.p, model.theta, model.N, dom).to_density()
        else:
            interior = DensityProfile(
                kind=self.density,
                center=self.center,
                exponent=self.exponent,
                log_exponent=self.log_exponent,
                radius=self.radius,
                value=self.value,
                table_x=self.table_x,
                table_f=self.table_f,
            )
        boundary_profile = DensityProfile()
        if self.boundary_power is not None:
            boundary_profile = DensityProfile(
                kind="power", center=self.boundary_center, exponent=self.boundary_power,
                radius=self.boundary_radius, value=self.value,
            )
        return MeasureSpec(
            interior=interior,
            weighted=self.weighted or self.is_profile,
            boundary_density=self.boundary,
            boundary_profile=boundary_profile,
            atoms=tuple(Atom(location=loc, mass=m) for loc, m in self.atoms),
            amplitude=self.amplitude,
        )


class CriteriaConfig(_Section):
    select: tuple[Criterion, ...] = ("necessary_subcritical", "sufficient_kernel_integral")
    q: float = 2.0
    r: float = 0.5
    locus: Literal["interior", "boundary"] = "interior"
    l: float = Field(default=0.0, ge=0.0)
    T: Optional[float] = Field(default=None, gt=0.0)
    # amplitudes swept by condition-sweep; empty means measure.amplitude only
    kappas: tuple[float, ...] = ()
    search: SearchSpec = Field(default_factory=SearchSpec)

    @field_validator("select", mode="before")
    @classmethod
    def _one_or_many(cls, value):
        return (value,) if isinstance(value, str) else value


class SolverConfig(_Section):
    max_iter: int = Field(default_factory=lambda: settings.PICARD_MAX_ITER, ge=1)
    tol: float = Field(default_factory=lambda: settings.PICARD_TOL, gt=0.0)
    overflow: float = Field(default_factory=lambda: settings.OVERFLOW_CEILING, gt=1.0)
    T: Optional[float] = Field(default=None, gt=0.0)
    schedule: tuple[float, ...] = ()
    schedule_length: int = Field(default_factory=lambda: settings.T_SCHEDULE_LENGTH, ge=1)
    tol_kappa: float = Field(default=0.05, gt=0.0, lt=1.0)
    kappa0: float = Field(default=1.0, gt=0.0)
    ceiling: float = Field(default=1e6, gt=1.0)
    # amplitudes of picard-run; empty means measure.amplitude only
    kappas: tuple[float, ...] = ()
    # exponents of the κ* vs p curve; empty means model.p only
    p_values: tuple[float, ...] = ()

    @field_validator("schedule")
    @classmethod
    def _decreasing(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if any(t <= 0 for t in value):
            raise ValueError("horizons must be positive")
        return tuple(sorted(value, reverse=True))


class ExperimentConfig(_Section):
    """Validated experiment description.

    Every theorem hypothesis a selected pipeline relies on is checked by
    ``validate_pipeline`` before any computation starts.
    """

    pipeline: Optional[Pipeline] = None
    domain: DomainConfig = Field(default_factory=DomainConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    measure: MeasureConfig = Field(default_factory=MeasureConfig)
    criteria: CriteriaConfig = Field(default_factory=CriteriaConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    kernel: KernelSampleSpec = Field(default_factory=KernelSampleSpec)
    output_dir: Optional[Path] = None
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default_factory=lambda: settings.WORKERS, ge=1)

    @field_validator("domain", mode="before")
    @classmethod
    def _domain_shorthand(cls, value):
        """``domain = (0, 1)``, ``domain = ((0, 1), (2, 3))``, ``domain = half_space`` or ``half_space:N``."""
        if isinstance(value, str):
            name, _, dim = value.replace("-", "_").partition(":")
            if name.strip() == "half_space":
                return {"kind": "half_space", "dim": int(dim)} if dim.strip() else {"kind": "half_space"}
            raise ValueError(f"unknown domain {value!r}")
        if isinstance(value, (tuple, list)):
            if len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
                return {"intervals": (tuple(value),)}
            return {"intervals": tuple(tuple(v) for v in value)}
        return value

    # --------------------------------------------------------------- builders
    def params(self) -> StableParams:
        return StableParams(dim=self.model.N, order=self.model.theta)

    def domain_model(self) -> Domain:
        if self.domain.dim is not None and self.domain.dim != self.model.N:
            raise DomainError(f"domain dimension {self.domain.dim} differs from model.N={self.model.N}")
        if self.domain.kind == "half_space":
            return Domain.half_space(self.model.N, truncation_radius=self.domain.truncation_radius)
        if self.model.N != 1:
            raise DomainError(f"interval unions need N = 1, got N={self.model.N}")
        return Domain(intervals=self.domain.intervals, truncation_radius=self.domain.truncation_radius)

    def measure_spec(self) -> MeasureSpec:
        return self.measure.build(self.model, self.domain_model())

    def search_spec(self) -> SearchSpec:
        return self.criteria.search.model_copy(update={"workers": self.workers})

    def kernel_spec(self) -> KernelSampleSpec:
        return self.kernel.model_copy(update={"seed": self.seed})

    # ------------------------------------------------------------- validation
    def validate_pipeline(self, pipeline: str) -> None:
        """Check the hypotheses the given pipeline needs.

        Raises:
            HypothesisError: a theorem hypothesis fails, named in the message.
            DomainError: any other precondition fails.
        """
        if pipeline not in PIPELINES:
            raise DomainError(f"unknown pipeline {pipeline!r}")
        dom = self.domain_model()
        th, N, p = self.model.theta, self.model.N, self.model.p
        if pipeline in GRID_PIPELINES and not (dom.kind == "interval_union" and dom.is_bounded):
            raise DomainError(f"{pipeline} discretizes the kernel and needs a bounded 1-D domain")
        if pipeline == "kernel-diagnostics":
            return
        mu = self.measure_spec()
        for atom in mu.atoms:
            if GeometryService.distance_to_boundary(dom, atom.location) == 0 and p >= critical_exponent(th, N, th / 2):
                logger.warning(
                    f"boundary atom at {atom.location} with p ≥ p_θ(N,θ/2)={critical_exponent(th, N, th / 2):.6g}: "
                    "no local-in-time solution exists"
                )
        if pipeline == "condition-sweep":
            self._validate_criteria(dom, mu)
        if pipeline == "kappa-star":
            if not self.measure.is_profile:
                raise DomainError("kappa-star sweeps an optimal profile: set measure.density to interior_profile or boundary_profile")
            for q in self.solver.p_values:
                locus_exponent = 0.0 if self.measure.density == "interior_profile" else th / 2
                if q <= 1:
                    raise DomainError(f"solver.p_values must exceed 1, got {q}")
                if q < critical_exponent(th, N, locus_exponent):
                    raise HypothesisError(
                        f"p={q:.6g} is subcritical for the {self.measure.density.split('_')[0]} profile",
                        theorem="Theorem 1.1(i)" if locus_exponent == 0 else "Theorem 1.2(i)",
                    )
        if pipeline == "picard-run" and p < critical_exponent(th, N, 0.0):
            logger.info(f"p={p:g} is subcritical: every amplitude admits a local solution")

    def _validate_criteria(self, dom: Domain, mu: MeasureSpec) -> None:
        th, N, p = self.model.theta, self.model.N, self.model.p
        crit = self.criteria
        for name in crit.select:
            if name == "sufficient_qnorm":
                if crit.q <= 1:
                    raise DomainError(f"criteria.q must exceed 1, got {crit.q}")
                if mu.has_boundary_part and p >= critical_exponent(th, 1, th / 2):
                    raise HypothesisError("h ≠ 0 requires p < p_θ(1,θ/2)", theorem="Theorem 4.3")
            elif name == "necessary_critical":
                l = 0.0 if crit.locus == "interior" else th / 2
                if not math.isclose(p, critical_exponent(th, N, l), rel_tol=1e-9):
                    raise HypothesisError(
                        f"{crit.locus} critical condition needs p = p_θ(N,{l:g}) = {critical_exponent(th, N, l):.6g}",
                        theorem="Theorem 3.1",
                    )
            elif name == "sufficient_log":
                self._validate_log(N, th, p)
            elif name == "dirac_boundary":
                if GeometryService.distance_to_boundary(dom, self.measure.center) != 0:
                    raise DomainError(f"dirac_boundary needs measure.center on ∂Ω, got {self.measure.center}")

    def _validate_log(self, N: int, th: float, p: float) -> None:
        crit = self.criteria
        if crit.r <= 0:
            raise DomainError(f"criteria.r must be positive, got {crit.r}")
        if crit.locus == "interior":
            if not (math.isclose(crit.l, 0.0) or math.isclose(crit.l, th / 2)):
                raise DomainError(f"criteria.l must be 0 or θ/2, got {crit.l}")
            if crit.r >= (N + crit.l) / th:
                raise HypothesisError(
                    f"r={crit.r:g} must lie in (0, (N+l)/θ) = (0, {(N + crit.l) / th:.6g})", theorem="Theorem 4.4"
                )
            if not math.isclose(p, critical_exponent(th, N, crit.l), rel_tol=1e-9):
                raise HypothesisError(f"needs p = p_θ(N,l) = {critical_exponent(th, N, crit.l):.6g}", theorem="Theorem 4.4")
        else:
            p_crit = critical_exponent(th, N, th / 2)
            if not p_crit < critical_exponent(th, 1, th / 2):
                raise HypothesisError(f"boundary log condition needs p_θ(N,θ/2) < p_θ(1,θ/2), fails for N={N}", theorem="Theorem 4.5")
            if not math.isclose(p, p_crit, rel_tol=1e-9):
                raise HypothesisError(f"needs p = p_θ(N,θ/2) = {p_crit:.6g}", theorem="Theorem 4.5")
            if crit.r >= (2 * N + th) / (2 * th):
                raise HypothesisError(
                    f"r={crit.r:g} must lie below (2N+θ)/(2θ) = {(2 * N + th) / (2 * th):.6g}", theorem="Theorem 4.5"
                )
