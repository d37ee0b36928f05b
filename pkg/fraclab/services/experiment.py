import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Optional
import numpy as np
from fraclab.core.config import get_settings
from fraclab.core.errors import ConsistencyError, DivergenceError
from fraclab.core.ledger import load_constants, write_constants
from fraclab.models import (
    CriterionReport,
    DensityProfile,
    DirichletKernelGrid,
    Domain,
    KappaBracket,
    MeasureSpec,
    StableParams,
)
from fraclab.schemas.experiment import ExperimentConfig
from fraclab.services.criteria import NECESSARY, SUFFICIENT, CriteriaService, verdict_for
from fraclab.services.dirichlet_kernel import DirichletKernelService
from fraclab.services.measures import MeasureService, critical_exponent
from fraclab.services.picard import PicardService, default_schedule, fitted_inequality_constant
from fraclab.services.stable_kernel import StableKernelService
from fraclab.utils.csvio import write_csv

settings = get_settings()
logger = logging.getLogger(__name__)

# main artifact stem of each pipeline, in report order
ARTIFACTS: dict[str, str] = {
    "kernel-diagnostics": "kernel_diagnostics",
    "condition-sweep": "criteria",
    "picard-run": "picard_runs",
    "kappa-star": "kappa_star",
    "calibrate-constants": "calibration",
}
# companion artifacts each pipeline writes next to its main file
COMPANIONS: dict[str, tuple[str, ...]] = {
    "kernel-diagnostics": ("stable_kernel", "kernel_cross_section"),
    "condition-sweep": ("criteria_profiles",),
    "picard-run": ("picard_trace",),
    "kappa-star": (),
    "calibrate-constants": ("consistency",),
}
CRITERIA_HEADER = (
    "kind", "p", "theta", "T", "kappa", "value", "witness_z", "witness_sigma", "verdict", "growth_factor", "unbounded",
)
KAPPA_HEADER = (
    "p", "theta", "profile", "z", "kappa_lo", "kappa_hi", "T_used",
    "certified", "necessary_ratio_hi", "gamma1", "unbounded_above",
)
# ledger key of the calibrated threshold of each criterion kind
GAMMA_KEYS: dict[str, str] = {
    "necessary_subcritical": "gamma1",
    "necessary_critical_interior": "gamma1_interior_critical",
    "necessary_critical_boundary": "gamma1_boundary_critical",
    "sufficient_kernel_integral": "gamma",
    "sufficient_qnorm": "gamma_qnorm",
}
# reference family of the calibration: θ = 1, N = 1, Ω = (0, 1)
REFERENCE_P = 3.0
REFERENCE_CENTER = 0.5
INEQUALITY_GRID = ((0.0, 2.0), (0.5, 2.0), (2.0, 2.0), (0.0, 3.0), (2.0, 3.0))


def _flatten(data: dict[str, Any], prefix: str = "") -> list[tuple[str, Any]]:
    rows: list[tuple[str, Any]] = []
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            rows.extend(_flatten(value, f"{name}."))
        else:
            rows.append((name, value))
    return rows


def criterion_row(report: CriterionReport) -> tuple:
    return (
        report.kind, report.p, report.theta, report.T, report.kappa, report.value,
        report.witness_z, report.witness_sigma, report.verdict, report.growth_factor, report.unbounded,
    )


class ExperimentService:
    """Runs one configured pipeline and writes its CSV artifacts.

    Work items (amplitudes, horizons, exponents) are sharded over a bounded
    thread pool; the assembled kernel grid is shared read-only.
    """

    def __init__(self, config: ExperimentConfig, out: Optional[Path] = None, ledger: Optional[Path] = None):
        self.config = config
        self.out = Path(out or config.output_dir or settings.OUTPUT_DIR)
        self.ledger = Path(ledger or settings.CONSTANTS_LEDGER)
        self._grid: Optional[DirichletKernelGrid] = None

    # ----------------------------------------------------------------- shared
    @property
    def grid(self) -> DirichletKernelGrid:
        if self._grid is None:
            cfg = self.config
            self._grid = DirichletKernelService.assemble_operator(cfg.domain_model(), cfg.grid.M, cfg.params())
        return self._grid

    def picard(self, grid: Optional[DirichletKernelGrid] = None) -> PicardService:
        solver = self.config.solver
        return PicardService(grid or self.grid, tol=solver.tol, max_iter=solver.max_iter, overflow=solver.overflow)

    def schedule(self, grid: Optional[DirichletKernelGrid] = None) -> list[float]:
        solver = self.config.solver
        if solver.schedule:
            return list(solver.schedule)
        return default_schedule((grid or self.grid).T_star, solver.schedule_length)

    def constants(self) -> dict[str, Any]:
        return load_constants(self.ledger)

    def gamma(self, kind: str, constants: dict[str, Any]) -> Optional[float]:
        key = GAMMA_KEYS.get(kind)
        return constants.get(key) if key else None

    def _write(self, stem: str, header, rows) -> Path:
        path = write_csv(self.out / f"{stem}.csv", header, rows)
        logger.info(f"Wrote {path}")
        return path

    def _write_parameters(self, pipeline: str) -> Path:
        data = self.config.model_dump(mode="json", exclude={"output_dir"})
        data["pipeline"] = pipeline
        return self._write(f"{ARTIFACTS[pipeline]}_parameters", ("key", "value"), _flatten(data))

    # -------------------------------------------------------------- run
    def run(self, pipeline: str) -> list[Path]:
        """Validate, execute one pipeline and write its artifacts.

        Returns:
            Paths of the artifacts written.

        Raises:
            HypothesisError: a theorem hypothesis of the pipeline fails.
            LabError: any numerical failure, surfaced unchanged.
        """
        self.config.validate_pipeline(pipeline)
        logger.info(f"Running {pipeline} into {self.out} (seed={self.config.seed}, workers={self.config.workers})")
        self.out.mkdir(parents=True, exist_ok=True)
        runners: dict[str, Callable[[], list[Path]]] = {
            "kernel-diagnostics": self.kernel_diagnostics,
            "condition-sweep": self.condition_sweep,
            "picard-run": self.picard_run,
            "kappa-star": self.kappa_star,
            "calibrate-constants": self.calibrate_constants,
        }
        paths = runners[pipeline]()
        paths.append(self._write_parameters(pipeline))
        return paths

    # ------------------------------------------------------------ pipelines
    def kernel_diagnostics(self) -> list[Path]:
        grid = self.grid
        report = DirichletKernelService.kernel_diagnostics(grid, self.config.kernel_spec())
        sub_markov_limit, ck_limit = 1 + 5e-3, 1e-3
        rows: list[tuple] = [("symmetry", None, None, report.symmetry_error, 0.0, report.symmetry_error > 0.0)]
        rows += [("sub_markov", t, None, m, sub_markov_limit, m > sub_markov_limit) for t, m in report.sub_markov]
        rows += [("chapman_kolmogorov", t, s, r, ck_limit, r > ck_limit) for t, s, r in report.chapman_kolmogorov]
        tol = 1 + self.config.kernel.domination_tol
        rows.append(("domination", None, None, report.domination, tol, report.domination > tol))
        for name, (lo, hi) in (("two_sided", report.two_sided), ("k_estimate", report.k_estimate)):
            ratio = hi / lo
            rows.append((f"{name}_ratio", None, None, ratio, settings.T_PRIME_CEILING, not ratio <= settings.T_PRIME_CEILING))
        rows.append(("long_time_slope", None, None, report.long_time_slope, -report.lambda1, report.slope_error > 0.02))
        rows += [
            ("lambda1", None, None, report.lambda1, None, False),
            ("T_prime", None, None, report.T_prime, None, False),
            ("T_star", None, None, report.T_star, None, False),
            ("C4", None, None, report.C4, None, False),
            ("C5", None, None, report.C5, None, False),
            ("semigroup_k_residual", None, None, report.semigroup_k_residual, None, False),
            ("extrapolation_order", None, None, report.extrapolation_order, None, False),
        ]
        rows += [(f"lower_bound_{k}", None, None, v, None, not v > 0) for k, v in sorted(report.lower_bounds.items())]
        paths = [self._write("kernel_diagnostics", ("quantity", "t", "s", "value", "limit", "flagged"), rows)]

        stable = StableKernelService(grid.params)
        free = stable.kernel_diagnostics(self.config.kernel.times, workers=self.config.workers)
        paths.append(self._write("stable_kernel", ("t", "mass", "c1", "c2", "self_similarity_residual"), free.rows))

        mid = grid.nearest_node(0.5 * sum(grid.domain.intervals[0]))
        section = []
        for t in self.config.kernel.times:
            G = DirichletKernelService.kernel_matrix(grid, t, rows=np.array([mid]))[0]
            section.extend((t, x, g) for x, g in zip(grid.nodes, G))
        paths.append(self._write("kernel_cross_section", ("t", "x", "G"), section))
        logger.info(f"Kernel diagnostics: {len(report.flags)} flags, T′={report.T_prime:.6g}, T_*={report.T_star:.6g}")
        return paths

    def _criteria_horizon(self, dom: Domain) -> tuple[float, Optional[float]]:
        """(T, T_*): T_* comes from the assembled kernel when Ω is a bounded 1-D set."""
        t_star = self.grid.T_star if dom.kind == "interval_union" and dom.is_bounded else None
        T = self.config.criteria.T or t_star or 1.0
        return T, t_star

    def evaluate_criterion(
        self, service: CriteriaService, name: str, mu: MeasureSpec, T: float, t_star: Optional[float], constants: dict
    ) -> CriterionReport:
        cfg = self.config
        p, crit = cfg.model.p, cfg.criteria
        kind = f"necessary_critical_{crit.locus}" if name == "necessary_critical" else name
        gamma = self.gamma(kind, constants)
        try:
            if name == "necessary_subcritical":
                return service.necessary_subcritical(mu, p, T, gamma=gamma, t_star=t_star)
            if name == "necessary_critical":
                return service.necessary_critical(mu, p, T, crit.locus, gamma=gamma, t_star=t_star)
            if name == "sufficient_kernel_integral":
                return service.sufficient_kernel_integral(mu, p, T, gamma=gamma, t_star=t_star)
            if name == "sufficient_qnorm":
                return service.sufficient_qnorm(mu, p, crit.q, T, gamma=gamma, t_star=t_star)
            if name == "sufficient_log":
                return service.sufficient_log(mu, p, crit.r, T, crit.locus, crit.l, gamma=gamma, t_star=t_star)
            return service.dirac_boundary(mu.amplitude, cfg.measure.center, p, T)
        except DivergenceError as exc:
            logger.warning(f"{kind} at κ={mu.amplitude:g}: {exc}")
            role = NECESSARY if kind.startswith("necessary") else SUFFICIENT
            report = CriterionReport(
                kind=kind, value=math.inf, threshold_role=role, T=T, p=p, theta=cfg.model.theta,
                kappa=mu.amplitude, growth_factor=math.inf, unbounded=True, details={"divergence": str(exc)},
            )
            report.verdict = verdict_for(math.inf, role, gamma)
            return report

    def condition_sweep(self) -> list[Path]:
        cfg = self.config
        dom = cfg.domain_model()
        family = cfg.measure_spec()
        T, t_star = self._criteria_horizon(dom)
        service = CriteriaService(dom, cfg.model.theta, cfg.search_spec())
        constants = self.constants()
        kappas = cfg.criteria.kappas or (family.amplitude,)
        reports = [
            self.evaluate_criterion(service, name, family.scaled(kappa), T, t_star, constants)
            for kappa in kappas
            for name in cfg.criteria.select
        ]
        profiles = [(r.kind, r.kappa, s, v) for r in reports for s, v in r.sigma_profile]
        return [
            self._write("criteria", CRITERIA_HEADER, [criterion_row(r) for r in reports]),
            self._write("criteria_profiles", ("kind", "kappa", "sigma", "value"), profiles),
        ]

    def picard_run(self) -> list[Path]:
        cfg = self.config
        family = cfg.measure_spec()
        solver = self.picard()
        horizons = (cfg.solver.T,) if cfg.solver.T else tuple(self.schedule())
        kappas = cfg.solver.kappas or (family.amplitude,)
        items = [(kappa, T) for kappa in kappas for T in horizons]
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            runs = list(pool.map(lambda item: solver.solve(family.scaled(item[0]), item[1], cfg.model.p), items))
        summary = [
            (run.kappa, run.T, run.verdict.value, run.j, run.residual, run.max_monotone_violation, run.reason)
            for run in runs
        ]
        trace = [(run.kappa, run.T, j, sup, verdict) for run in runs for j, sup, verdict in run.trace_rows()]
        return [
            self._write(
                "picard_runs",
                ("kappa", "T", "verdict", "iterations", "residual", "max_monotone_violation", "reason"),
                summary,
            ),
            self._write("picard_trace", ("kappa", "T", "j", "sup_history", "verdict"), trace),
        ]

    def _necessary_ratio(
        self, family: MeasureSpec, p: float, dom: Domain, constants: dict
    ) -> tuple[Callable[[float, float], float], Optional[float], str]:
        """(κ, T) ↦ necessary-condition value of the family (linear in κ), its
        calibrated threshold and the locus the family concentrates on."""
        cfg = self.config
        th, N = cfg.model.theta, cfg.model.N
        service = CriteriaService(dom, th, cfg.search_spec())
        locus = "interior" if cfg.measure.density == "interior_profile" else "boundary"
        l = 0.0 if locus == "interior" else th / 2
        unit = family.scaled(1.0)
        if math.isclose(p, critical_exponent(th, N, l), rel_tol=1e-9):
            kind = f"necessary_critical_{locus}"

            def value(T: float) -> float:
                return service.necessary_critical(unit, p, T, locus).value
        else:
            kind = "necessary_subcritical"

            def value(T: float) -> float:
                return service.necessary_subcritical(unit, p, T).value

        return (lambda kappa, T: kappa * value(T)), self.gamma(kind, constants), locus

    def bracket_for(self, p: float, constants: dict) -> tuple[KappaBracket, MeasureSpec]:
        cfg = self.config
        grid = self.grid
        dom = grid.domain
        model = cfg.model.model_copy(update={"p": p})
        family = cfg.measure.build(model, dom).scaled(1.0)
        schedule = self.schedule(grid)
        ratio, gamma1, locus = self._necessary_ratio(family, p, dom, constants)
        bracket = self.picard(grid).kappa_star_bisect(
            family, p, schedule, cfg.solver.tol_kappa,
            necessary_ratio=ratio, gamma1=gamma1, kappa0=cfg.solver.kappa0, ceiling=cfg.solver.ceiling,
            locus=locus,
        )
        return bracket, family

    def kappa_star(self) -> list[Path]:
        cfg = self.config
        constants = self.constants()
        p_values = cfg.solver.p_values or (cfg.model.p,)
        grid = self.grid
        logger.info(f"Bracketing κ* for p in {list(p_values)} on M={grid.size}, T_*={grid.T_star:.6g}")
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(lambda p: self.bracket_for(p, constants), p_values))
        rows = [
            (
                p, cfg.model.theta, cfg.measure.density, cfg.measure.center, b.kappa_lo, b.kappa_hi, b.T_used,
                b.certified, b.necessary_ratio_hi, b.gamma1, b.unbounded_above,
            )
            for p, (b, _) in zip(p_values, results)
        ]
        return [self._write("kappa_star", KAPPA_HEADER, rows)]

    # ---------------------------------------------------------- calibration
    def calibrate_constants(self) -> list[Path]:
        """Fit the operational thresholds on the reference family and freeze them.

        γ₁, γ₁′, γ₁″ are the necessary-condition values of the optimal profiles at
        the largest amplitude the solver still solves; γ and γ_q are the sufficient
        values of a bounded datum at its largest solvable amplitude.
        """
        cfg = self.config
        params = StableParams(dim=1, order=1.0)
        dom = Domain.interval(0.0, 1.0)
        grid = DirichletKernelService.assemble_operator(dom, cfg.grid.M, params)
        solver = self.picard(grid)
        schedule = self.schedule(grid)
        search = cfg.search_spec()
        service = CriteriaService(dom, 1.0, search)
        T_ref = schedule[0]
        rows: list[tuple[str, float, str]] = []

        def bracket(family: MeasureSpec, p: float, locus: str = "interior") -> KappaBracket:
            found = solver.kappa_star_bisect(
                family, p, schedule, cfg.solver.tol_kappa,
                kappa0=cfg.solver.kappa0, ceiling=cfg.solver.ceiling, locus=locus,
            )
            if found.unbounded_above:
                raise ConsistencyError(f"no finite κ* for the {locus} reference family at p={p:g}")
            return found

        def profile_family(locus: str, z: float, p: float) -> MeasureSpec:
            make = MeasureService.interior_profile if locus == "interior" else MeasureService.boundary_profile
            return MeasureSpec.from_profile(make(z, p, 1.0, 1, dom))

        interior = profile_family("interior", REFERENCE_CENTER, REFERENCE_P)
        b = bracket(interior, REFERENCE_P)
        gamma1 = b.kappa_lo * service.necessary_subcritical(interior, REFERENCE_P, T_ref).value
        rows.append(("gamma1", gamma1, f"interior profile p={REFERENCE_P:g}, κ_lo={b.kappa_lo:.6g}"))

        uniform = MeasureSpec(interior=DensityProfile(kind="uniform"))
        b_uniform = bracket(uniform, REFERENCE_P)
        T_used = b_uniform.T_used or schedule[-1]
        at_lo = uniform.scaled(b_uniform.kappa_lo)
        gamma = service.sufficient_kernel_integral(at_lo, REFERENCE_P, T_used).value
        gamma_q = service.sufficient_qnorm(at_lo, REFERENCE_P, cfg.criteria.q, T_used).value
        rows.append(("gamma", gamma, f"uniform density p={REFERENCE_P:g}, κ_lo={b_uniform.kappa_lo:.6g}, T={T_used:.6g}"))
        rows.append(("gamma_qnorm", gamma_q, f"uniform density q={cfg.criteria.q:g}"))

        for locus, z, key in (("interior", REFERENCE_CENTER, "gamma1_interior_critical"), ("boundary", 0.0, "gamma1_boundary_critical")):
            p_crit = critical_exponent(1.0, 1, 0.0 if locus == "interior" else 0.5)
            family = profile_family(locus, z, p_crit)
            bc = bracket(family, p_crit, locus)
            value = service.necessary_critical(family, p_crit, T_ref, locus).value
            rows.append((key, bc.kappa_lo * value, f"critical {locus} profile p={p_crit:.6g}, κ_lo={bc.kappa_lo:.6g}"))

        report = DirichletKernelService.kernel_diagnostics(grid, cfg.kernel_spec())
        rows += [("C4", report.C4, "sup_t √t ∫K dx"), ("C5", report.C5, "sup K t^{1/2+1/θ}/D")]

        inequality = {}
        for alpha, beta in INEQUALITY_GRID:
            constant = fitted_inequality_constant(alpha, beta)
            inequality[f"alpha={alpha:g},beta={beta:g}"] = constant
            rows.append((f"C(alpha={alpha:g},beta={beta:g})", constant, "ODE blow-up threshold"))

        constants = {name: value for name, value, _ in rows if not name.startswith("C(")}
        constants["inequality_constants"] = inequality
        constants["reference"] = {"theta": 1.0, "N": 1, "domain": [0.0, 1.0], "M": cfg.grid.M, "p": REFERENCE_P}
        write_constants(constants, self.ledger)

        consistency = self.consistency_sweep(grid, service, solver, schedule, constants, interior, uniform, b, b_uniform)
        return [
            self._write("calibration", ("name", "value", "source"), rows),
            self._write(
                "consistency",
                ("family", "kappa", "T", "sufficient", "necessary", "gamma", "gamma1", "converged", "consistent"),
                consistency,
            ),
        ]

    def consistency_sweep(
        self,
        grid: DirichletKernelGrid,
        service: CriteriaService,
        solver: PicardService,
        schedule: list[float],
        constants: dict,
        interior: MeasureSpec,
        uniform: MeasureSpec,
        b_interior: KappaBracket,
        b_uniform: KappaBracket,
    ) -> list[tuple]:
        """Twenty (family, κ, T) configurations: a pass of the sufficient condition must
        converge, a tenfold failure of the necessary one must not."""
        gamma, gamma1 = constants["gamma"], constants["gamma1"]
        horizons = (schedule[0], schedule[min(2, len(schedule) - 1)])
        items = []
        for name, family, b in (("interior_profile", interior, b_interior), ("uniform", uniform, b_uniform)):
            for factor in (0.25, 0.5, 1.0, 4.0, 16.0):
                for T in horizons:
                    items.append((name, family, b.kappa_lo * factor, T))

        def check(item: tuple) -> tuple:
            name, family, kappa, T = item
            mu = family.scaled(kappa)
            try:
                sufficient = service.sufficient_kernel_integral(mu, REFERENCE_P, T).value
            except DivergenceError:
                sufficient = math.inf
            necessary = service.necessary_subcritical(mu, REFERENCE_P, T).value
            converged, _ = solver.solvable(family, kappa, REFERENCE_P, [t for t in schedule if t <= T])
            consistent = not (sufficient <= gamma and not converged) and not (necessary > 10 * gamma1 and converged)
            if not consistent:
                logger.warning(f"Criteria and solver disagree for {name} at κ={kappa:.6g}, T={T:.6g}")
            return (name, kappa, T, sufficient, necessary, gamma, gamma1, converged, consistent)

        with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
            return list(pool.map(check, items))

