import logging
import math
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable, Literal, Optional, Sequence
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from fraclab.core.config import get_settings
from fraclab.core.errors import ConsistencyError, DivergenceError, DomainError, HypothesisError
from fraclab.models import (
    DirichletKernelGrid,
    InequalityBound,
    IntegralInequalityInstance,
    KappaBracket,
    MeasureSpec,
    PicardRun,
    Verdict,
)
from fraclab.services.dirichlet_kernel import DirichletKernelService
from fraclab.services.measures import MeasureService, critical_exponent

settings = get_settings()
logger = logging.getLogger(__name__)

# consecutive small relative changes needed to declare convergence
CONVERGED_STREAK = 3
# sup growth over GROWTH_WINDOW iterations that signals divergence
GROWTH_FACTOR = 10.0
GROWTH_WINDOW = 3
# rounding slack for the monotonicity check, relative to the current sup
MONOTONE_SLACK = 1e-9
# first-cell singularity exponent is clipped to this range
FIRST_CELL_CLIP = (0.0, 0.9)
# ζ reaching this multiple of c₁ counts as blow-up
BLOW_UP_FACTOR = 1e8


def etd_weights(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weights (α, β) with ∫_0^Δ e^{−λ(Δ−τ)} W(τ) dτ ≈ Δ[α W(0) + β W(Δ)] for
    linear W, z = λΔ."""
    z = np.asarray(z, dtype=float)
    small = z < 1e-3
    safe = np.where(small, 1.0, z)
    em = np.exp(-safe)
    alpha = np.where(small, 0.5 - z / 3 + z ** 2 / 8, (1 - em * (1 + safe)) / safe ** 2)
    beta = np.where(small, 0.5 - z / 6 + z ** 2 / 24, (1 - em) / safe - (1 - em * (1 + safe)) / safe ** 2)
    return alpha, beta


def time_mesh(T: float, ratio: Optional[float] = None, floor: Optional[float] = None) -> np.ndarray:
    """t_k = T·r^{k−K}, k = 0..K, with the smallest node at most T·floor."""
    ratio = settings.TIME_RATIO if ratio is None else ratio
    floor = settings.TIME_FLOOR if floor is None else floor
    if not T > 0:
        raise DomainError(f"horizon must be positive, got {T}")
    K = math.ceil(math.log(1 / floor) / math.log(ratio))
    return T * ratio ** (np.arange(K + 1) - K)


def default_schedule(t_star: float, length: Optional[int] = None, factor: float = 0.25) -> list[float]:
    """Decreasing horizons T_*, T_*/4, T_*/16, ..."""
    length = settings.T_SCHEDULE_LENGTH if length is None else length
    return [t_star * factor ** k for k in range(length)]


class PicardService:
    """Monotone iteration u_{j+1} = u₁ + ∫_0^t G(t−s) u_j(s)^p ds on the node × time mesh.

    Space is spectral: the semigroup acts diagonally on the eigenbasis of the
    assembled operator. Time uses exponential product integration with u^p
    linear between nodes, and a power law u^p ~ s^{−a} on the first cell.
    """

    def __init__(
        self,
        grid: DirichletKernelGrid,
        *,
        tol: Optional[float] = None,
        max_iter: Optional[int] = None,
        overflow: Optional[float] = None,
    ):
        self.grid = grid
        self.tol = settings.PICARD_TOL if tol is None else tol
        self.max_iter = settings.PICARD_MAX_ITER if max_iter is None else max_iter
        self.overflow = settings.OVERFLOW_CEILING if overflow is None else overflow
        self._root = np.sqrt(grid.spacing)
        self._weight_power = grid.params.dim / grid.params.order

    # ---------------------------------------------------------- projections
    def to_modal(self, nodal: np.ndarray) -> np.ndarray:
        return self.grid.eigenvectors.T @ (self._root[:, None] * nodal)

    def to_nodal(self, modal: np.ndarray) -> np.ndarray:
        return (self.grid.eigenvectors @ modal) / self._root[:, None]

    def _scaled_sup(self, u: np.ndarray, times: np.ndarray) -> float:
        """max over the mesh of u·t^{N/θ}."""
        return float(np.max(u * times[None, :] ** self._weight_power)) if u.size else 0.0

    # --------------------------------------------------------------- pieces
    def initial_term(self, mu: MeasureSpec, times: np.ndarray) -> tuple[np.ndarray, list[int]]:
        """u₁(x_i, t_n) = ∫ K(x_i, y, t_n) dμ(y).

        Interior density and interior atoms enter through cell loads propagated
        by G; boundary density and boundary atoms through extrapolated K columns.

        Returns:
            (u₁ on the mesh, indices of nodes whose cell integral diverged).
        """
        times = np.asarray(times, dtype=float)
        if times[-1] > self.grid.T_star * (1 + 1e-12):
            raise HypothesisError(
                f"mesh horizon {times[-1]:.6g} exceeds T_*={self.grid.T_star:.6g}", theorem="Definition 1.1"
            )
        u1 = np.zeros((self.grid.size, times.size))
        if mu.is_zero:
            return u1, []
        loads, flagged = MeasureService.cell_loads(mu, self.grid)
        if flagged:
            u1[flagged, :] = np.inf
            return u1, flagged
        modal = self.grid.eigenvectors.T @ (loads / self._root)
        decay = np.exp(-np.outer(self.grid.eigenvalues, times))
        u1 += self.to_nodal(decay * modal[:, None])
        for b, mass in MeasureService.boundary_masses(mu, self.grid.domain).items():
            for n, t in enumerate(times):
                column, _ = DirichletKernelService.boundary_column(self.grid, b, float(t))
                u1[:, n] += mass * column
        return np.maximum(u1, 0.0), []

    def first_cell_exponent(self, u1: np.ndarray, times: np.ndarray, p: float) -> np.ndarray:
        """a_j = p × local decay exponent of u₁ between the first two times, clipped."""
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = -np.log(u1[:, 1] / u1[:, 0]) / math.log(times[1] / times[0])
        slope = np.where(np.isfinite(slope), slope, 0.0)
        return np.clip(p * slope, *FIRST_CELL_CLIP)

    def nonlinear_term(self, u: np.ndarray, times: np.ndarray, p: float, exponent: np.ndarray) -> np.ndarray:
        """N[u](x, t_n) = ∫_0^{t_n} [G(t_n − s) u(s)^p](x) ds on the mesh."""
        with np.errstate(over="ignore", invalid="ignore"):
            w = np.power(u, p)
        W = self.to_modal(w)
        lam = self.grid.eigenvalues
        out = np.zeros_like(W)
        out[:, 0] = self.to_modal((w[:, 0] * times[0] / (1 - exponent))[:, None])[:, 0]
        for n in range(1, times.size):
            dt = times[n] - times[n - 1]
            alpha, beta = etd_weights(lam * dt)
            out[:, n] = np.exp(-lam * dt) * out[:, n - 1] + dt * (alpha * W[:, n - 1] + beta * W[:, n])
        return self.to_nodal(out)

    # ------------------------------------------------------------ iteration
    def new_run(self, mu: MeasureSpec, T: float, p: float) -> PicardRun:
        if p <= 1:
            raise DomainError(f"p must exceed 1, got {p}")
        times = time_mesh(T)
        try:
            u1, flagged = self.initial_term(mu, times)
        except DivergenceError as exc:
            logger.warning(f"Initial term diverges: {exc}")
            u1, flagged = np.full((self.grid.size, times.size), np.inf), []
        run = PicardRun(times=times, p=p, u1=u1, current=u1.copy(), kappa=mu.amplitude)
        if flagged or not np.all(np.isfinite(u1)):
            run.verdict = Verdict.DIVERGED_AT_T0
            run.flagged_nodes = flagged or list(np.nonzero(~np.all(np.isfinite(u1), axis=1))[0])
            run.reason = "initial term is not finite"
            return run
        run.first_cell_exponent = self.first_cell_exponent(u1, times, p)
        run.sup_history.append(self._scaled_sup(u1, times))
        if run.sup_history[0] == 0.0:
            run.verdict = Verdict.CONVERGED
            run.reason = "zero datum"
            run.residual = 0.0
        return run

    def picard_iterate(self, run: PicardRun, budget: Optional[int] = None) -> PicardRun:
        """Iterate until a verdict is reached or the budget is spent.

        Raises:
            ConsistencyError: an iterate decreases somewhere beyond rounding.
        """
        budget = self.max_iter if budget is None else budget
        times, p = run.times, run.p
        streak = 0
        sup0 = run.sup_history[0] if run.sup_history else 0.0
        while not run.finished and run.j < budget:
            nxt = run.u1 + self.nonlinear_term(run.current, times, p, run.first_cell_exponent)
            if not np.all(np.isfinite(nxt)):
                run.verdict, run.reason = Verdict.DIVERGED, f"non-finite iterate at j={run.j + 1}"
                break
            violation = float(np.max(run.current - nxt))
            scale = max(float(np.max(nxt)), 1e-300)
            run.max_monotone_violation = max(run.max_monotone_violation, violation / scale)
            if violation > MONOTONE_SLACK * scale:
                raise ConsistencyError(
                    f"Picard iterate decreased by {violation:.3g} (relative {violation / scale:.3g}) at j={run.j + 1}"
                )
            weight = times[None, :] ** self._weight_power
            change = float(np.max(np.abs(nxt - run.current) * weight))
            run.previous, run.current = run.current, np.maximum(nxt, run.current)
            run.j += 1
            sup = self._scaled_sup(run.current, times)
            run.sup_history.append(sup)
            logger.debug(f"Picard j={run.j}: sup={sup:.6g}, change={change / sup:.3g}")

            streak = streak + 1 if change <= self.tol * sup else 0
            if streak >= CONVERGED_STREAK:
                run.verdict, run.reason = Verdict.CONVERGED, f"{CONVERGED_STREAK} changes below {self.tol:g}"
            elif sup > self.overflow * sup0:
                run.verdict, run.reason = Verdict.DIVERGED, f"sup exceeds {self.overflow:g}× its initial value"
            elif len(run.sup_history) > GROWTH_WINDOW and sup >= GROWTH_FACTOR * run.sup_history[-1 - GROWTH_WINDOW]:
                run.verdict, run.reason = Verdict.DIVERGED, f"sup grew {GROWTH_FACTOR:g}× in {GROWTH_WINDOW} iterations"
        if not run.finished:
            run.verdict, run.reason = Verdict.BUDGET, f"no verdict after {run.j} iterations"
        if run.verdict is Verdict.CONVERGED and run.j > 1:
            run.residual = self.residual(run)
        logger.info(f"Picard run κ={run.kappa:.6g}, T={run.T:.4g}: {run.verdict.value} after j={run.j} ({run.reason})")
        return run

    def residual(self, run: PicardRun) -> float:
        """Relative mild-equation residual |u − u₁ − N[u]| / sup u on time nodes n ≥ 1."""
        u = run.current
        defect = u - run.u1 - self.nonlinear_term(u, run.times, run.p, run.first_cell_exponent)
        weight = run.times[None, 1:] ** self._weight_power
        scale = float(np.max(u[:, 1:] * weight))
        return float(np.max(np.abs(defect[:, 1:]) * weight) / scale) if scale > 0 else 0.0

    def solve(self, mu: MeasureSpec, T: float, p: float, budget: Optional[int] = None) -> PicardRun:
        run = self.new_run(mu, T, p)
        if run.finished:
            return run
        return self.picard_iterate(run, budget)

    # ------------------------------------------------------------ κ* search
    def solvable(self, family: MeasureSpec, kappa: float, p: float, schedule: Sequence[float]) -> tuple[bool, Optional[float]]:
        """Local-in-time solvability: some horizon of the schedule converges (smallest first)."""
        if kappa == 0:
            return True, min(schedule)
        for T in sorted(schedule):
            run = self.solve(family.scaled(kappa), T, p)
            if run.verdict is Verdict.CONVERGED:
                return True, T
            if run.verdict is Verdict.DIVERGED_AT_T0:
                return False, None
        return False, None

    def kappa_star_bisect(
        self,
        family: MeasureSpec,
        p: float,
        schedule: Optional[Sequence[float]] = None,
        tol_kappa: float = 0.05,
        *,
        necessary_ratio: Optional[Callable[[float, float], float]] = None,
        gamma1: Optional[float] = None,
        kappa0: float = 1.0,
        ceiling: float = 1e6,
        locus: Literal["interior", "boundary"] = "interior",
    ) -> KappaBracket:
        """Bracket the critical amplitude of a profile family by doubling then bisection.

        Args:
            family: Initial datum whose amplitude is swept.
            p: Nonlinearity exponent.
            schedule: Decreasing horizons (default: from T_*).
            tol_kappa: Relative bracket width.
            necessary_ratio: (κ, T) ↦ necessary-condition value, used to certify κ_hi.
            gamma1: Calibrated constant of the necessary condition.
            kappa0: First amplitude tried.
            ceiling: Amplitudes above this count as unbounded.
            locus: Where the family concentrates; a boundary singularity carries
                the extra weight d^{θ/2} and so a smaller critical exponent.
        """
        params = self.grid.params
        schedule = list(schedule or default_schedule(self.grid.T_star))
        l = 0.0 if locus == "interior" else params.order / 2
        if p < critical_exponent(params.order, params.dim, l):
            logger.info(f"Subcritical exponent for a {locus} family: every amplitude admits a local solution")
            return KappaBracket(kappa_lo=ceiling, kappa_hi=math.inf, unbounded_above=True)
        bracket = KappaBracket(kappa_lo=0.0, kappa_hi=math.inf)

        def probe(kappa: float) -> bool:
            ok, T = self.solvable(family, kappa, p, schedule)
            bracket.evaluations.append((kappa, ok, T))
            if ok:
                bracket.T_used = T if bracket.kappa_lo <= kappa else bracket.T_used
            return ok

        kappa = kappa0
        if probe(kappa):
            bracket.kappa_lo = kappa
            while True:
                kappa *= 2
                if kappa > ceiling:
                    bracket.unbounded_above = True
                    logger.warning(f"No unsolvable amplitude found below {ceiling:g}")
                    return bracket
                if probe(kappa):
                    bracket.kappa_lo = kappa
                else:
                    bracket.kappa_hi = kappa
                    break
        else:
            bracket.kappa_hi = kappa
            while True:
                kappa /= 2
                if kappa < kappa0 / ceiling:
                    raise DivergenceError(f"no solvable amplitude above {kappa0 / ceiling:g}", where=kappa)
                if probe(kappa):
                    bracket.kappa_lo = kappa
                    break
                bracket.kappa_hi = kappa
        while bracket.kappa_hi - bracket.kappa_lo > tol_kappa * bracket.kappa_hi:
            mid = 0.5 * (bracket.kappa_lo + bracket.kappa_hi)
            if probe(mid):
                bracket.kappa_lo = mid
            else:
                bracket.kappa_hi = mid
        for k, ok, _ in bracket.evaluations:
            if ok and k > bracket.kappa_hi or not ok and k < bracket.kappa_lo:
                logger.warning(f"Non-monotone solver verdict at κ={k:.6g}")
        if necessary_ratio is not None:
            self.certify(bracket, necessary_ratio, gamma1, min(schedule))
        logger.info(
            f"κ* ∈ [{bracket.kappa_lo:.6g}, {bracket.kappa_hi:.6g}] (certified={bracket.certified}, T={bracket.T_used})"
        )
        return bracket

    @staticmethod
    def certify(
        bracket: KappaBracket,
        necessary_ratio: Callable[[float, float], float],
        gamma1: Optional[float],
        T_fallback: float,
    ) -> KappaBracket:
        """Certify κ_hi: the necessary condition must already fail at κ_hi on the
        horizon where κ_lo was solved (the smallest horizon if none was)."""
        T = bracket.T_used if bracket.T_used is not None else T_fallback
        bracket.necessary_ratio_hi = necessary_ratio(bracket.kappa_hi, T)
        if gamma1 is not None:
            bracket.gamma1 = gamma1
            bracket.certified = bracket.necessary_ratio_hi > gamma1
        return bracket

    def kappa_sweep(self, family: MeasureSpec, p: float, kappas: Sequence[float], T: float, workers: Optional[int] = None) -> list[PicardRun]:
        """Independent runs over amplitudes on a shared grid."""
        with ThreadPoolExecutor(max_workers=workers or settings.WORKERS) as pool:
            return list(pool.map(lambda k: self.solve(family.scaled(k), T, p), kappas))


# -------------------------------------------------------- integral inequality
def ode_blows_up(inst: IntegralInequalityInstance, c1: Optional[float] = None) -> tuple[bool, Optional[float]]:
    """Integrate ζ′ = c₂ t^{−α} ζ^β, ζ(t_*) = c₁ on (t_*, T) and report blow-up.

    Returns:
        (blew up before T, blow-up time or None).
    """
    c1 = inst.c1 if c1 is None else c1
    ceiling = BLOW_UP_FACTOR * c1

    def rhs(t, y):
        return [inst.c2 * t ** (-inst.alpha) * max(y[0], 0.0) ** inst.beta]

    def blow_up(t, y):
        return y[0] - ceiling

    blow_up.terminal = True
    blow_up.direction = 1
    sol = solve_ivp(rhs, (inst.t_star, inst.T), [c1], events=blow_up, rtol=1e-10, atol=1e-12 * c1, method="RK45")
    if sol.status == 1 and sol.t_events[0].size:
        return True, float(sol.t_events[0][0])
    if sol.status == -1:
        # step size collapsed at a singularity
        return True, float(sol.t[-1])
    return False, None


def analytic_inequality_constant(alpha: float, beta: float) -> float:
    """[(β−1)|1−2^{1−α}|/|α−1|]^{−1/(β−1)}, continued by log 2 at α = 1."""
    if beta <= 1:
        raise DomainError(f"beta must exceed 1, got {beta}")
    rate = math.log(2.0) if alpha == 1 else abs(1 - 2 ** (1 - alpha)) / abs(alpha - 1)
    return ((beta - 1) * rate) ** (-1 / (beta - 1))


@lru_cache(maxsize=64)
def fitted_inequality_constant(alpha: float, beta: float, rel_tol: float = 1e-6) -> float:
    """C(α,β): the blow-up threshold of c₁ at c₂ = t_* = 1, T = 2, found by bisection on the ODE oracle."""
    probe = IntegralInequalityInstance(c1=1.0, c2=1.0, alpha=alpha, beta=beta, t_star=1.0, T=2.0 + 1e-12)
    lo, hi = 1e-6, 1e6
    if ode_blows_up(probe, lo)[0] or not ode_blows_up(probe, hi)[0]:
        raise DomainError(f"blow-up threshold for (α, β)=({alpha}, {beta}) lies outside [{lo:g}, {hi:g}]")
    value = brentq(lambda c: 0.5 - float(ode_blows_up(probe, math.exp(c))[0]), math.log(lo), math.log(hi), xtol=rel_tol)
    constant = math.exp(value)
    logger.debug(f"C({alpha}, {beta}) = {constant:.8g} (analytic {analytic_inequality_constant(alpha, beta):.8g})")
    return constant


def integral_inequality_bound(inst: IntegralInequalityInstance, fitted: bool = True) -> InequalityBound:
    """Upper bound on c₁ for a nonnegative ζ ≥ c₁ + c₂∫_{t_*}^t s^{−α}ζ^β ds on (t_*, T).

    The general bound is C(α,β) c₂^{−1/(β−1)} t_*^{(α−1)/(β−1)}; for α = 1 the
    sharp bound (c₂(β−1))^{−1/(β−1)} [log(T/2t_*)]^{−1/(β−1)} is returned as well.
    """
    a, b = inst.alpha, inst.beta
    constant = fitted_inequality_constant(a, b) if fitted else analytic_inequality_constant(a, b)
    general = constant * inst.c2 ** (-1 / (b - 1)) * inst.t_star ** ((a - 1) / (b - 1))
    sharp = None
    if a == 1:
        sharp = (inst.c2 * (b - 1)) ** (-1 / (b - 1)) * math.log(inst.T / (2 * inst.t_star)) ** (-1 / (b - 1))
    return InequalityBound(general=general, constant=constant, sharp=sharp)
