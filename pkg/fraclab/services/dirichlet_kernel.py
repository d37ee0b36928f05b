import logging
import math
from typing import Optional, Sequence
import numpy as np
from pydantic import BaseModel, Field
from scipy.linalg import eigh
from fraclab.core.config import get_settings
from fraclab.core.errors import AccuracyError, DomainError
from fraclab.models import (
    BoundaryFactor,
    DirichletKernelGrid,
    DirichletKernelReport,
    Domain,
    StableParams,
)
from fraclab.services.geometry import GeometryService
from fraclab.services.stable_kernel import StableKernelService

settings = get_settings()
logger = logging.getLogger(__name__)

MIN_NODES = 16
MAX_NODES = 4096
# dyadic T′ search stops once e^{−λ₁t} is this small
DECAY_FLOOR = 1e-150


def _first_antiderivative(s, theta: float):
    """F₁ with F₁′(s) = s^{−1−θ}."""
    return -np.asarray(s, dtype=float) ** (-theta) / theta


def _second_antiderivative(s, theta: float):
    """F₂ with F₂″(s) = s^{−1−θ}."""
    s = np.asarray(s, dtype=float)
    if theta == 1.0:
        return -np.log(s)
    return -s ** (1 - theta) / (theta * (1 - theta))


def hat_moment(distance, width, theta: float):
    """∫ φ(y) |y − x|^{−1−θ} dy for a hat φ of half-width ``width`` centred at
    ``distance`` ≥ ``width`` from x."""
    d = np.asarray(distance, dtype=float)
    h = np.asarray(width, dtype=float)
    return (
        _second_antiderivative(d + h, theta) - 2 * _second_antiderivative(d, theta) + _second_antiderivative(d - h, theta)
    ) / h


def outer_half_hat_moment(width: float, theta: float) -> float:
    """∫_h^{2h} (2h − s)/h · s^{−1−θ} ds: the part of a neighbouring hat outside the near window."""
    h = width
    return float(-_first_antiderivative(h, theta) + (_second_antiderivative(2 * h, theta) - _second_antiderivative(h, theta)) / h)


def _tail_moment(near: float, far: float, theta: float) -> float:
    """∫_{near}^{far} s^{−1−θ} ds."""
    if near <= 0:
        return math.inf
    far_term = 0.0 if math.isinf(far) else far ** (-theta)
    return (near ** (-theta) - far_term) / theta


class KernelSampleSpec(BaseModel):
    """Sampling plan of the Dirichlet-kernel diagnostics."""

    times: list[float] = Field(default_factory=lambda: [0.005, 0.01, 0.02, 0.04])
    ck_pairs: list[tuple[float, float]] = Field(
        default_factory=lambda: [
            (0.01, 0.02), (0.005, 0.005), (0.002, 0.03), (0.02, 0.02), (0.04, 0.01),
            (0.003, 0.007), (0.015, 0.025), (0.05, 0.05), (0.008, 0.001), (0.03, 0.06),
        ]
    )
    sample_nodes: int = Field(default=48, ge=4)
    resolution: float = Field(default=8.0, gt=0.0)
    domination_resolution: float = Field(default=32.0, gt=0.0)
    domination_tol: float = Field(default=1e-2, ge=0.0)
    # random extra nodes drawn on top of the regular sample; None keeps the sample regular
    seed: Optional[int] = None
    extra_nodes: int = Field(default=8, ge=0)


class DirichletKernelService:
    """Assembles and evaluates the 1-D discretization of (−Δ)^{θ/2} with zero
    exterior condition.

    The singular integral at a node x_i is split into a near window
    [x_i − h, x_i + h], handled by a second difference (exact on quadratics), and
    a far part integrated exactly against the hat functions of the other nodes.
    The exterior of Ω enters only through the analytic killing integral
    c ∫_{Ω^c} |x_i − y|^{−1−θ} dy on the diagonal.
    """

    # ------------------------------------------------------------------ grid
    @staticmethod
    def allocate_nodes(dom: Domain, M: int) -> list[int]:
        """Nodes per component, as close to a uniform spacing as integers allow."""
        lengths = [b - a for a, b in dom.intervals]
        total = sum(lengths)
        h0 = total / (M + len(lengths))
        counts = [max(1, round(length / h0) - 1) for length in lengths]
        while sum(counts) != M:
            spacing = [length / (m + 1) for length, m in zip(lengths, counts)]
            if sum(counts) < M:
                counts[int(np.argmax(spacing))] += 1
            else:
                candidates = [i for i, m in enumerate(counts) if m > 1]
                if not candidates:
                    raise DomainError(f"M={M} is smaller than the number of components")
                counts[min(candidates, key=lambda i: spacing[i])] -= 1
        return counts

    @staticmethod
    def exterior_killing(dom: Domain, params: StableParams, x: float) -> float:
        """c ∫_{R∖Ω} |x − y|^{−1−θ} dy for x ∈ Ω."""
        th = params.order
        rate = 0.0
        edges = [-math.inf] + [e for ab in dom.intervals for e in ab] + [math.inf]
        for u, v in zip(edges[0::2], edges[1::2]):
            if v < u or (u == v):
                continue
            if v <= x:
                rate += _tail_moment(x - v, x - u, th)
            elif u >= x:
                rate += _tail_moment(u - x, v - x, th)
        return params.c_const * rate

    @staticmethod
    def _interior_far(dom: Domain, x: float, h: float, theta: float) -> float:
        """∫_{Ω ∖ [x−h, x+h]} |x − y|^{−1−θ} dy."""
        total = 0.0
        for a, b in dom.intervals:
            if a <= x <= b:
                total += _tail_moment(h, x - a, theta) if x - a > h else 0.0
                total += _tail_moment(h, b - x, theta) if b - x > h else 0.0
            elif b < x:
                total += _tail_moment(x - b, x - a, theta)
            else:
                total += _tail_moment(a - x, b - x, theta)
        return total

    @staticmethod
    def assemble_operator(dom: Domain, M: int, params: StableParams) -> DirichletKernelGrid:
        """Discretize (−Δ)^{θ/2}|_Ω on M interior nodes and diagonalize it.

        Args:
            dom: Bounded 1-D interval union.
            M: Number of interior nodes (≥ 16).
            params: Stable parameters with dim = 1.

        Returns:
            The assembled grid with eigenpairs, T′ and T_* filled in.

        Raises:
            DomainError: unbounded or multidimensional domain, or M out of range.
        """
        if dom.kind != "interval_union" or params.dim != 1:
            raise DomainError("the discretized operator is one-dimensional")
        if not dom.is_bounded:
            raise DomainError("unbounded domain: truncate it to a bounded interval union first")
        if not MIN_NODES <= M <= MAX_NODES:
            raise DomainError(f"grid size must lie in [{MIN_NODES}, {MAX_NODES}], got {M}")

        th, c = params.order, params.c_const
        counts = DirichletKernelService.allocate_nodes(dom, M)
        nodes, spacing, component = [], [], []
        for idx, ((a, b), m) in enumerate(zip(dom.intervals, counts)):
            h = (b - a) / (m + 1)
            nodes.extend(a + h * np.arange(1, m + 1))
            spacing.extend([h] * m)
            component.extend([idx] * m)
        x = np.asarray(nodes)
        hv = np.asarray(spacing)
        comp = np.asarray(component)
        logger.info(f"Assembling fractional operator: θ={th}, M={M}, components={len(counts)}")

        D = np.abs(x[:, None] - x[None, :])
        same = comp[:, None] == comp[None, :]
        offset = np.abs(np.arange(M)[:, None] - np.arange(M)[None, :])
        neighbour = same & (offset == 1)
        far = ~np.eye(M, dtype=bool) & ~neighbour

        A = np.zeros((M, M))
        with np.errstate(divide="ignore", invalid="ignore"):
            moments = hat_moment(np.where(far, D, 2.0), hv[None, :] * np.ones((M, 1)), th)
        A[far] = -c * moments[far]
        near_weight = c * hv ** (-th) / (2 - th)
        rows, cols = np.nonzero(neighbour)
        A[rows, cols] = -(near_weight[rows] + c * np.array([outer_half_hat_moment(h, th) for h in hv[rows]]))

        killing = np.array([DirichletKernelService.exterior_killing(dom, params, xi) for xi in x])
        interior_far = np.array(
            [DirichletKernelService._interior_far(dom, xi, hi, th) for xi, hi in zip(x, hv)]
        )
        A[np.diag_indices(M)] = 2 * near_weight + c * interior_far + killing

        root = np.sqrt(hv)
        sym = root[:, None] * A / root[None, :]
        sym = 0.5 * (sym + sym.T)
        eigenvalues, eigenvectors = eigh(sym)
        if eigenvalues[0] <= 0:
            raise DomainError(f"assembled operator is not positive definite (λ₁={eigenvalues[0]:.3g})")

        distance = GeometryService.distance_array(dom, x)
        grid = DirichletKernelGrid(
            domain=dom,
            params=params,
            nodes=x,
            spacing=hv,
            distance=distance,
            component=comp,
            operator=sym,
            killing=killing,
            eigenvalues=eigenvalues,
            eigenvectors=eigenvectors,
            meta={"row_sums": A.sum(axis=1)},
        )
        T_prime = DirichletKernelService.fit_T_prime(grid)
        T_star = min(T_prime, dom.diameter ** th / 16)
        logger.info(f"λ₁={eigenvalues[0]:.6g}, T′={T_prime:.6g}, T_*={T_star:.6g}")
        return DirichletKernelGrid(**{**grid.__dict__, "T_prime": T_prime, "T_star": T_star})

    # ---------------------------------------------------------------- kernels
    @staticmethod
    def _check_time(t: float) -> None:
        if not (t > 0) or not math.isfinite(t):
            raise DomainError(f"time must be positive and finite, got {t}")

    @staticmethod
    def kernel_matrix(grid: DirichletKernelGrid, t: float, rows: Optional[np.ndarray] = None, cols: Optional[np.ndarray] = None) -> np.ndarray:
        """G(x_i, x_j, t) for the selected node indices (all by default)."""
        DirichletKernelService._check_time(t)
        V, lam, root = grid.eigenvectors, grid.eigenvalues, np.sqrt(grid.spacing)
        rows = np.arange(grid.size) if rows is None else np.asarray(rows)
        cols = rows if cols is None else np.asarray(cols)
        decay = np.exp(-lam * t)
        G = (V[rows] * decay) @ V[cols].T / (root[rows][:, None] * root[cols][None, :])
        if rows.shape == cols.shape and np.array_equal(rows, cols):
            G = 0.5 * (G + G.T)
        return G

    @staticmethod
    def heat_kernel(grid: DirichletKernelGrid, i: int, j: int, t: float) -> float:
        """G(x_i, x_j, t) = Σ_k e^{−λ_k t} v_k(i) v_k(j) / √(h_i h_j)."""
        DirichletKernelService._check_time(t)
        V = grid.eigenvectors
        weights = np.exp(-grid.eigenvalues * t)
        terms = weights * V[i] * V[j]
        value = float(np.sum(terms)) / math.sqrt(grid.spacing[i] * grid.spacing[j])
        return max(value, 0.0)

    @staticmethod
    def apply_G(grid: DirichletKernelGrid, t: float, f: np.ndarray) -> np.ndarray:
        """[G(t) f](x_i) = Σ_j G(x_i, x_j, t) f_j h_j."""
        DirichletKernelService._check_time(t)
        V, root = grid.eigenvectors, np.sqrt(grid.spacing)
        modal = V.T @ (np.asarray(f, dtype=float) * root)
        return V @ (np.exp(-grid.eigenvalues * t) * modal) / root

    @staticmethod
    def boundary_factor(grid_or_domain, params: StableParams, x, t: float) -> BoundaryFactor:
        """D(x,t) = d(x)^{θ/2} / (d(x)^{θ/2} + √t)."""
        DirichletKernelService._check_time(t)
        dom = grid_or_domain.domain if isinstance(grid_or_domain, DirichletKernelGrid) else grid_or_domain
        dx = GeometryService.distance_to_boundary(dom, x) ** params.half
        x_field = x if isinstance(x, (int, float)) else tuple(x)
        return BoundaryFactor(x=x_field, t=t, value=dx / (dx + math.sqrt(t)))

    @staticmethod
    def boundary_nodes(grid: DirichletKernelGrid, b: float, count: int = 3) -> np.ndarray:
        """Indices of the ``count`` nodes nearest the boundary point b, inside its component."""
        if not any(abs(b - e) < 1e-12 for e in grid.domain.boundary_points):
            raise DomainError(f"{b} is not a boundary point of Ω")
        candidates = np.nonzero(np.abs(grid.nodes - b) <= (count + 0.5) * grid.spacing)[0]
        order = np.argsort(np.abs(grid.nodes[candidates] - b))
        chosen = candidates[order]
        side = np.sign(grid.nodes[chosen[0]] - b)
        chosen = chosen[np.sign(grid.nodes[chosen] - b) == side][:count]
        if chosen.size < count:
            raise DomainError(f"fewer than {count} nodes next to boundary point {b}")
        return chosen

    @staticmethod
    def _extrapolate(grid: DirichletKernelGrid, G_cols: np.ndarray, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Quadratic and linear extrapolation to s = d^{θ/2} = 0 of G/d^{θ/2} along the given columns."""
        s = grid.distance[nodes] ** grid.params.half
        q = G_cols / s
        s1, s2, s3 = s
        l1 = s2 * s3 / ((s1 - s2) * (s1 - s3))
        l2 = s1 * s3 / ((s2 - s1) * (s2 - s3))
        l3 = s1 * s2 / ((s3 - s1) * (s3 - s2))
        quadratic = l1 * q[..., 0] + l2 * q[..., 1] + l3 * q[..., 2]
        linear = (s2 * q[..., 0] - s1 * q[..., 1]) / (s2 - s1)
        return quadratic, linear

    @staticmethod
    def boundary_column(grid: DirichletKernelGrid, b: float, t: float) -> tuple[np.ndarray, np.ndarray]:
        """K(x_i, b, t) for every node, with the relative spread between the
        quadratic and linear extrapolations (negative estimates are clipped)."""
        nodes = DirichletKernelService.boundary_nodes(grid, b)
        G = DirichletKernelService.kernel_matrix(grid, t, rows=np.arange(grid.size), cols=nodes)
        quadratic, linear = DirichletKernelService._extrapolate(grid, G, nodes)
        with np.errstate(divide="ignore", invalid="ignore"):
            spread = np.abs(quadratic - linear) / np.abs(quadratic)
        return np.maximum(quadratic, 0.0), spread

    @staticmethod
    def k_kernel(grid: DirichletKernelGrid, x, target, t: float, spread: Optional[float] = None) -> float:
        """K(x, y, t) = G(x, y, t)/d(y)^{θ/2}, extended to boundary y by extrapolation.

        Args:
            grid: Assembled grid.
            x: Node index, or a point of Ω̄ (boundary points give 0, other points
                use their nearest node).
            target: Node index (interior y) or float boundary point.
            t: Positive time.
            spread: Allowed relative gap between linear and quadratic extrapolation.

        Raises:
            AccuracyError: the extrapolation estimates disagree by more than ``spread``.
        """
        DirichletKernelService._check_time(t)
        if isinstance(x, (int, np.integer)):
            i = int(x)
        else:
            if GeometryService.distance_to_boundary(grid.domain, x) == 0:
                return 0.0
            i = grid.nearest_node(float(x))
        if isinstance(target, (int, np.integer)):
            j = int(target)
            return DirichletKernelService.heat_kernel(grid, i, j, t) / grid.distance[j] ** grid.params.half
        nodes = DirichletKernelService.boundary_nodes(grid, float(target))
        G = np.array([DirichletKernelService.heat_kernel(grid, i, int(j), t) for j in nodes])
        quadratic, linear = DirichletKernelService._extrapolate(grid, G, nodes)
        limit = settings.EXTRAPOLATION_SPREAD if spread is None else spread
        gap = abs(quadratic - linear)
        if gap > limit * abs(quadratic):
            raise AccuracyError(
                f"boundary extrapolation of K at x={grid.nodes[i]:.6g}, b={target}, t={t:.3g} did not settle",
                achieved=gap / max(abs(quadratic), 1e-300),
            )
        return max(float(quadratic), 0.0)

    @staticmethod
    def apply_K(grid: DirichletKernelGrid, t: float, boundary_values: dict[float, float]) -> np.ndarray:
        """[K(t) h](x_i) = Σ_{b ∈ ∂Ω} K(x_i, b, t) h(b) (1-D surface measure is counting)."""
        out = np.zeros(grid.size)
        for b, value in boundary_values.items():
            if value:
                column, _ = DirichletKernelService.boundary_column(grid, b, t)
                out += value * column
        return out

    # ------------------------------------------------------------- estimates
    @staticmethod
    def sample_indices(grid: DirichletKernelGrid, count: int) -> np.ndarray:
        stride = max(1, grid.size // count)
        idx = np.arange(0, grid.size, stride)
        return np.unique(np.concatenate([idx, [grid.size - 1]]))

    @staticmethod
    def two_sided_ratio(grid: DirichletKernelGrid, t: float, idx: np.ndarray, stable: StableKernelService) -> np.ndarray:
        """G / [(1 ∧ d(x)^{θ/2}/√t)(1 ∧ d(y)^{θ/2}/√t) Γ_θ(x−y,t)] on a node sample."""
        G = DirichletKernelService.kernel_matrix(grid, t, rows=idx)
        factor = np.minimum(1.0, grid.distance[idx] ** grid.params.half / math.sqrt(t))
        free = stable.gamma_array(grid.nodes[idx][:, None] - grid.nodes[idx][None, :], t)
        return G / (factor[:, None] * factor[None, :] * free)

    @staticmethod
    def fit_T_prime(grid: DirichletKernelGrid, ceiling: Optional[float] = None, sample: int = 48) -> float:
        """Largest dyadic time up to which the fitted two-sided ratio c₂/c₁ stays ≤ ceiling.

        Times start at the smallest dyadic t ≥ (8h)^θ, where the grid resolves the kernel.
        """
        ceiling = settings.T_PRIME_CEILING if ceiling is None else ceiling
        stable = StableKernelService(grid.params)
        idx = DirichletKernelService.sample_indices(grid, sample)
        th = grid.params.order
        k = math.ceil(math.log2((8 * grid.h) ** th))
        lo, hi = math.inf, 0.0
        accepted = None
        while math.exp(-grid.lambda1 * 2.0 ** k) > DECAY_FLOOR:
            t = 2.0 ** k
            ratio = DirichletKernelService.two_sided_ratio(grid, t, idx, stable)
            ratio = ratio[np.isfinite(ratio) & (ratio > 0)]
            lo, hi = min(lo, float(ratio.min())), max(hi, float(ratio.max()))
            if hi / lo > ceiling:
                break
            accepted = t
            k += 1
        if accepted is None:
            accepted = 2.0 ** math.ceil(math.log2((8 * grid.h) ** th))
            logger.warning(f"Two-sided ratio exceeds {ceiling:g} at the first resolved time; T′ set to {accepted:.3g}")
        return accepted

    @staticmethod
    def kernel_diagnostics(grid: DirichletKernelGrid, spec: Optional[KernelSampleSpec] = None) -> DirichletKernelReport:
        """Structural checks of G and K; every failure is recorded as a flag."""
        spec = spec or KernelSampleSpec()
        stable = StableKernelService(grid.params)
        th, half = grid.params.order, grid.params.half
        report = DirichletKernelReport(T_prime=grid.T_prime, T_star=grid.T_star, lambda1=grid.lambda1)
        idx = DirichletKernelService.sample_indices(grid, spec.sample_nodes)
        if spec.seed is not None and spec.extra_nodes:
            rng = np.random.default_rng(spec.seed)
            extra = rng.choice(grid.size, size=min(spec.extra_nodes, grid.size), replace=False)
            idx = np.unique(np.concatenate([idx, extra]))

        G_full = DirichletKernelService.kernel_matrix(grid, spec.times[0])
        report.symmetry_error = float(np.max(np.abs(G_full - G_full.T)))

        for t in spec.times:
            G = DirichletKernelService.kernel_matrix(grid, t)
            mass = float(np.max(G @ grid.spacing))
            report.sub_markov.append((t, mass))
            if mass > 1 + 5e-3:
                report.flags.append(f"sub-Markov mass {mass:.6g} at t={t:g}")

        for t, s in spec.ck_pairs:
            left = DirichletKernelService.kernel_matrix(grid, t) * grid.spacing[None, :] @ DirichletKernelService.kernel_matrix(grid, s)
            right = DirichletKernelService.kernel_matrix(grid, t + s)
            residual = float(np.max(np.abs(left - right)) / np.max(np.abs(right)))
            report.chapman_kolmogorov.append((t, s, residual))
            if residual > 1e-3:
                report.flags.append(f"Chapman–Kolmogorov residual {residual:.3g} at (t,s)=({t:g},{s:g})")

        t_min = (spec.domination_resolution * grid.h) ** th
        dom_times = [t for t in spec.times if t >= t_min] or [t_min]
        worst = 0.0
        for t in dom_times:
            G = DirichletKernelService.kernel_matrix(grid, t, rows=idx)
            free = stable.gamma_array(grid.nodes[idx][:, None] - grid.nodes[idx][None, :], t)
            worst = max(worst, float(np.max(G / free)))
        report.domination = worst
        if worst > 1 + spec.domination_tol:
            report.flags.append(f"G exceeds Γ_θ by factor {worst:.4g}")

        resolved = (spec.resolution * grid.h) ** th
        fit_times = [t for t in np.geomspace(resolved, grid.T_prime, 8)] if grid.T_prime > resolved else [resolved]
        lo, hi, klo, khi = math.inf, 0.0, math.inf, 0.0
        for t in fit_times:
            ratio = DirichletKernelService.two_sided_ratio(grid, t, idx, stable)
            ratio = ratio[np.isfinite(ratio)]
            lo, hi = min(lo, float(ratio.min())), max(hi, float(ratio.max()))
            klo, khi = min(klo, float(ratio.min())), max(khi, float(ratio.max()))
            for b in grid.domain.boundary_points:
                column, _ = DirichletKernelService.boundary_column(grid, b, t)
                factor = np.minimum(1.0, grid.distance[idx] ** half / math.sqrt(t))
                envelope = factor / math.sqrt(t) * stable.gamma_array(grid.nodes[idx] - b, t)
                kr = column[idx] / envelope
                kr = kr[np.isfinite(kr) & (kr > 0)]
                if kr.size:
                    klo, khi = min(klo, float(kr.min())), max(khi, float(kr.max()))
        report.two_sided = (lo, hi)
        report.k_estimate = (klo, khi)
        for name, (a, b) in (("two-sided", report.two_sided), ("K", report.k_estimate)):
            if not b / a <= settings.T_PRIME_CEILING:
                report.flags.append(f"{name} estimate ratio {b / a:.3g} exceeds {settings.T_PRIME_CEILING:g}")

        report.long_time_slope = DirichletKernelService.long_time_slope(grid)
        if report.slope_error > 0.02:
            report.flags.append(f"long-time slope {report.long_time_slope:.6g} vs −λ₁={-grid.lambda1:.6g}")

        DirichletKernelService._boundary_constants(grid, report, spec, stable)
        DirichletKernelService._lower_bounds(grid, report)
        for flag in report.flags:
            logger.warning(f"Kernel diagnostic flagged: {flag}")
        return report

    @staticmethod
    def long_time_slope(grid: DirichletKernelGrid) -> float:
        """Slope of log G(x₀,y₀,t) over t ∈ [2T′, 4T′] at the centre of the largest component."""
        lengths = [b - a for a, b in grid.domain.intervals]
        a, b = grid.domain.intervals[int(np.argmax(lengths))]
        i = grid.nearest_node(0.5 * (a + b))
        j = grid.nearest_node(a + 0.3 * (b - a))
        times = np.linspace(2 * grid.T_prime, 4 * grid.T_prime, 9)
        values = np.array([DirichletKernelService.heat_kernel(grid, i, j, t) for t in times])
        return float(np.polyfit(times, np.log(values), 1)[0])

    @staticmethod
    def _boundary_constants(grid: DirichletKernelGrid, report: DirichletKernelReport, spec: KernelSampleSpec, stable: StableKernelService) -> None:
        half = grid.params.half
        th = grid.params.order
        resolved = (spec.resolution * grid.h) ** th
        times = [t for t in np.geomspace(resolved, grid.T_star, 6)] if grid.T_star > resolved else [resolved]
        c4, c5, sk, orders = 0.0, 0.0, 0.0, []
        for t in times:
            columns = {b: DirichletKernelService.boundary_column(grid, b, t)[0] for b in grid.domain.boundary_points}
            for b, column in columns.items():
                c4 = max(c4, math.sqrt(t) * float(column @ grid.spacing))
            dx = grid.distance ** half
            D = dx / (dx + math.sqrt(t))
            total = sum(columns.values())
            c5 = max(c5, float(np.max(t ** (0.5 + 1 / th) * total / D)))
            s = 0.5 * t
            for b, column in columns.items():
                shifted = DirichletKernelService.boundary_column(grid, b, t + s)[0]
                propagated = DirichletKernelService.apply_G(grid, s, column)
                sk = max(sk, float(np.max(np.abs(propagated - shifted)) / np.max(np.abs(shifted))))
        b0 = grid.domain.boundary_points[0]
        nodes = DirichletKernelService.boundary_nodes(grid, b0)
        mid = grid.nearest_node(0.5 * sum(grid.domain.intervals[0]))
        G = DirichletKernelService.kernel_matrix(grid, times[len(times) // 2], rows=np.array([mid]), cols=nodes)[0]
        quadratic, _ = DirichletKernelService._extrapolate(grid, G, nodes)
        s_nodes = grid.distance[nodes] ** half
        q = G / s_nodes
        with np.errstate(divide="ignore", invalid="ignore"):
            orders.append(math.log(abs(q[1] - quadratic) / abs(q[0] - quadratic)) / math.log(s_nodes[1] / s_nodes[0]))
        report.C4, report.C5, report.semigroup_k_residual = c4, c5, sk
        report.extrapolation_order = float(orders[0]) if orders and math.isfinite(orders[0]) else float("nan")

    @staticmethod
    def _lower_bounds(grid: DirichletKernelGrid, report: DirichletKernelReport) -> None:
        """Spot checks of the kernel lower bounds used for nonexistence."""
        th, half = grid.params.order, grid.params.half
        T = grid.T_star
        scale = T ** (1 / th)
        deep = np.nonzero(grid.distance >= scale)[0]
        lemma31, lemma32, lemma33 = math.inf, math.inf, math.inf
        if deep.size:
            z = deep[np.argmax(grid.distance[deep])]
            for sigma in (scale / 8, scale / 16):
                near = np.nonzero(np.abs(grid.nodes - grid.nodes[z]) < sigma)[0]
                G = DirichletKernelService.kernel_matrix(grid, sigma ** th, rows=np.array([z]), cols=near)[0]
                K = G / grid.distance[near] ** half
                lemma31 = min(lemma31, float(np.min(K)) * sigma * grid.distance[z] ** half)
            for s, t in ((T / 128, T / 64), (T / 256, T / 40), (T / 100, T / 33)):
                G_late = DirichletKernelService.kernel_matrix(grid, 2 * t - s, rows=np.array([z]))[0]
                G_early = DirichletKernelService.kernel_matrix(grid, s, rows=np.array([z]))[0]
                mask = G_early > 1e-12 * G_early.max()
                lemma32 = min(lemma32, float(np.min(G_late[mask] / ((s / (2 * t)) ** (1 / th) * G_early[mask]))))
        for b in grid.domain.boundary_points:
            sigma = scale / 32
            targets = np.nonzero((grid.distance > 2 * sigma) & (grid.distance < 4 * sigma) & (np.abs(grid.nodes - b) < 8 * sigma))[0]
            if not targets.size:
                continue
            t = (2 * sigma) ** th
            column, _ = DirichletKernelService.boundary_column(grid, b, t)
            values = list(column[targets])
            sources = np.nonzero(np.abs(grid.nodes - b) < sigma)[0]
            if sources.size:
                G = DirichletKernelService.kernel_matrix(grid, t, rows=targets, cols=sources)
                values.extend((G / grid.distance[sources][None, :] ** half).ravel())
            lemma33 = min(lemma33, float(np.min(values)) * sigma ** (1 + half))
        report.lower_bounds = {
            "interior_K": lemma31,
            "time_comparison": lemma32,
            "boundary_K": lemma33,
        }
        for name, value in report.lower_bounds.items():
            if math.isfinite(value) and value <= 0:
                report.flags.append(f"lower bound {name} not positive ({value:.3g})")
