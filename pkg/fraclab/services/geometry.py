import logging
import math
from itertools import product
from typing import Sequence
import numpy as np
from scipy import special
from fraclab.core.errors import DomainError
from fraclab.models import Domain, TruncatedBall

logger = logging.getLogger(__name__)

Point = float | tuple[float, ...]


def ball_volume(dim: int, r: float) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) * r ** dim


def cap_volume(dim: int, r: float, height: float) -> float:
    """Volume of the part of a ball of radius r lying above a plane at signed distance
    ``r − height`` below its centre (a cap of the given height, 0 ≤ height ≤ 2r)."""
    height = min(max(height, 0.0), 2 * r)
    if height <= r:
        x = (2 * r * height - height ** 2) / r ** 2
        return 0.5 * ball_volume(dim, r) * special.betainc((dim + 1) / 2, 0.5, x)
    return ball_volume(dim, r) - cap_volume(dim, r, 2 * r - height)


class GeometryService:
    """Distance function, truncated balls and the covering of truncated balls.

    Points are floats for interval unions and N-tuples for half-spaces, where
    Ω = {y_N > 0} and d(y) = y_N.
    """

    @staticmethod
    def as_point(dom: Domain, x) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        expected = dom.dim if dom.kind == "half_space" else 1
        if arr.size != expected:
            raise DomainError(f"expected a point of dimension {expected}, got {arr.size}")
        return arr

    @staticmethod
    def component_of(dom: Domain, x: float) -> int:
        """Index of the closed component containing x (the left one at a shared endpoint)."""
        for idx, (a, b) in enumerate(dom.intervals):
            if a <= x <= b:
                return idx
        raise DomainError(f"x={x:.10g} lies outside the closure of Ω")

    @staticmethod
    def contains_closure(dom: Domain, x) -> bool:
        if dom.kind == "half_space":
            return bool(GeometryService.as_point(dom, x)[-1] >= 0)
        x = float(GeometryService.as_point(dom, x)[0])
        return any(a <= x <= b for a, b in dom.intervals)

    @staticmethod
    def distance_to_boundary(dom: Domain, x: Point) -> float:
        """d(x) = dist(x, ∂Ω) for x in the closure of Ω.

        Raises:
            DomainError: x lies strictly outside Ω̄.
        """
        if dom.kind == "half_space":
            height = float(GeometryService.as_point(dom, x)[-1])
            if height < 0:
                raise DomainError(f"point with y_N={height:.10g} lies outside the half-space")
            return height
        x = float(GeometryService.as_point(dom, x)[0])
        a, b = dom.intervals[GeometryService.component_of(dom, x)]
        return min(x - a, b - x)

    @staticmethod
    def distance_array(dom: Domain, x: np.ndarray) -> np.ndarray:
        """Vectorized d for 1-D points; points outside Ω̄ get 0."""
        if dom.kind == "half_space":
            return np.maximum(np.asarray(x, dtype=float)[..., -1], 0.0)
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for a, b in dom.intervals:
            inside = (x >= a) & (x <= b)
            out[inside] = np.minimum(x[inside] - a, b - x[inside])
        return out

    @staticmethod
    def kinks(dom: Domain) -> list[float]:
        """Points where d is not smooth: boundary points and component midpoints (1-D)."""
        points: list[float] = list(dom.boundary_points)
        for a, b in dom.intervals:
            if math.isfinite(a) and math.isfinite(b):
                points.append(0.5 * (a + b))
        return sorted(points)

    @staticmethod
    def ball_intersect(dom: Domain, z: Point, r: float) -> TruncatedBall:
        """B_Ω(z,r) = B(z,r) ∩ Ω̄.

        Raises:
            DomainError: r ≤ 0 or z outside Ω̄.
        """
        if not r > 0:
            raise DomainError(f"radius must be positive, got {r}")
        if not GeometryService.contains_closure(dom, z):
            raise DomainError(f"center {z} lies outside the closure of Ω")
        if dom.kind == "half_space":
            zz = GeometryService.as_point(dom, z)
            height = float(zz[-1])
            volume = cap_volume(dom.dim, r, r + height)
            return TruncatedBall(center=tuple(zz), radius=r, cap_offset=height, volume=volume)
        x = float(GeometryService.as_point(dom, z)[0])
        pieces = tuple(
            (max(a, x - r), min(b, x + r)) for a, b in dom.intervals if a <= x + r and b >= x - r
        )
        volume = sum(hi - lo for lo, hi in pieces)
        return TruncatedBall(center=(x,), radius=r, pieces=pieces, volume=volume)

    @staticmethod
    def weighted_volume(dom: Domain, z: Point, r: float, power: float) -> float:
        """∫_{B_Ω(z,r)} d(y)^power dy in closed form (1-D)."""
        if dom.kind == "half_space":
            raise DomainError("use MeasureService for half-space weighted volumes")
        ball = GeometryService.ball_intersect(dom, z, r)
        total = 0.0
        for lo, hi in ball.pieces:
            a, b = dom.intervals[GeometryService.component_of(dom, 0.5 * (lo + hi))]
            cuts = [lo, hi]
            if math.isfinite(a) and math.isfinite(b) and lo < 0.5 * (a + b) < hi:
                cuts.insert(1, 0.5 * (a + b))
            for u, v in zip(cuts, cuts[1:]):
                du = GeometryService.distance_to_boundary(dom, u)
                dv = GeometryService.distance_to_boundary(dom, v)
                total += abs(dv ** (1 + power) - du ** (1 + power)) / (1 + power)
        return total

    @staticmethod
    def cover_centers(dom: Domain, z: Point, r: float, delta: float) -> list[Point]:
        """Centres z̄_i ∈ B_Ω(z,2r) with B_Ω(z,r) ⊆ ∪ B_Ω(z̄_i, δr).

        1-D: greedy left-to-right walk; each tentative centre sits δr beyond the
        leftmost uncovered point and is snapped to the end of that point's
        component when it falls outside Ω̄.
        Half-space: cube lattice of side 2δr/√N projected onto Ω̄.

        Raises:
            DomainError: δ ∉ (0,1), r ≤ 0 or z outside Ω̄.
        """
        if not 0 < delta < 1:
            raise DomainError(f"delta must lie in (0,1), got {delta}")
        ball = GeometryService.ball_intersect(dom, z, r)
        radius = delta * r
        if dom.kind == "half_space":
            return GeometryService._lattice_cover(dom, ball, radius)
        centers: list[Point] = []
        tol = 1e-12 * max(r, 1.0)
        for lo, hi in ball.pieces:
            y = lo
            while True:
                center = y + radius
                if center > hi and not GeometryService.contains_closure(dom, center):
                    a, b = dom.intervals[GeometryService.component_of(dom, y)]
                    center = b
                centers.append(center)
                covered_to = center + radius
                if covered_to >= hi - tol:
                    break
                y = covered_to
        return centers

    @staticmethod
    def _lattice_cover(dom: Domain, ball: TruncatedBall, radius: float) -> list[Point]:
        n = dom.dim
        z = np.asarray(ball.center)
        side = 2 * radius / math.sqrt(n)
        count = math.ceil(2 * ball.radius / side - 1e-12)
        offsets = -ball.radius + side * (np.arange(count) + 0.5)
        centers: list[Point] = []
        for idx in product(range(count), repeat=n):
            c = z + offsets[list(idx)]
            # nearest point of the cube to z, to test that the cell meets the ball
            nearest = np.clip(z, c - side / 2, c + side / 2)
            if np.linalg.norm(nearest - z) > ball.radius:
                continue
            if c[-1] + side / 2 < 0:
                continue
            c[-1] = max(c[-1], 0.0)
            centers.append(tuple(float(v) for v in c))
        return centers

    @staticmethod
    def covers(dom: Domain, z: Point, r: float, centers: Sequence[Point], radius: float, samples: int = 2001) -> bool:
        """Dense-sample check that B_Ω(z,r) ⊆ ∪ B(c, radius) (1-D)."""
        ball = GeometryService.ball_intersect(dom, z, r)
        c = np.asarray([float(np.atleast_1d(v)[0]) for v in centers])
        for lo, hi in ball.pieces:
            ys = np.linspace(lo, hi, samples)
            if c.size == 0 or np.any(np.min(np.abs(ys[:, None] - c[None, :]), axis=1) > radius * (1 + 1e-9)):
                return False
        return True
