import math
from typing import Literal, Optional
from pydantic import BaseModel, ConfigDict, Field, model_validator

Interval = tuple[float, float]


class Domain(BaseModel):
    """Open set Ω: a finite union of disjoint open intervals, or the half-space R^N_+.

    Unbounded ends are written with ±inf; every numerical routine clips them to
    ``truncation_radius``.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["interval_union", "half_space"] = "interval_union"
    intervals: tuple[Interval, ...] = ()
    dim: int = Field(default=1, ge=1)
    truncation_radius: float = Field(default=50.0, gt=0.0)

    @model_validator(mode="after")
    def _check_intervals(self) -> "Domain":
        if self.kind == "half_space":
            return self
        if self.dim != 1:
            raise ValueError("interval unions live in dimension 1")
        if not self.intervals:
            raise ValueError("an interval union needs at least one interval")
        ordered = sorted(self.intervals)
        for a, b in ordered:
            if not a < b:
                raise ValueError(f"empty interval ({a}, {b})")
        for (a0, b0), (a1, b1) in zip(ordered, ordered[1:]):
            if b0 > a1:
                raise ValueError(f"intervals ({a0}, {b0}) and ({a1}, {b1}) overlap")
        if len(ordered) == 1 and math.isinf(ordered[0][0]) and math.isinf(ordered[0][1]):
            raise ValueError("Ω = R has an empty boundary")
        if tuple(ordered) != self.intervals:
            object.__setattr__(self, "intervals", tuple(ordered))
        return self

    @classmethod
    def interval(cls, a: float, b: float, **kwargs) -> "Domain":
        return cls(kind="interval_union", intervals=((a, b),), **kwargs)

    @classmethod
    def half_space(cls, dim: int, **kwargs) -> "Domain":
        if dim == 1:
            return cls(kind="interval_union", intervals=((0.0, math.inf),), **kwargs)
        return cls(kind="half_space", dim=dim, **kwargs)

    @property
    def is_bounded(self) -> bool:
        if self.kind == "half_space":
            return False
        return all(math.isfinite(a) and math.isfinite(b) for a, b in self.intervals)

    @property
    def boundary_points(self) -> tuple[float, ...]:
        """Finite endpoints of the components (1-D only); shared endpoints appear once."""
        points: list[float] = []
        for a, b in self.intervals:
            for e in (a, b):
                if math.isfinite(e) and (not points or points[-1] != e):
                    points.append(e)
        return tuple(points)

    @property
    def diameter(self) -> float:
        if not self.is_bounded:
            return math.inf
        return self.intervals[-1][1] - self.intervals[0][0]

    def clipped(self) -> tuple[Interval, ...]:
        """Components with infinite ends replaced by ±truncation_radius."""
        r = self.truncation_radius
        return tuple((max(a, -r), min(b, r)) for a, b in self.intervals)


class TruncatedBall(BaseModel):
    """B_Ω(z,r) = B(z,r) ∩ Ω̄.

    In 1-D ``pieces`` is the exact list of closed intervals. For a half-space the
    set is the cap of a ball cut by {y_N ≥ 0}; ``cap_offset`` is the height z_N of
    the centre above the boundary plane.
    """

    model_config = ConfigDict(frozen=True)

    center: tuple[float, ...]
    radius: float = Field(gt=0.0)
    pieces: tuple[Interval, ...] = ()
    cap_offset: Optional[float] = None
    volume: float = 0.0
