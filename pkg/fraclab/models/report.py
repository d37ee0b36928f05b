from dataclasses import dataclass, field
from typing import Any, Optional
import math


@dataclass
class CriterionReport:
    """Value of a solvability functional together with the (z, σ) that attains it."""

    kind: str
    value: float
    threshold_role: str
    T: float
    p: float
    theta: float
    kappa: float = 1.0
    witness_z: Optional[float | tuple[float, ...]] = None
    witness_sigma: Optional[float] = None
    sigma_profile: list[tuple[float, float]] = field(default_factory=list)
    growth_factor: float = 1.0
    unbounded: bool = False
    skipped: int = 0
    verdict: str = "n/a"
    details: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.value < 0 or math.isnan(self.value):
            raise ValueError(f"criterion value must be nonnegative, got {self.value}")

    @property
    def necessary(self) -> bool:
        return self.threshold_role.startswith("necessary")


@dataclass
class StableKernelReport:
    rows: list[tuple[float, float, float, float, float]] = field(default_factory=list)
    c1: float = float("nan")
    c2: float = float("nan")
    max_residual: float = 0.0
    semigroup_residual: Optional[float] = None
    lower_bound_ratio: Optional[float] = None
    incomplete: bool = False
    messages: list[str] = field(default_factory=list)

    @property
    def max_mass_error(self) -> float:
        return max((abs(r[1] - 1.0) for r in self.rows), default=float("nan"))


@dataclass
class DirichletKernelReport:
    """Outcome of every structural check on a DirichletKernelGrid; failures are flagged, not raised."""

    T_prime: float
    T_star: float
    lambda1: float
    symmetry_error: float = 0.0
    sub_markov: list[tuple[float, float]] = field(default_factory=list)
    chapman_kolmogorov: list[tuple[float, float, float]] = field(default_factory=list)
    domination: float = 0.0
    two_sided: tuple[float, float] = (float("nan"), float("nan"))
    k_estimate: tuple[float, float] = (float("nan"), float("nan"))
    long_time_slope: float = float("nan")
    C4: float = float("nan")
    C5: float = float("nan")
    semigroup_k_residual: float = float("nan")
    lower_bounds: dict[str, float] = field(default_factory=dict)
    extrapolation_order: float = float("nan")
    flags: list[str] = field(default_factory=list)

    @property
    def max_sub_markov(self) -> float:
        return max((m for _, m in self.sub_markov), default=float("nan"))

    @property
    def max_ck_residual(self) -> float:
        return max((r for _, _, r in self.chapman_kolmogorov), default=float("nan"))

    @property
    def slope_error(self) -> float:
        return abs(self.long_time_slope + self.lambda1) / self.lambda1
