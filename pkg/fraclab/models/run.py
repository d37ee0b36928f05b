from dataclasses import dataclass, field
from enum import Enum
from typing import Optional
import math
import numpy as np
from fraclab.core.errors import DomainError


class Verdict(str, Enum):
    PENDING = "pending"
    CONVERGED = "converged"
    DIVERGED = "diverged"
    DIVERGED_AT_T0 = "diverged_at_t0"
    BUDGET = "budget"

    @property
    def solvable(self) -> bool:
        return self is Verdict.CONVERGED


@dataclass
class PicardRun:
    """State of one monotone iteration u_{j+1} = u_1 + N[u_j] on a space-time mesh.

    Arrays are indexed (node, time). A run is owned by exactly one worker.
    """

    times: np.ndarray
    p: float
    u1: np.ndarray
    current: np.ndarray
    previous: Optional[np.ndarray] = None
    j: int = 1
    sup_history: list[float] = field(default_factory=list)
    verdict: Verdict = Verdict.PENDING
    reason: str = ""
    flagged_nodes: list[int] = field(default_factory=list)
    first_cell_exponent: Optional[np.ndarray] = None
    max_monotone_violation: float = 0.0
    residual: float = float("nan")
    kappa: float = 0.0

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def finished(self) -> bool:
        return self.verdict is not Verdict.PENDING

    def trace_rows(self) -> list[tuple[int, float, str]]:
        return [(j + 1, s, self.verdict.value) for j, s in enumerate(self.sup_history)]


@dataclass(frozen=True)
class IntegralInequalityInstance:
    """Data (c₁, c₂, α, β, t_*, T) of the integral inequality

    ζ(t) ≥ c₁ + c₂ ∫_{t_*}^{t} s^{−α} ζ(s)^β ds  on (t_*, T).
    """

    c1: float
    c2: float
    alpha: float
    beta: float
    t_star: float
    T: float

    def __post_init__(self) -> None:
        if self.beta <= 1:
            raise DomainError(f"beta must exceed 1, got {self.beta}")
        if self.c1 <= 0 or self.c2 <= 0:
            raise DomainError("c1 and c2 must be positive")
        if self.alpha < 0:
            raise DomainError("alpha must be nonnegative")
        if not (0 < self.t_star < self.T / 2):
            raise DomainError(f"t_star must lie in (0, T/2), got t_star={self.t_star}, T={self.T}")


@dataclass
class KappaBracket:
    """Bracket [κ_lo, κ_hi] around the critical amplitude of a profile family."""

    kappa_lo: float
    kappa_hi: float
    T_used: Optional[float] = None
    unbounded_above: bool = False
    certified: bool = False
    necessary_ratio_hi: float = float("nan")
    gamma1: float = float("nan")
    evaluations: list[tuple[float, bool, Optional[float]]] = field(default_factory=list)

    @property
    def width(self) -> float:
        return self.kappa_hi - self.kappa_lo

    @property
    def relative_width(self) -> float:
        if math.isinf(self.kappa_hi) or self.kappa_hi == 0:
            return math.inf
        return self.width / self.kappa_hi


@dataclass(frozen=True)
class InequalityBound:
    """Upper bounds on c₁ for an IntegralInequalityInstance.

    ``general`` is C(α,β) c₂^{−1/(β−1)} t_*^{(α−1)/(β−1)}; ``sharp`` is the
    logarithmic bound available when α = 1 (None otherwise).
    """

    general: float
    constant: float
    sharp: Optional[float] = None

    @property
    def best(self) -> float:
        return self.sharp if self.sharp is not None else self.general
