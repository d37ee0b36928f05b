import logging
import math
from dataclasses import dataclass
from typing import Literal
import numpy as np
from scipy.optimize import brentq
from fraclab.core.errors import DomainError

logger = logging.getLogger(__name__)

_SAMPLE = np.logspace(-8, 8, 401)


@dataclass(frozen=True)
class OrliczGauge:
    """Gauge Ψ used by the sufficient conditions.

    ``power``: Ψ(τ) = τ^q with q > 1.
    ``log_refined``: Ψ(τ) = τ [log(L + τ)]^r with r > 0 and a shift L ≥ e large
    enough that Ψ is convex, τ^p/Ψ(τ) is increasing and τ^ε [log(L+τ)]^{−pr} is
    increasing (ε = (p−1)/2).
    """

    kind: Literal["power", "log_refined"]
    parameter: float
    p: float
    shift: float = math.e

    def __post_init__(self) -> None:
        if self.p <= 1:
            raise DomainError(f"p must exceed 1, got {self.p}")
        if self.kind == "power" and self.parameter <= 1:
            raise DomainError(f"power gauge needs q > 1, got {self.parameter}")
        if self.kind == "log_refined" and self.parameter <= 0:
            raise DomainError(f"log-refined gauge needs r > 0, got {self.parameter}")

    @classmethod
    def power(cls, q: float, p: float) -> "OrliczGauge":
        return cls(kind="power", parameter=q, p=p)

    @classmethod
    def log_refined(cls, r: float, p: float, max_doublings: int = 200) -> "OrliczGauge":
        """Find the shift L by doubling from e until all three monotonicity checks pass."""
        shift = math.e
        for _ in range(max_doublings):
            gauge = cls(kind="log_refined", parameter=r, p=p, shift=shift)
            if gauge.admissible():
                logger.debug(f"Log-refined gauge r={r}, p={p}: shift L={shift:.6g}")
                return gauge
            shift *= 2.0
        raise DomainError(f"no admissible shift found for r={r}, p={p}")

    @property
    def epsilon(self) -> float:
        return (self.p - 1.0) / 2.0

    def psi(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.kind == "power":
            return tau ** self.parameter
        return tau * np.log(self.shift + tau) ** self.parameter

    def psi_inverse(self, value: float) -> float:
        if value <= 0:
            return 0.0
        if self.kind == "power":
            return value ** (1.0 / self.parameter)
        # Ψ(τ) ≥ τ for L ≥ e, so the root lies in (0, value]
        hi = value
        return brentq(lambda s: float(self.psi(s)) - value, 0.0, hi, xtol=1e-14 * max(hi, 1e-300), rtol=1e-13)

    def A(self, tau: float) -> float:
        """A(τ) = Ψ^{-1}(τ)^p / τ."""
        return self.psi_inverse(tau) ** self.p / tau

    def B(self, tau: float) -> float:
        """B(τ) = τ / Ψ^{-1}(τ)."""
        return tau / self.psi_inverse(tau)

    def second_derivative(self, tau):
        tau = np.asarray(tau, dtype=float)
        q = self.parameter
        if self.kind == "power":
            return q * (q - 1) * tau ** (q - 2)
        s = self.shift + tau
        ell = np.log(s)
        return q * ell ** (q - 2) / s ** 2 * (ell * (2 * self.shift + tau) + (q - 1) * tau)

    def admissible(self, sample: np.ndarray = _SAMPLE) -> bool:
        """Sampled convexity and the two monotonicity requirements on the shift."""
        if np.any(self.second_derivative(sample) < 0):
            return False
        if self.kind == "power":
            return True
        r, p, eps = self.parameter, self.p, self.epsilon
        s = self.shift + sample
        ell = np.log(s)
        ratio_slope = (p - 1) / sample - r / (s * ell)
        damped_slope = eps / sample - p * r / (s * ell)
        return bool(np.all(ratio_slope > 0) and np.all(damped_slope > 0))
