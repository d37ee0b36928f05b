from dataclasses import dataclass, field
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from fraclab.models.domain import Domain
from fraclab.models.params import StableParams


@dataclass(frozen=True, eq=False)
class DirichletKernelGrid:
    """Discretized (−Δ)^{θ/2}|_Ω on a 1-D interval union, with its spectrum.

    ``operator`` is the symmetrized matrix H^{1/2} A H^{-1/2} (H = diag(spacing)),
    so that G(x_i,x_j,t) = Σ_k e^{−λ_k t} v_k(i) v_k(j) / √(h_i h_j).
    The grid is read-only once assembled and may be shared by worker threads.
    """

    domain: Domain
    params: StableParams
    nodes: np.ndarray
    spacing: np.ndarray
    distance: np.ndarray
    component: np.ndarray
    operator: np.ndarray
    killing: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    T_prime: float = float("nan")
    T_star: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def h(self) -> float:
        """Largest node spacing."""
        return float(self.spacing.max())

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def ground_state(self) -> np.ndarray:
        """First eigenfunction in nodal form, normalized positive."""
        v = self.eigenvectors[:, 0] / np.sqrt(self.spacing)
        return v if v.sum() >= 0 else -v

    def nearest_node(self, x: float) -> int:
        return int(np.argmin(np.abs(self.nodes - x)))


class BoundaryFactor(BaseModel):
    """D(x,t) = d(x)^{θ/2} / (d(x)^{θ/2} + √t)."""

    model_config = ConfigDict(frozen=True)

    x: float | tuple[float, ...]
    t: float = Field(gt=0.0)
    value: float = Field(ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def _range(self) -> "BoundaryFactor":
        if not np.isfinite(self.value):
            raise ValueError("boundary factor must be finite")
        return self
