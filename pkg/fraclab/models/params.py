import math
from typing import Any
from pydantic import BaseModel, ConfigDict, Field, model_validator


def fractional_constant(dim: int, order: float) -> float:
    """c(N,θ) of the singular-integral form of (−Δ)^{θ/2}."""
    return (
        order * 2 ** (order - 1) * math.gamma((dim + order) / 2)
        / (math.pi ** (dim / 2) * math.gamma(1 - order / 2))
    )


class StableParams(BaseModel):
    """Dimension N, order θ and the normalizing constant c(N,θ)."""

    model_config = ConfigDict(frozen=True)

    dim: int = Field(default=1, ge=1)
    order: float = Field(default=1.0, gt=0.0, lt=2.0)
    c_const: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def _fill_constant(cls, data: Any) -> Any:
        if isinstance(data, dict) and not data.get("c_const"):
            dim = int(data.get("dim", 1))
            order = float(data.get("order", 1.0))
            if dim >= 1 and 0.0 < order < 2.0:
                data = {**data, "c_const": fractional_constant(dim, order)}
        return data

    @model_validator(mode="after")
    def _check_constant(self) -> "StableParams":
        if self.c_const <= 0:
            raise ValueError("c(N,θ) must be positive")
        return self

    @property
    def theta(self) -> float:
        return self.order

    @property
    def half(self) -> float:
        """θ/2, the boundary-decay exponent."""
        return self.order / 2


class KernelValue(BaseModel):
    """Γ_θ(x,t) together with its comparison envelope."""

    model_config = ConfigDict(frozen=True)

    value: float = Field(ge=0.0)
    envelope_low: float = Field(ge=0.0)
    envelope_high: float = Field(ge=0.0)

    @model_validator(mode="after")
    def _ordered(self) -> "KernelValue":
        if self.envelope_low > self.envelope_high:
            raise ValueError("envelope_low must not exceed envelope_high")
        return self
