from typing import Literal, Optional
from pydantic import BaseModel, ConfigDict, Field, model_validator

Point = float | tuple[float, ...]


class DensityProfile(BaseModel):
    """Radial law y ↦ value·|y−c|^{−a}·|log|y−c||^{−b} on B(c,R), or a table / constant.

    ``kind="uniform"`` is the constant ``value`` on the whole domain,
    ``kind="table"`` is the piecewise-linear interpolant of (table_x, table_f) (1-D).
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["none", "uniform", "power", "power_log", "table"] = "none"
    center: Point = 0.0
    exponent: float = Field(default=0.0, ge=0.0)
    log_exponent: float = Field(default=0.0, ge=0.0)
    radius: float = Field(default=1.0, gt=0.0)
    value: float = Field(default=1.0, ge=0.0)
    table_x: tuple[float, ...] = ()
    table_f: tuple[float, ...] = ()

    @model_validator(mode="after")
    def _check(self) -> "DensityProfile":
        if self.kind == "table":
            if len(self.table_x) != len(self.table_f) or len(self.table_x) < 2:
                raise ValueError("a table density needs matching abscissae and values (≥ 2)")
            if any(f < 0 for f in self.table_f):
                raise ValueError("densities are nonnegative")
            if list(self.table_x) != sorted(self.table_x):
                raise ValueError("table abscissae must be increasing")
        if self.kind == "power_log" and self.radius >= 1.0:
            raise ValueError("log-corrected profiles need a support radius below 1")
        return self

    @property
    def is_zero(self) -> bool:
        return self.kind == "none" or self.value == 0.0

    @property
    def is_radial(self) -> bool:
        return self.kind in ("power", "power_log")


class SingularProfile(BaseModel):
    """Optimal singularity |x−z|^{−a}|log|x−z||^{−b}χ_{B_Ω(z,R)} of an interior or boundary point."""

    model_config = ConfigDict(frozen=True)

    center: Point
    exponent: float = Field(gt=0.0)
    log_exponent: float = Field(default=0.0, ge=0.0)
    radius: float
    locus: Literal["interior", "boundary"] = "interior"
    critical: bool = False

    @model_validator(mode="after")
    def _radius(self) -> "SingularProfile":
        if self.radius not in (1.0, 0.5):
            raise ValueError("profile support radius is 1 (supercritical) or 1/2 (critical)")
        if self.critical != (self.radius == 0.5):
            raise ValueError("critical profiles and only they use radius 1/2")
        return self

    def to_density(self) -> DensityProfile:
        return DensityProfile(
            kind="power_log" if self.log_exponent > 0 else "power",
            center=self.center,
            exponent=self.exponent,
            log_exponent=self.log_exponent,
            radius=self.radius,
        )


class Atom(BaseModel):
    model_config = ConfigDict(frozen=True)

    location: Point
    mass: float = Field(gt=0.0)


class MeasureSpec(BaseModel):
    """Initial datum μ on Ω̄.

    μ = κ·( d^{θ/2} f dy  +  h dS on ∂Ω  +  Σ atoms ). With ``weighted=False`` the
    interior part is f dy instead of d^{θ/2} f dy. ``boundary_density`` maps a
    boundary point (1-D) to h(b); on a half-space h is the radial
    ``boundary_profile`` centred at a point of ∂Ω.
    """

    model_config = ConfigDict(frozen=True)

    interior: DensityProfile = DensityProfile()
    weighted: bool = True
    boundary_density: tuple[tuple[float, float], ...] = ()
    boundary_profile: DensityProfile = DensityProfile()
    atoms: tuple[Atom, ...] = ()
    amplitude: float = Field(default=1.0, ge=0.0)

    @model_validator(mode="after")
    def _nonnegative(self) -> "MeasureSpec":
        if any(h < 0 for _, h in self.boundary_density):
            raise ValueError("boundary densities are nonnegative")
        return self

    @classmethod
    def zero(cls) -> "MeasureSpec":
        return cls(amplitude=0.0)

    @classmethod
    def from_profile(cls, profile: SingularProfile, kappa: float = 1.0) -> "MeasureSpec":
        return cls(interior=profile.to_density(), amplitude=kappa)

    def scaled(self, kappa: float) -> "MeasureSpec":
        return self.model_copy(update={"amplitude": kappa})

    @property
    def has_boundary_part(self) -> bool:
        return any(h > 0 for _, h in self.boundary_density) or not self.boundary_profile.is_zero

    @property
    def is_zero(self) -> bool:
        return self.amplitude == 0.0 or (
            self.interior.is_zero and not self.has_boundary_part and not self.atoms
        )

    def focal_points(self) -> list[Point]:
        """Locations where μ concentrates: profile centre and atoms."""
        points: list[Point] = []
        if self.interior.is_radial:
            points.append(self.interior.center)
        points.extend(a.location for a in self.atoms)
        return points
