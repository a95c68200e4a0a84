from __future__ import annotations

from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator


class ModelKind(str, Enum):
    """Refraction index profiles n^2(x)."""
    CONSTANT = "constant"
    LINEAR_Z = "linear_z"
    QUADRATIC_Z = "quadratic_z"
    LINEAR_X_QUADRATIC_Z = "linear_x_quadratic_z"
    POLYNOMIAL_Z = "polynomial_z"


class SourceKind(str, Enum):
    """Source distributions J(x)."""
    POINT_DELTA = "point_delta"
    PHASE_SHEET = "phase_sheet"


class RefractionModel(BaseModel):
    """
    Squared refraction index.

    constant:              n^2 = n0sq
    linear_z:              n^2 = n0sq - a z
    quadratic_z:           n^2 = n0sq - alpha z^2
    linear_x_quadratic_z:  n^2 = n0sq - beta x - alpha z^2
    polynomial_z:          n^2 = sum_k poly[k] z^k
    """
    kind: ModelKind = Field(..., description="Profile variant")
    n0sq: float = Field(1.0, gt=0, description="Squared index at the origin (dimensionless)")
    a: float = Field(0.0, description="Linear z slope (1/length)")
    alpha: float = Field(0.0, ge=0, description="Quadratic z curvature (1/length^2)")
    beta: float = Field(0.0, description="Linear x slope (1/length)")
    poly: List[float] = Field(default_factory=list, description="Ascending coefficients of n^2(z)")

    class Config:
        frozen = True
        json_schema_extra = {
            "example": {
                "kind": "linear_z",
                "n0sq": 1.0,
                "a": 1.0,
            }
        }

    @model_validator(mode="after")
    def _check_variant(self) -> "RefractionModel":
        if self.kind in (ModelKind.QUADRATIC_Z, ModelKind.LINEAR_X_QUADRATIC_Z) and self.alpha <= 0:
            raise ValueError("channel models need alpha > 0")
        if self.kind == ModelKind.POLYNOMIAL_Z and not self.poly:
            raise ValueError("polynomial_z needs at least one coefficient")
        return self

    def z_polynomial(self) -> List[float]:
        """Ascending coefficients of n^2 as a polynomial in z (x-independent models only)."""
        if self.kind == ModelKind.CONSTANT:
            return [self.n0sq]
        if self.kind == ModelKind.LINEAR_Z:
            return [self.n0sq, -self.a]
        if self.kind == ModelKind.QUADRATIC_Z:
            return [self.n0sq, 0.0, -self.alpha]
        if self.kind == ModelKind.POLYNOMIAL_Z:
            return list(self.poly)
        raise ValueError(f"{self.kind.value} depends on x")

    def n_squared(self, x: Tuple[float, ...]) -> float:
        """n^2 at a spatial point; the last coordinate is z."""
        z = x[-1]
        if self.kind == ModelKind.LINEAR_X_QUADRATIC_Z:
            return self.n0sq - self.beta * x[0] - self.alpha * z * z
        return float(sum(c * z ** k for k, c in enumerate(self.z_polynomial())))


class SourceSpec(BaseModel):
    """Point source at `location`, or a phase sheet exp(-i k0 (x-x0)^2 / 4 mu) on z = z'."""
    kind: SourceKind = Field(SourceKind.POINT_DELTA, description="Source variant")
    location: List[float] = Field(..., description="x' (point) or (x0, z') for a phase sheet")
    mu: Optional[float] = Field(None, description="Phase-sheet smearing length")

    class Config:
        frozen = True
        json_schema_extra = {
            "example": {
                "kind": "point_delta",
                "location": [0.0, 0.0],
            }
        }

    @model_validator(mode="after")
    def _check_mu(self) -> "SourceSpec":
        if self.kind == SourceKind.PHASE_SHEET and (self.mu is None or self.mu <= 0):
            raise ValueError("phase_sheet needs mu > 0")
        return self

    @property
    def dimension(self) -> int:
        return len(self.location)


class GridSpec(BaseModel):
    """Regular (x, z) grid."""
    x_range: Tuple[float, float] = Field(..., description="x extent")
    z_range: Tuple[float, float] = Field(..., description="z extent")
    resolution: Tuple[int, int] = Field((21, 21), description="Points per axis (nx, nz)")

    @field_validator("resolution")
    @classmethod
    def _check_resolution(cls, value: Tuple[int, int]) -> Tuple[int, int]:
        if min(value) < 2:
            raise ValueError("resolution must be >= 2 per axis")
        return value

    def points(self) -> List[Tuple[float, float]]:
        """Row-major list of grid points (z outer, x inner)."""
        import numpy as np
        xs = np.linspace(self.x_range[0], self.x_range[1], self.resolution[0])
        zs = np.linspace(self.z_range[0], self.z_range[1], self.resolution[1])
        return [(float(x), float(z)) for z in zs for x in xs]

    @property
    def spacing(self) -> Tuple[float, float]:
        nx, nz = self.resolution
        return (
            (self.x_range[1] - self.x_range[0]) / (nx - 1),
            (self.z_range[1] - self.z_range[0]) / (nz - 1),
        )


class RunConfig(BaseModel):
    """One experiment: model, source, wavenumbers, grid and command options."""
    model: RefractionModel
    source: SourceSpec
    k0: List[float] = Field(default_factory=lambda: [5.0], description="Wavenumbers (1/length)")
    grid: Optional[GridSpec] = Field(None, description="Spatial grid for field/caustic commands")
    point: Optional[List[float]] = Field(None, description="Observation point for single-point commands")
    options: dict = Field(default_factory=dict, description="Command-specific options")
    out_dir: str = Field("out", description="Output directory")

    class Config:
        json_schema_extra = {
            "example": {
                "model": {"kind": "linear_z", "n0sq": 1.0, "a": 1.0},
                "source": {"kind": "point_delta", "location": [0.0, 0.0]},
                "k0": [5.0],
                "grid": {"x_range": [0.5, 3.0], "z_range": [-1.0, 1.5], "resolution": [26, 26]},
                "out_dir": "out/linear",
            }
        }

    @field_validator("k0")
    @classmethod
    def _check_k0(cls, value: List[float]) -> List[float]:
        if not value or any(k <= 0 for k in value):
            raise ValueError("k0 values must be positive")
        return value
