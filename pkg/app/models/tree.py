"""
Tree models - excursion paths and local-time estimates
"""

from enum import Enum

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


class PathOrigin(str, Enum):
    """Where an excursion path came from"""
    SIMULATED = "simulated"
    SYNTHETIC = "synthetic"


class ExcursionPath(BaseModel):
    """
    Nonnegative path on a uniform grid, zero at both ends.

    Grid index i stands for time i * dt; the lifetime is zeta = (n - 1) dt.
    The samples array is made read-only on validation.
    """
    samples: np.ndarray = Field(..., description="Heights h(t_i) on the grid")
    dt: float = Field(..., gt=0.0, description="Grid step")
    origin: PathOrigin = Field(PathOrigin.SYNTHETIC, description="simulated | synthetic")

    class Config:
        """Pydantic model configuration"""
        arbitrary_types_allowed = True
        use_enum_values = True

    @field_validator("samples", mode="before")
    @classmethod
    def _as_array(cls, value) -> np.ndarray:
        arr = np.array(value, dtype=float)
        if arr.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _excursion(self) -> "ExcursionPath":
        h = self.samples
        if h.size < 2:
            raise ValueError("an excursion path needs at least two samples")
        if not np.all(np.isfinite(h)):
            raise ValueError("samples must be finite")
        if np.any(h < 0.0):
            raise ValueError("samples must be nonnegative")
        if h[0] != 0.0 or h[-1] != 0.0:
            raise ValueError("an excursion path starts and ends at 0")
        return self

    @property
    def n(self) -> int:
        return int(self.samples.size)

    @property
    def zeta(self) -> float:
        """Lifetime (n - 1) dt"""
        return (self.n - 1) * self.dt

    @property
    def height(self) -> float:
        return float(np.max(self.samples))


class LocalTimeEstimate(BaseModel):
    """
    ell^a approximated by (number of excursions above a reaching a + eps) / v(eps)
    """
    level: float = Field(..., ge=0.0, description="Level a")
    epsilon: float = Field(..., gt=0.0, description="Upcrossing height")
    count: int = Field(..., ge=0, description="Excursion intervals above a that reach a + epsilon")
    v_eps: float = Field(..., gt=0.0, description="Normalization v(epsilon)")
    value: float = Field(..., ge=0.0, description="count / v_eps")
