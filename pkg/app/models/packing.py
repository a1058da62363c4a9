"""
Packing models - instances, packing estimates and density profiles
"""

from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


class PackingMethod(str, Enum):
    """Solver that produced a packing"""
    EXACT = "exact"
    GREEDY = "greedy"
    ENUMERATE = "enumerate"


class ToyGauge(BaseModel):
    """
    Gauge used on synthetic instances: g(r) = scale * r^power, or a lookup
    table of (r, g) pairs when one is given.
    """
    scale: float = Field(1.0, gt=0.0, description="Multiplier of r^power")
    power: float = Field(1.0, gt=0.0, description="Exponent of r")
    table: Optional[List[Tuple[float, float]]] = Field(None, description="Explicit (r, g) pairs")

    class Config:
        frozen = True

    def __call__(self, radii) -> np.ndarray:
        r = np.asarray(radii, dtype=float)
        if self.table is None:
            return self.scale * r ** self.power
        lookup = dict(self.table)
        try:
            return np.array([lookup[float(x)] for x in np.atleast_1d(r)]).reshape(r.shape)
        except KeyError as e:
            raise ValueError(f"toy gauge table has no entry for r = {e.args[0]}") from e


class PackingInstance(BaseModel):
    """
    Finite packing problem: candidate balls B(x_i, r_k) for every point and
    every radius of the grid, weight g(r_k).
    """
    points: List[int] = Field(..., description="Point labels (grid indices on a coded tree)")
    distances: np.ndarray = Field(..., description="Pairwise distance matrix")
    epsilon: float = Field(..., gt=0.0, description="Packing scale")
    radius_grid: List[float] = Field(..., description="Admissible radii, decreasing, in (0, epsilon]")
    weights: List[float] = Field(..., description="g(r) per radius of the grid")

    class Config:
        """Pydantic model configuration"""
        arbitrary_types_allowed = True

    @field_validator("distances", mode="before")
    @classmethod
    def _as_matrix(cls, value) -> np.ndarray:
        arr = np.array(value, dtype=float)
        if arr.size == 0:
            arr = np.zeros((0, 0))
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _consistent(self) -> "PackingInstance":
        n = len(self.points)
        if self.distances.shape != (n, n):
            raise ValueError(f"distance matrix must be {n}x{n}")
        if n and (np.any(self.distances < 0.0) or not np.allclose(self.distances, self.distances.T, rtol=0.0, atol=1e-15)):
            raise ValueError("distances must be nonnegative and symmetric")
        if not self.radius_grid:
            raise ValueError("radius grid is empty")
        if any(not (0.0 < r <= self.epsilon) for r in self.radius_grid):
            raise ValueError("radii must lie in (0, epsilon]")
        if any(b >= a for a, b in zip(self.radius_grid, self.radius_grid[1:])):
            raise ValueError("radius grid must be strictly decreasing")
        if len(self.weights) != len(self.radius_grid):
            raise ValueError("one weight per radius")
        if any(w < 0.0 for w in self.weights):
            raise ValueError("gauge weights must be nonnegative")
        return self

    @property
    def n_pairs(self) -> int:
        return len(self.points) * len(self.radius_grid)


class Ball(BaseModel):
    """Closed ball B(center, radius) of a packing"""
    center: int = Field(..., description="Point label")
    radius: float = Field(..., gt=0.0, description="Radius")
    weight: float = Field(..., description="g(radius)")


class PackingEstimate(BaseModel):
    """Value of a packing and the balls realizing it"""
    value: float = Field(..., ge=0.0, description="sum of g(r_i) over the chosen balls")
    balls: List[Ball] = Field(default_factory=list, description="Chosen balls")
    method: PackingMethod = Field(..., description="exact | greedy | enumerate")
    gap: Optional[float] = Field(None, description="Upper bound minus value, when known")
    violations: int = Field(0, ge=0, description="Pairs failing d > r_i + r_j on post-hoc validation")
    epsilon: float = Field(..., gt=0.0, description="Packing scale")

    class Config:
        use_enum_values = True


class DensityProfile(BaseModel):
    """Ball masses around one center against the gauge"""
    center: int = Field(..., description="Center grid index")
    radii: List[float] = Field(..., description="Radius grid, ascending")
    masses: List[float] = Field(..., description="m(B(center, r))")
    log_ratios: List[float] = Field(..., description="log m - log g")
    min_ratio: float = Field(..., ge=0.0, description="Smallest m / g on the window")
    argmin_r: float = Field(..., description="Radius attaining it")


class PackingRatioRow(BaseModel):
    """One subtree of a packing-versus-mass comparison"""
    interval_id: int = Field(..., ge=0, description="Position in the interval list")
    start: int = Field(..., description="First grid index of the interval")
    stop: int = Field(..., description="Last grid index of the interval")
    estimate: float = Field(..., ge=0.0, description="Packing pre-measure estimate")
    mass: float = Field(..., ge=0.0, description="Length of the interval in time")
    ratio: float = Field(..., description="estimate / mass")
    method: PackingMethod = Field(..., description="Solver used")

    class Config:
        use_enum_values = True


class PackingRatioReport(BaseModel):
    """Ratios P / m across subtrees and their spread"""
    rows: List[PackingRatioRow] = Field(default_factory=list, description="Per-interval estimates")
    max_min_ratio: Optional[float] = Field(None, description="max ratio / min ratio over the rows")
    epsilon: float = Field(..., gt=0.0, description="Packing scale")
    notes: List[str] = Field(default_factory=list, description="Skipped intervals and diagnostics")
