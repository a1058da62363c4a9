"""
Sample models - walk excursions, subordinator paths and decorated spines
"""

from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from .tree import ExcursionPath


class WalkExcursion(BaseModel):
    """
    One excursion of a downward-skip-free walk with its discrete height process.

    The rescaled path has time step 1/p and space step b_p/p with b_p = p^(1/gamma).
    """
    steps: np.ndarray = Field(..., description="Walk steps xi - 1, ending at the first hit of -1")
    heights: np.ndarray = Field(..., description="Discrete height process H_0..H_N, H_N = 0")
    gamma: float = Field(..., description="Stable index of the offspring law")
    scale: int = Field(..., ge=1, description="Walk scale p")
    time_scale: float = Field(..., gt=0.0, description="Rescaled time per step, 1/p")
    space_scale: float = Field(..., gt=0.0, description="Rescaled height per generation, b_p/p")
    attempts: int = Field(1, ge=1, description="Walks drawn until this one was accepted")

    class Config:
        """Pydantic model configuration"""
        arbitrary_types_allowed = True

    @property
    def length(self) -> int:
        """Number of vertices N"""
        return int(self.steps.size)

    def to_path(self) -> ExcursionPath:
        return ExcursionPath(samples=self.heights * self.space_scale, dt=self.time_scale, origin="simulated")


class SubordinatorPath(BaseModel):
    """S on the grid 0 < r_max 2^-depth < ... < r_max, with S_0 = 0 prepended"""
    r: np.ndarray = Field(..., description="Grid, ascending, r[0] = 0")
    values: np.ndarray = Field(..., description="S_r, nondecreasing, values[0] = 0")
    mech_label: str = Field(..., description="Mechanism whose phi* is the Laplace exponent")
    exponent: str = Field(..., description="Description of phi*")
    seed: int = Field(..., ge=0, description="Root seed")
    stream: int = Field(0, ge=0, description="Stream index under the seed")
    notes: List[str] = Field(default_factory=list, description="Truncation and budget diagnostics")

    class Config:
        """Pydantic model configuration"""
        arbitrary_types_allowed = True


class SpineSample(BaseModel):
    """
    Decorated spine at GW scale p.

    Forest j is grafted at spine height r*_j = g_j h_p with K_j roots; its
    profile m_j(y) is the mass within height y above the graft.
    """
    jump_positions: np.ndarray = Field(..., description="Graft heights r*_j")
    jump_sizes: np.ndarray = Field(..., description="Rescaled immigrant counts K_j / b_p")
    lifetimes: np.ndarray = Field(..., description="Total mass zeta_j of each grafted forest")
    profiles: Optional[np.ndarray] = Field(None, description="Cumulative masses m_j at depths 1..R - g_j")
    radii: np.ndarray = Field(..., description="Radius grid, ascending")
    mass: np.ndarray = Field(..., description="M*_r on the radius grid")
    lifetime_sum: np.ndarray = Field(..., description="S_r = sum of lifetimes grafted below r")
    scale: int = Field(..., ge=1, description="GW scale p")
    generation_height: float = Field(..., gt=0.0, description="h_p = b_p / p")
    seed: int = Field(..., ge=0, description="Root seed")
    stream: int = Field(0, ge=0, description="Stream index under the seed")

    class Config:
        """Pydantic model configuration"""
        arbitrary_types_allowed = True

    def domination_violations(self) -> int:
        return int(np.count_nonzero(self.mass > self.lifetime_sum))

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.mass) >= 0.0))


class LiminfResult(BaseModel):
    """min of value(r)/g(r) over the grid points inside a window"""
    min_ratio: float = Field(..., description="Smallest ratio in the window")
    argmin_r: float = Field(..., description="Grid radius attaining it")
    window: Tuple[float, float] = Field(..., description="(r_lo, r_hi)")
    profile: List[Tuple[float, float]] = Field(default_factory=list, description="(log r, ratio) pairs")


class LaplaceEstimate(BaseModel):
    """Monte Carlo E[exp(-lambda X)] against a target"""
    r: float = Field(..., description="Radius or time")
    lam: float = Field(..., description="lambda")
    mean: float = Field(..., description="Sample mean of exp(-lambda X)")
    se: float = Field(..., description="Standard error")
    target: float = Field(..., description="Closed-form or kernel value")
    z_score: float = Field(..., description="(mean - target) / se")
    replicates: int = Field(..., ge=1, description="Replicates used")
    passed: bool = Field(..., description="|z| within the acceptance")
