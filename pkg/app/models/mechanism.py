"""
Branching mechanism models - the (alpha, beta, pi) triple and its reports
"""

import math
from enum import Enum
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


class MechanismKind(str, Enum):
    """Mechanism descriptor kinds accepted in lab configs"""
    STABLE = "stable"
    ATOMS = "atoms"
    NULL = "null"
    COUNTEREXAMPLE = "counterexample"


class Atom(BaseModel):
    """One atom a * delta_r of a discrete Lévy measure, stored as logs"""
    log_r: float = Field(..., description="log of the atom position r_k")
    log_a: float = Field(..., description="log of the atom weight a_k")

    class Config:
        frozen = True


class StableTail(BaseModel):
    """psi(lambda) = lambda^gamma in closed form"""
    kind: Literal["stable"] = "stable"
    gamma: float = Field(..., description="Stable index in (1, 2]")

    class Config:
        frozen = True

    @field_validator("gamma")
    @classmethod
    def _gamma_range(cls, value: float) -> float:
        if not (1.0 < value <= 2.0) or not math.isfinite(value):
            raise ValueError(f"gamma must lie in (1, 2], got {value}")
        return value


class AtomList(BaseModel):
    """pi = sum_k a_k delta_{r_k} with strictly decreasing positions"""
    kind: Literal["atoms"] = "atoms"
    atoms: List[Atom] = Field(..., description="Atoms ordered by strictly decreasing position")

    class Config:
        frozen = True

    @field_validator("atoms")
    @classmethod
    def _ordered(cls, atoms: List[Atom]) -> List[Atom]:
        if not atoms:
            raise ValueError("atom list is empty")
        for atom in atoms:
            if not (math.isfinite(atom.log_r) and math.isfinite(atom.log_a)):
                raise ValueError("atom positions and weights must be positive and finite")
        for left, right in zip(atoms, atoms[1:]):
            if not right.log_r < left.log_r:
                raise ValueError("atom positions must be strictly decreasing")
        return atoms


class NullMeasure(BaseModel):
    """pi = 0"""
    kind: Literal["null"] = "null"

    class Config:
        frozen = True


LevyMeasureSpec = Annotated[Union[StableTail, AtomList, NullMeasure], Field(discriminator="kind")]


class BranchingMechanism(BaseModel):
    """
    Lévy-Khintchine triple of a critical or subcritical branching mechanism.

    psi(l) = alpha*l + beta*l^2 + int (e^{-l r} - 1 + l r) pi(dr)

    StableTail mechanisms carry alpha = 0 and beta = 1 when gamma = 2 so the
    triple is honest; evaluation uses the closed form either way.
    """
    alpha: float = Field(0.0, ge=0.0, description="Drift coefficient")
    beta: float = Field(0.0, ge=0.0, description="Brownian coefficient")
    levy: LevyMeasureSpec = Field(default_factory=NullMeasure, description="Lévy measure")
    label: str = Field("mechanism", description="Short identifier used in reports")

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _consistent(self) -> "BranchingMechanism":
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("alpha and beta must be finite")
        if isinstance(self.levy, StableTail):
            expected_beta = 1.0 if self.levy.gamma == 2.0 else 0.0
            if self.alpha != 0.0 or self.beta != expected_beta:
                raise ValueError("StableTail mechanisms have alpha = 0 and beta = 1 only when gamma = 2")
        if isinstance(self.levy, NullMeasure) and self.alpha == 0.0 and self.beta == 0.0:
            raise ValueError("mechanism is identically zero")
        return self

    @property
    def is_stable(self) -> bool:
        return isinstance(self.levy, StableTail)

    @property
    def gamma(self) -> Optional[float]:
        return self.levy.gamma if isinstance(self.levy, StableTail) else None

    @property
    def has_atoms(self) -> bool:
        return isinstance(self.levy, AtomList)

    def atom_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """(log r_k, log a_k) as float arrays; empty when there are no atoms"""
        if not isinstance(self.levy, AtomList):
            return np.empty(0), np.empty(0)
        log_r = np.array([a.log_r for a in self.levy.atoms], dtype=float)
        log_a = np.array([a.log_a for a in self.levy.atoms], dtype=float)
        return log_r, log_a


class MechanismDescriptor(BaseModel):
    """
    Mechanism section of a lab config.

    Atoms are given as ``[r, a]`` pairs, or as ``[log r, log a]`` pairs when
    ``log_scale`` is true.
    """
    kind: MechanismKind = Field(..., description="stable | atoms | null | counterexample")
    gamma: Optional[float] = Field(None, description="Stable index, or counterexample index")
    alpha: float = Field(0.0, ge=0.0, description="Drift for atoms/null mechanisms")
    beta: float = Field(0.0, ge=0.0, description="Brownian coefficient for atoms/null mechanisms")
    atoms: Optional[List[Tuple[float, float]]] = Field(None, description="Atom (position, weight) pairs")
    log_scale: bool = Field(False, description="Atoms are given as logs")
    n_max: Optional[int] = Field(None, description="Last atom index for counterexample mechanisms")
    label: Optional[str] = Field(None, description="Report label; derived when omitted")

    class Config:
        use_enum_values = True
        extra = "forbid"


class ExponentReport(BaseModel):
    """Grid estimates of the exponents delta <= gamma <= eta of psi at infinity"""
    delta_hat: float = Field(..., description="Largest c keeping psi(v)v^-c / psi(u)u^-c above the floor")
    gamma_hat: float = Field(..., description="Lower exponent: min of log psi / log lambda over the tail")
    eta_hat: float = Field(..., description="Upper exponent: max of log psi / log lambda over the tail")
    local_slope_floor: float = Field(..., description="Smallest secant slope of log psi over unit-ish windows")
    floor_q: float = Field(1e-3, description="Pair floor Q used for delta_hat")
    c_step: float = Field(0.01, description="Step of the c-grid")
    log_lambda_range: Tuple[float, float] = Field(..., description="Scanned log-lambda range")
    scan_grid: List[Tuple[float, float]] = Field(default_factory=list, description="(log lambda, log psi) pairs")
    notes: List[str] = Field(default_factory=list, description="Method notes and diagnostics")


class DoublingReport(BaseModel):
    """Ratios g(2r)/g(r) along a scale sequence"""
    max_ratio: float = Field(..., description="Largest ratio along the sequence")
    log_r: List[float] = Field(default_factory=list, description="Scale sequence as log r")
    log_ratios: List[float] = Field(default_factory=list, description="log g(2r) - log g(r) per scale")
    argmax_log_r: Optional[float] = Field(None, description="Scale where the maximum is attained")


class GaugeFunction(BaseModel):
    """
    Packing gauge g(r) = LL / phi^{-1}(LL / r), LL = log log(1/r), on (0, r0).

    r0 = min(1/alpha, e^{-e}) is held as its log so the domain check is exact.
    """
    mech: BranchingMechanism = Field(..., description="Mechanism the gauge is built from")
    log_r0: float = Field(..., description="log of the right end of the domain")

    class Config:
        frozen = True

    @property
    def r0(self) -> float:
        return math.exp(self.log_r0)
