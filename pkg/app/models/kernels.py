"""
Kernel result models - kappa solutions, Laplace functionals and the density bound
"""

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field


class KappaRoute(str, Enum):
    """How a kappa value was obtained"""
    ODE = "ode"
    INTEGRAL = "integral"


class KappaSolution(BaseModel):
    """
    kappa_a(lambda, mu), the solution of d kappa / da = lambda - psi(kappa), kappa(0) = mu.

    ``gap`` is |kappa - psi^-1(lambda)| carried separately so that values
    close to the equilibrium keep their relative accuracy.
    """
    mech_label: str = Field(..., description="Label of the mechanism")
    a: float = Field(..., ge=0.0, description="Level")
    lam: float = Field(..., ge=0.0, description="lambda")
    mu: float = Field(..., ge=0.0, description="Initial value")
    value: float = Field(..., ge=0.0, description="kappa_a(lambda, mu)")
    equilibrium: float = Field(..., ge=0.0, description="psi^-1(lambda)")
    gap: float = Field(..., ge=0.0, description="|kappa - psi^-1(lambda)|")
    route: KappaRoute = Field(KappaRoute.ODE, description="ode, or integral after polishing")
    residual: float = Field(0.0, description="int_mu^kappa du/(lambda - psi(u)) - a")
    saturated: bool = Field(False, description="kappa equals the equilibrium to machine precision")

    class Config:
        use_enum_values = True


class LaplaceFunctional(BaseModel):
    """
    L_r(lambda) = 1 - psi(kappa_r(lambda, 0)) / lambda, by the ODE route and by
    the integral route; ``value`` is the ODE-route value.
    """
    mech_label: str = Field(..., description="Label of the mechanism")
    r: float = Field(..., gt=0.0, description="Radius")
    lam: float = Field(..., gt=0.0, description="lambda")
    value: float = Field(..., description="ODE-route value in (0, 1]")
    minus_log: float = Field(..., description="-log L_r(lambda)")
    integral_value: Optional[float] = Field(None, description="Integral-route value e^{-x*}")
    discrepancy: Optional[float] = Field(None, description="Relative difference between the two routes")
    agree: Optional[bool] = Field(None, description="Routes agree within the route tolerance")


class DensityBoundResult(BaseModel):
    """
    Quantitative density bound at radius r:
    L_{2r}(C2 phi^-1((2/r) LL2)) <= exp(-2 LL2), LL2 = log log(2/r).
    """
    mech_label: str = Field(..., description="Label of the mechanism")
    r: float = Field(..., gt=0.0, description="Radius")
    loglog: Optional[float] = Field(None, description="LL2 = log log(2/r)")
    lam: Optional[float] = Field(None, description="C2 phi^-1((2/r) LL2)")
    lhs: Optional[float] = Field(None, description="L_{2r}(lambda)")
    rhs: Optional[float] = Field(None, description="exp(-2 LL2)")
    lhs_log: Optional[float] = Field(None, description="log lhs")
    rhs_log: Optional[float] = Field(None, description="log rhs")
    passed: Optional[bool] = Field(None, description="lhs <= rhs; None when the precondition fails")
    precondition_ok: bool = Field(..., description="LL2 >= 2")
    notes: List[str] = Field(default_factory=list, description="Diagnostics")
