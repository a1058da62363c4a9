"""
CSBP Laplace kernels.

kappa_a(lambda, mu) solves d kappa / da = lambda - psi(kappa), kappa(0) = mu.
Its equilibrium is psi^-1(lambda); the solution approaches it exponentially,
so the integrator switches to the gap z = |kappa - psi^-1(lambda)| once kappa
is within half the equilibrium. Every ODE solution is certified by the
integral form int_mu^kappa du / (lambda - psi(u)) = a, evaluated in log z.

L_r(lambda) = 1 - psi(kappa_r(lambda, 0)) / lambda is computed from that
solution and, independently, by solving int_0^{x*} dx / phi(lambda(1 - e^{-x})) = r.
"""

import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from ..models.config import SolverTolerances
from ..models.errors import ConvergenceError, DomainError
from ..models.kernels import DensityBoundResult, KappaRoute, KappaSolution, LaplaceFunctional
from ..models.mechanism import BranchingMechanism
from ..utils.numerics import (
    adaptive_quad,
    bracketed_root,
    expand_bracket,
    integrate_log_tail,
    integrate_pieces,
    log_one_minus_exp_neg,
    neumaier_sum,
)
from .mechanism import log_psi, log_psi_inverse, log_psi_prime, phi_inverse, psi_inverse

DEFAULT_TOLERANCES = SolverTolerances()

# C2 = (1 - e^{-1})^{-1}
DENSITY_C2 = 1.0 / (1.0 - math.exp(-1.0))

_EPS = float(np.finfo(float).eps)


def _psi(mech: BranchingMechanism, x: np.ndarray) -> np.ndarray:
    """psi on a float array, with psi(x) = 0 for x <= 0"""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    pos = x > 0.0
    if np.any(pos):
        out[pos] = np.exp(log_psi(mech, np.log(x[pos])))
    return out


def _psi_scalar(mech: BranchingMechanism, x: float) -> float:
    return float(_psi(mech, np.array([x]))[0])


def _integrate(rhs: Callable, a0: float, a1: float, y0: float, rtol: float, atol: float,
               events: Optional[Callable] = None):
    sol = integrate.solve_ivp(rhs, (a0, a1), [y0], method="RK45", rtol=rtol, atol=atol, events=events)
    if sol.status == -1:
        raise ConvergenceError(
            f"kappa integration failed: {sol.message}",
            details={"a": float(sol.t[-1]), "state": float(sol.y[0, -1])},
        )
    return sol


def _gap_log_integrand(mech: BranchingMechanism, star: float, lam_eff: float,
                       sigma: float) -> Callable[[np.ndarray], np.ndarray]:
    # dz / |lambda - psi(kappa* + sigma z)| with z = e^t
    def log_f(t: np.ndarray) -> np.ndarray:
        z = np.exp(t)
        diff = np.abs(lam_eff - _psi(mech, star + sigma * z))
        with np.errstate(divide="ignore"):
            return t - np.log(diff)
    return log_f


def kappa_solve(mech: BranchingMechanism, a: float, lam: float, mu: float,
                tol: SolverTolerances = DEFAULT_TOLERANCES) -> KappaSolution:
    """
    kappa_a(lambda, mu) with an RK45 integrator and an integral-form certificate.

    Args:
        mech: Branching mechanism
        a: level, >= 0
        lam: lambda, >= 0
        mu: initial value, >= 0; mu above psi^-1(lambda) follows the decreasing branch
        tol: tolerances (ode_tol, residual_tol, quad_rtol)

    Returns:
        KappaSolution; route is "integral" when the ODE value failed its
        certificate and was replaced by the root of the integral form

    Raises:
        DomainError: negative or non-finite arguments
        ConvergenceError: integrator failure, carrying the last (a, state)
    """
    for name, value in (("a", a), ("lambda", lam), ("mu", mu)):
        if not (value >= 0.0) or not math.isfinite(value):
            raise DomainError(f"kappa needs {name} >= 0, got {value}")

    star = float(psi_inverse(mech, lam, tol))
    lam_eff = _psi_scalar(mech, star)
    sigma = 1.0 if mu >= star else -1.0
    gap0 = abs(mu - star)
    base = dict(mech_label=mech.label, a=a, lam=lam, mu=mu, equilibrium=star)
    if a == 0.0 or gap0 == 0.0:
        return KappaSolution(value=mu, gap=gap0, **base)

    rtol = tol.ode_tol
    scale = max(star, mu)
    a_done, gap = 0.0, gap0

    # far from equilibrium: integrate kappa itself
    if star > 0.0 and gap0 > 0.5 * star:
        def rhs(_, y):
            return [lam_eff - _psi_scalar(mech, max(y[0], 0.0))]

        def near(_, y):
            return abs(y[0] - star) - 0.5 * star
        near.terminal = True

        sol = _integrate(rhs, 0.0, a, mu, rtol, tol.ode_tol * 1e-3 * scale, events=near)
        if sol.status == 1 and sol.t_events[0].size:
            a_done = float(sol.t_events[0][0])
            gap = abs(float(sol.y_events[0][0][0]) - star)
        else:
            a_done = a
            gap = abs(float(sol.y[0, -1]) - star)

    if a_done < a:
        def rhs_gap(_, y):
            z = max(y[0], 0.0)
            return [sigma * (lam_eff - _psi_scalar(mech, star + sigma * z))]

        sol = _integrate(rhs_gap, a_done, a, gap, rtol, 1e-16 * scale)
        gap = max(float(sol.y[0, -1]), 0.0)

    log_f = _gap_log_integrand(mech, star, lam_eff, sigma)
    quad_rtol = min(tol.quad_rtol, 1e-11)
    top = math.log(gap0)
    floor = 64.0 * _EPS * star

    def excess(t: float) -> float:
        return integrate_pieces(log_f, t, top, quad_rtol) - a

    saturated = star > 0.0 and gap <= floor
    if saturated:
        residual = max(0.0, excess(math.log(floor)))
    else:
        residual = excess(math.log(gap))

    route = KappaRoute.ODE
    if abs(residual) > tol.residual_tol * max(1.0, a):
        route = KappaRoute.INTEGRAL
        if star > 0.0 and excess(math.log(floor)) <= 0.0:
            gap, saturated, residual = 0.0, True, 0.0
        else:
            lower = math.log(floor) if star > 0.0 else None
            start = top - 1.0 if lower is None else max(lower, top - 1.0)
            lo, hi, _, _ = expand_bracket(excess, start, top, max_expansions=tol.max_iter,
                                          lower_limit=lower, upper_limit=top)
            t_root = bracketed_root(excess, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=tol.max_iter)
            gap = math.exp(t_root)
            residual = excess(t_root)

    value = max(star + sigma * gap, 0.0)
    return KappaSolution(value=value, gap=gap, route=route, residual=residual,
                         saturated=saturated, **base)


def random_kappa_pairs(rng: np.random.Generator, n_pairs: int,
                       log_a: Tuple[float, float] = (-2.0, 1.0),
                       log_lam: Tuple[float, float] = (-2.0, 3.0)) -> List[Tuple[float, float]]:
    """(a, lambda) pairs, log10-uniform on the given decades"""
    a = 10.0 ** rng.uniform(log_a[0], log_a[1], size=int(n_pairs))
    lam = 10.0 ** rng.uniform(log_lam[0], log_lam[1], size=int(n_pairs))
    return [(float(x), float(y)) for x, y in zip(a, lam)]


def kappa_fixed_point_errors(mech: BranchingMechanism, pairs: Sequence[Tuple[float, float]],
                             tol: SolverTolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """|kappa_a(lambda, psi^-1(lambda)) / psi^-1(lambda) - 1| per (a, lambda) pair"""
    errors = []
    for a, lam in pairs:
        star = float(psi_inverse(mech, lam, tol))
        value = kappa_solve(mech, a, lam, star, tol).value
        errors.append(abs(value - star) / star if star > 0.0 else abs(value))
    return np.asarray(errors, dtype=float)


class LaplaceIntegral:
    """
    I(x) = int_0^x dy / phi(lambda (1 - e^{-y})), integrated in t = log y.

    Near 0 the integrand behaves like 1 / phi(lambda y), which vanishes
    geometrically in t, so the lower tail closes like any log-domain tail.
    """

    def __init__(self, mech: BranchingMechanism, lam: float, tol: SolverTolerances = DEFAULT_TOLERANCES):
        if not (lam > 0.0):
            raise DomainError("the integral route needs lambda > 0")
        self.mech = mech
        self.log_lam = math.log(lam)
        self.rtol = min(tol.quad_rtol, 1e-11)
        self.tol = tol

    def log_integrand(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        log_y = self.log_lam + log_one_minus_exp_neg(t)
        return t - log_psi_prime(self.mech, log_psi_inverse(self.mech, log_y, self.tol))

    def value(self, x: float) -> float:
        if x <= 0.0:
            return 0.0
        tail = integrate_log_tail(self.log_integrand, math.log(x), direction=-1, rtol=self.rtol)
        if not tail.finite:
            raise ConvergenceError("lower tail of the Laplace integral did not close",
                                   details={"x": x, "partial_value": tail.value})
        return tail.value

    def solve(self, r: float) -> float:
        """x* with I(x*) = r"""
        if not (r > 0.0):
            raise DomainError("the integral route needs r > 0")
        anchor, step = 0.0, 1.0
        tail = integrate_log_tail(self.log_integrand, anchor, direction=-1, rtol=self.rtol)
        while tail.value > r:
            anchor -= step
            step *= 2.0
            tail = integrate_log_tail(self.log_integrand, anchor, direction=-1, rtol=self.rtol)
            if anchor < -2e3:
                raise ConvergenceError("Laplace integral anchor ran away", details={"r": r})

        def integrand(t):
            return np.exp(self.log_integrand(t))

        parts = [tail.value]
        edge = anchor
        while True:
            piece, _ = adaptive_quad(integrand, edge, edge + 1.0, rtol=self.rtol)
            if float(neumaier_sum(np.array(parts + [piece]))) >= r:
                break
            parts.append(piece)
            edge += 1.0
            if edge - anchor > 4000.0:
                raise ConvergenceError("Laplace integral never reached r", details={"r": r, "edge": edge})
        total = float(neumaier_sum(np.array(parts)))

        def excess(t: float) -> float:
            return total + adaptive_quad(integrand, edge, t, rtol=self.rtol)[0] - r

        t_star = bracketed_root(excess, edge, edge + 1.0, xtol=1e-14, rtol=1e-15,
                                maxiter=self.tol.max_iter)
        return math.exp(t_star)


def _ode_laplace(mech: BranchingMechanism, r: float, lam: float,
                 tol: SolverTolerances) -> Tuple[float, float]:
    """(L, -log L) from kappa_r(lambda, 0)"""
    sol = kappa_solve(mech, r, lam, 0.0, tol)
    lam_eff = _psi_scalar(mech, sol.equilibrium)
    # lambda - psi(kappa) from the gap keeps its relative accuracy near equilibrium
    kappa = sol.equilibrium - sol.gap
    diff = lam_eff - _psi_scalar(mech, kappa)
    if diff <= 0.0:
        return 0.0, math.inf
    value = diff / lam_eff
    return value, -math.log(value)


def script_L(mech: BranchingMechanism, r: float, lam: float,
             tol: SolverTolerances = DEFAULT_TOLERANCES, cross_check: bool = True) -> LaplaceFunctional:
    """
    L_r(lambda) by the ODE route, optionally cross-checked by the integral route.

    Raises:
        DomainError: r <= 0 or lambda <= 0
    """
    if not (r > 0.0) or not (lam > 0.0):
        raise DomainError(f"L_r(lambda) needs r > 0 and lambda > 0, got r={r}, lambda={lam}")
    value, minus_log = _ode_laplace(mech, r, lam, tol)
    result = LaplaceFunctional(mech_label=mech.label, r=r, lam=lam, value=value, minus_log=minus_log)
    if not cross_check:
        return result

    x_star = LaplaceIntegral(mech, lam, tol).solve(r)
    integral_value = math.exp(-x_star)
    discrepancy = abs(value - integral_value) / integral_value if integral_value > 0.0 else math.inf
    return result.model_copy(update={
        "integral_value": integral_value,
        "discrepancy": discrepancy,
        "agree": discrepancy <= tol.route_rtol,
    })


def integral_identity_residual(mech: BranchingMechanism, r: float, lam: float,
                               tol: SolverTolerances = DEFAULT_TOLERANCES) -> float:
    """|I(x) - r| / r with x = -log L_r(lambda) taken from the ODE route"""
    _, minus_log = _ode_laplace(mech, r, lam, tol)
    if not math.isfinite(minus_log):
        raise ConvergenceError("L_r(lambda) saturated at zero", details={"r": r, "lambda": lam})
    return abs(LaplaceIntegral(mech, lam, tol).value(minus_log) - r) / r


def laplace_grid(mech: BranchingMechanism, radii: Sequence[float], lams: Sequence[float],
                 tol: SolverTolerances = DEFAULT_TOLERANCES, cross_check: bool = True) -> List[LaplaceFunctional]:
    """script_L over a radius x lambda grid, radius-major"""
    return [script_L(mech, float(r), float(lam), tol, cross_check) for r in radii for lam in lams]


def minus_log_monotone(results: Sequence[LaplaceFunctional], n_radii: int, n_lams: int,
                       slack: float = 1e-12) -> Dict[str, int]:
    """
    Count decreases of -log L along lambda (fixed r) and along r (fixed lambda)
    on a radius-major grid with increasing axes.
    """
    grid = np.array([res.minus_log for res in results], dtype=float).reshape(n_radii, n_lams)
    tol = slack * np.maximum(1.0, np.abs(grid))
    along_lam = int(np.sum(np.diff(grid, axis=1) < -tol[:, 1:]))
    along_r = int(np.sum(np.diff(grid, axis=0) < -tol[1:, :]))
    return {"lambda_decreases": along_lam, "radius_decreases": along_r}


def density_bound_check(mech: BranchingMechanism, r: float,
                        tol: SolverTolerances = DEFAULT_TOLERANCES) -> DensityBoundResult:
    """
    Check L_{2r}(C2 phi^-1((2/r) LL2)) <= exp(-2 LL2) with LL2 = log log(2/r).

    The bound is only claimed for small r; log log(2/r) >= 2 is used as the
    threshold, and larger r come back with ``precondition_ok`` False and no
    verdict.
    """
    if not (r > 0.0):
        raise DomainError("density bound needs r > 0")
    label = mech.label
    log_two_over_r = math.log(2.0 / r)
    if log_two_over_r <= 1.0 or math.log(log_two_over_r) < 2.0:
        loglog = math.log(log_two_over_r) if log_two_over_r > 0.0 else None
        return DensityBoundResult(
            mech_label=label, r=r, loglog=loglog, precondition_ok=False,
            notes=["log log(2/r) < 2: outside the small-r regime, no claim made"],
        )

    ll2 = math.log(log_two_over_r)
    notes = ["small-r threshold proxy: log log(2/r) >= 2"]
    lam = DENSITY_C2 * float(phi_inverse(mech, (2.0 / r) * ll2, tol))
    laplace = script_L(mech, 2.0 * r, lam, tol)
    if laplace.agree is False:
        notes.append(f"⚠️ Laplace routes differ by {laplace.discrepancy:.3g}")

    lhs_log = -laplace.minus_log
    rhs_log = -2.0 * ll2
    return DensityBoundResult(
        mech_label=label,
        r=r,
        loglog=ll2,
        lam=lam,
        lhs=laplace.value,
        rhs=math.exp(rhs_log),
        lhs_log=lhs_log,
        rhs_log=rhs_log,
        passed=lhs_log <= rhs_log,
        precondition_ok=True,
        notes=notes,
    )


def claim_one_check(mech: BranchingMechanism, pairs: Sequence[Tuple[float, float]],
                    tol: SolverTolerances = DEFAULT_TOLERANCES) -> Dict[str, object]:
    """
    On (r, lambda) pairs, check -log L_r(lambda) <= 1  =>  (2/lambda) psi(r lambda / 2) <= 1.

    Returns:
        Counts of pairs, of pairs meeting the hypothesis, and of violations
    """
    held = 0
    violations = 0
    worst = 0.0
    for r, lam in pairs:
        _, minus_log = _ode_laplace(mech, float(r), float(lam), tol)
        if minus_log > 1.0:
            continue
        held += 1
        conclusion = (2.0 / lam) * _psi_scalar(mech, r * lam / 2.0)
        worst = max(worst, conclusion)
        if conclusion > 1.0 + 1e-12:
            violations += 1
    return {"pairs": len(pairs), "hypothesis_held": held, "violations": violations,
            "max_conclusion": worst}


def mean_local_time(mech: BranchingMechanism, a: float) -> float:
    """N(<l^a>) = e^{-alpha a}"""
    if not (a >= 0.0):
        raise DomainError("mean local time needs a >= 0")
    return math.exp(-mech.alpha * a)


def brownian_kappa(a: float, lam: float) -> float:
    """kappa_a(lambda, 0) = sqrt(lambda) tanh(a sqrt(lambda)) for psi(l) = l^2"""
    root = math.sqrt(lam)
    return root * math.tanh(a * root)


def brownian_laplace(r: float, lam: float) -> float:
    """L_r(lambda) = sech^2(r sqrt(lambda)) for psi(l) = l^2, overflow-free"""
    x = r * math.sqrt(lam)
    return math.exp(math.log(4.0) - 2.0 * x - 2.0 * math.log1p(math.exp(-2.0 * x)))


__all__: List[str] = [
    "kappa_solve", "random_kappa_pairs", "kappa_fixed_point_errors", "script_L", "density_bound_check", "mean_local_time",
    "LaplaceIntegral", "integral_identity_residual", "laplace_grid", "minus_log_monotone",
    "claim_one_check", "brownian_kappa", "brownian_laplace", "DENSITY_C2",
]
