"""
Branching-mechanism calculus.

Evaluates psi and its family (psi', psi~ = psi/lambda, psi^-1, phi = psi' o psi^-1,
phi^-1), the extinction integral, v(a), u(t, lambda), the packing gauge g,
exponent estimates, doubling reports and the atom counterexamples.

Internally everything runs on s = log(lambda) so that atom mechanisms whose
positions sit at e^{-n^2} stay representable. StableTail mechanisms use the
closed forms for psi and psi'; every inverse is computed numerically.
"""

import math
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from ..models.config import SolverTolerances
from ..models.errors import ConvergenceError, DomainError
from ..models.mechanism import (
    Atom,
    AtomList,
    BranchingMechanism,
    DoublingReport,
    ExponentReport,
    GaugeFunction,
    MechanismDescriptor,
    MechanismKind,
    NullMeasure,
    StableTail,
)
from ..utils.numerics import (
    LOG2,
    bracketed_root,
    expand_bracket,
    integrate_log_tail,
    integrate_pieces,
    log_excess_exponential,
    log_one_minus_exp_neg,
    log_sum_exp,
    saturate_log,
)

DEFAULT_TOLERANCES = SolverTolerances()

ArrayLike = Union[float, Sequence[float], np.ndarray]


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def stable_mechanism(gamma: float) -> BranchingMechanism:
    """psi(lambda) = lambda^gamma"""
    levy = StableTail(gamma=gamma)
    beta = 1.0 if gamma == 2.0 else 0.0
    return BranchingMechanism(alpha=0.0, beta=beta, levy=levy, label=f"stable({gamma:g})")


def atom_mechanism(
    log_positions: Sequence[float],
    log_weights: Sequence[float],
    alpha: float = 0.0,
    beta: float = 0.0,
    label: str = "atoms",
) -> BranchingMechanism:
    """Mechanism with pi = sum a_k delta_{r_k}, positions given as logs"""
    if len(log_positions) != len(log_weights):
        raise DomainError("atom positions and weights differ in length")
    atoms = [Atom(log_r=float(lr), log_a=float(la)) for lr, la in zip(log_positions, log_weights)]
    return BranchingMechanism(alpha=alpha, beta=beta, levy=AtomList(atoms=atoms), label=label)


def build_counterexample(gamma: float, n_max: int) -> BranchingMechanism:
    """
    Atom mechanisms with gamma_psi = eta_psi = gamma but delta_psi = 1.

    gamma < 2: r_n = e^{-n log n}, a_n = r_n^{-gamma}, n = 3..n_max
    gamma = 2: r_n = e^{-n^2},     a_n = r_n^{-2} e^{-n log n}, n = 2..n_max

    Args:
        gamma: index in (1, 2]
        n_max: last atom index, at least 5

    Returns:
        Drift-free atom mechanism stored in the log domain
    """
    if not (1.0 < gamma <= 2.0):
        raise DomainError(f"gamma must lie in (1, 2], got {gamma}")
    if int(n_max) != n_max or n_max < 5:
        raise DomainError(f"n_max must be an integer >= 5, got {n_max}")

    if gamma < 2.0:
        n = np.arange(3, int(n_max) + 1, dtype=float)
        theta = n * np.log(n)
        log_r = -theta
        log_a = gamma * theta
    else:
        n = np.arange(2, int(n_max) + 1, dtype=float)
        log_r = -n * n
        log_a = 2.0 * n * n - n * np.log(n)
    return atom_mechanism(log_r, log_a, label=f"counterexample({gamma:g},{int(n_max)})")


def build_mechanism(descriptor: Union[MechanismDescriptor, Dict]) -> BranchingMechanism:
    """
    Build a validated mechanism from a config descriptor.

    Args:
        descriptor: MechanismDescriptor or a plain dict with the same keys

    Returns:
        BranchingMechanism

    Raises:
        DomainError: empty descriptor, bad gamma, nonpositive atoms
    """
    if not descriptor:
        raise DomainError("empty mechanism descriptor")
    if isinstance(descriptor, dict):
        try:
            descriptor = MechanismDescriptor(**descriptor)
        except Exception as e:
            raise DomainError(f"invalid mechanism descriptor: {e}") from e

    kind = MechanismKind(descriptor.kind)
    try:
        if kind == MechanismKind.STABLE:
            if descriptor.gamma is None:
                raise DomainError("stable mechanism needs gamma")
            mech = stable_mechanism(descriptor.gamma)
        elif kind == MechanismKind.COUNTEREXAMPLE:
            if descriptor.gamma is None or descriptor.n_max is None:
                raise DomainError("counterexample needs gamma and n_max")
            mech = build_counterexample(descriptor.gamma, descriptor.n_max)
        elif kind == MechanismKind.ATOMS:
            if not descriptor.atoms:
                raise DomainError("atom mechanism needs a nonempty atom list")
            pairs = np.asarray(descriptor.atoms, dtype=float)
            if descriptor.log_scale:
                log_r, log_a = pairs[:, 0], pairs[:, 1]
            else:
                if np.any(pairs <= 0.0):
                    raise DomainError("atom positions and weights must be positive")
                log_r, log_a = np.log(pairs[:, 0]), np.log(pairs[:, 1])
            order = np.argsort(-log_r, kind="stable")
            mech = atom_mechanism(log_r[order], log_a[order], alpha=descriptor.alpha, beta=descriptor.beta,
                                  label=descriptor.label or "atoms")
        else:
            mech = BranchingMechanism(alpha=descriptor.alpha, beta=descriptor.beta, levy=NullMeasure(),
                                      label=descriptor.label or f"null(alpha={descriptor.alpha:g},beta={descriptor.beta:g})")
    except DomainError:
        raise
    except ValueError as e:
        raise DomainError(str(e)) from e

    if descriptor.label and kind in (MechanismKind.STABLE, MechanismKind.COUNTEREXAMPLE):
        mech = mech.model_copy(update={"label": descriptor.label})
    return mech


# ---------------------------------------------------------------------------
# Evaluation in s = log(lambda)
# ---------------------------------------------------------------------------

def log_psi(mech: BranchingMechanism, s: ArrayLike) -> np.ndarray:
    """log psi(e^s), vectorized; -inf at s = -inf"""
    s = np.asarray(s, dtype=float)
    if mech.is_stable:
        return mech.gamma * s

    parts = []
    if mech.alpha > 0.0:
        parts.append(math.log(mech.alpha) + s)
    if mech.beta > 0.0:
        parts.append(math.log(mech.beta) + 2.0 * s)
    terms = [np.stack(parts, axis=-1)] if parts else []
    log_r, log_a = mech.atom_arrays()
    if log_r.size:
        shifted = s[..., None] + log_r
        finite = np.isfinite(shifted)
        atom_terms = np.full(shifted.shape, -np.inf)
        atom_terms[finite] = log_excess_exponential(shifted[finite])
        terms.append(log_a + atom_terms)
    return log_sum_exp(np.concatenate(terms, axis=-1), axis=-1)


def log_psi_prime_excess(mech: BranchingMechanism, s: ArrayLike) -> np.ndarray:
    """log(psi'(e^s) - alpha); -inf where psi' = alpha"""
    s = np.asarray(s, dtype=float)
    if mech.is_stable:
        return math.log(mech.gamma) + (mech.gamma - 1.0) * s

    terms = []
    if mech.beta > 0.0:
        terms.append((math.log(2.0 * mech.beta) + s)[..., None])
    log_r, log_a = mech.atom_arrays()
    if log_r.size:
        shifted = s[..., None] + log_r
        finite = np.isfinite(shifted)
        atom_terms = np.full(shifted.shape, -np.inf)
        atom_terms[finite] = log_one_minus_exp_neg(shifted[finite])
        terms.append(log_a + log_r + atom_terms)
    if not terms:
        return np.full(s.shape, -np.inf)
    return log_sum_exp(np.concatenate(terms, axis=-1), axis=-1)


def log_psi_prime(mech: BranchingMechanism, s: ArrayLike) -> np.ndarray:
    """log psi'(e^s)"""
    lexcess = log_psi_prime_excess(mech, s)
    if mech.alpha > 0.0:
        return np.logaddexp(math.log(mech.alpha), lexcess)
    return lexcess


def log_psi_prime_excess_sup(mech: BranchingMechanism) -> float:
    """log sup(psi' - alpha); +inf unless the mechanism is drift-plus-atoms only"""
    if mech.is_stable or mech.beta > 0.0:
        return math.inf
    log_r, log_a = mech.atom_arrays()
    if not log_r.size:
        return -math.inf
    return float(log_sum_exp(log_a + log_r))


class PsiFamily(NamedTuple):
    """psi, psi', psi~ at the requested lambdas"""
    psi: np.ndarray
    psi_prime: np.ndarray
    psi_tilde: np.ndarray
    log_psi: np.ndarray
    saturated: np.ndarray


def psi_family_eval(mech: BranchingMechanism, lam: ArrayLike) -> PsiFamily:
    """
    Evaluate (psi, psi', psi~) at lambda >= 0.

    psi~(0) = alpha and psi'(0) = alpha. Values past the float range are
    clipped and flagged in ``saturated`` rather than returned as inf.

    Args:
        mech: Branching mechanism
        lam: Scalar or array of nonnegative lambdas

    Returns:
        PsiFamily of arrays shaped like ``lam``
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0.0) or np.any(np.isnan(lam)):
        raise DomainError("lambda must be nonnegative")
    with np.errstate(divide="ignore"):
        s = np.log(lam)

    lpsi = log_psi(mech, s)
    lexcess = log_psi_prime_excess(mech, s)
    psi, sat_psi = saturate_log(lpsi)
    excess, sat_prime = saturate_log(lexcess)
    psi_prime = mech.alpha + excess
    tilde, sat_tilde = saturate_log(lpsi - np.where(lam > 0.0, s, 0.0))
    psi_tilde = np.where(lam > 0.0, tilde, mech.alpha)
    psi = np.where(lam > 0.0, psi, 0.0)
    return PsiFamily(psi, psi_prime, psi_tilde, lpsi, sat_psi | sat_prime | sat_tilde)


# ---------------------------------------------------------------------------
# Inverses
# ---------------------------------------------------------------------------

def log_psi_inverse(mech: BranchingMechanism, log_y: ArrayLike,
                    tol: SolverTolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    s with log psi(e^s) = log_y, vectorized.

    d log psi / d s = lambda psi' / psi lies in [1, 2] for every mechanism of
    Lévy-Khintchine form, which yields an exact starting bracket; a Newton
    step safeguarded by bisection then converges in a handful of passes.
    """
    ly = np.atleast_1d(np.asarray(log_y, dtype=float))
    if mech.is_stable:
        out = ly / mech.gamma
        return out if np.ndim(log_y) else out[0]

    out = np.full(ly.shape, -np.inf)
    live = np.isfinite(ly)
    if np.any(ly[~np.isfinite(ly)] > 0):
        raise DomainError("psi^-1 of an infinite value")
    y = ly[live]
    s = y.copy()
    f = log_psi(mech, s) - y
    lo = np.minimum(s - f, s - 0.5 * f)
    hi = np.maximum(s - f, s - 0.5 * f)
    s = 0.5 * (lo + hi)

    eps = np.finfo(float).eps
    for _ in range(tol.max_iter):
        f = log_psi(mech, s) - y
        done = np.abs(f) <= 64 * eps * np.maximum(1.0, np.abs(y))
        if np.all(done):
            break
        hi = np.where(f > 0.0, s, hi)
        lo = np.where(f < 0.0, s, lo)
        slope = np.exp(s + log_psi_prime(mech, s) - (f + y))
        step = s - f / np.clip(slope, 1.0, 2.0)
        inside = (step > lo) & (step < hi)
        s_new = np.where(done, s, np.where(inside, step, 0.5 * (lo + hi)))
        if np.all(s_new == s) or np.all(hi - lo <= 16 * eps * np.maximum(1.0, np.abs(s))):
            s = s_new
            break
        s = s_new
    else:
        raise ConvergenceError(
            "psi inverse did not converge",
            details={"lo": lo.tolist(), "hi": hi.tolist(), "target_log": y.tolist()},
        )

    out[live] = s
    return out if np.ndim(log_y) else out[0]


def psi_inverse(mech: BranchingMechanism, y: ArrayLike,
                tol: SolverTolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    lambda >= 0 with psi(lambda) = y.

    psi is increasing on [0, inf) for critical and subcritical mechanisms, so
    the root is unique; psi^-1(0) = 0.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y < 0.0) or np.any(np.isnan(y)):
        raise DomainError("psi^-1 needs y >= 0")
    with np.errstate(divide="ignore"):
        ly = np.log(y)
    return np.exp(log_psi_inverse(mech, ly, tol))


def log_psi_prime_inverse(mech: BranchingMechanism, log_excess: float,
                          tol: SolverTolerances = DEFAULT_TOLERANCES) -> float:
    """
    s with log(psi'(e^s) - alpha) = log_excess, i.e. (psi')^-1 in logs.

    Raises:
        DomainError: target beyond the (bounded) range of psi' - alpha
    """
    if log_excess == -math.inf:
        return -math.inf
    if mech.is_stable:
        return (log_excess - math.log(mech.gamma)) / (mech.gamma - 1.0)

    sup = log_psi_prime_excess_sup(mech)
    if log_excess >= sup:
        raise DomainError(
            "target exceeds the range of psi' - alpha",
            details={"log_target": log_excess, "log_sup": sup},
        )

    def f(s: float) -> float:
        return float(log_psi_prime_excess(mech, np.array([s]))[0]) - log_excess

    # Below every atom scale the excess is linear in s with slope 1
    lo, hi, _, _ = expand_bracket(f, log_excess - 1.0, log_excess + 1.0, max_expansions=tol.max_iter)
    return bracketed_root(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=tol.max_iter)


def phi_forward(mech: BranchingMechanism, lam: ArrayLike,
                tol: SolverTolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """phi(lambda) = psi'(psi^-1(lambda)); phi(0) = alpha"""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0.0):
        raise DomainError("phi needs lambda >= 0")
    with np.errstate(divide="ignore"):
        s = log_psi_inverse(mech, np.log(lam), tol)
    return mech.alpha + np.exp(log_psi_prime_excess(mech, s))


def log_phi_inverse_excess(mech: BranchingMechanism, log_excess: float,
                           tol: SolverTolerances = DEFAULT_TOLERANCES) -> float:
    """log phi^-1(alpha + e^{log_excess})"""
    s = log_psi_prime_inverse(mech, log_excess, tol)
    if s == -math.inf:
        return -math.inf
    return float(log_psi(mech, np.array([s]))[0])


def phi_inverse(mech: BranchingMechanism, y: ArrayLike,
                tol: SolverTolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    lambda with phi(lambda) = y, for y >= alpha; phi^-1(alpha) = 0.

    Raises:
        DomainError: y < alpha, or y past the range of a bounded phi
    """
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y_arr < mech.alpha) or np.any(np.isnan(y_arr)):
        raise DomainError(f"phi^-1 needs y >= alpha = {mech.alpha}")
    out = np.empty(y_arr.shape)
    for i, value in enumerate(y_arr):
        if value == mech.alpha:
            out[i] = 0.0
            continue
        out[i] = math.exp(log_phi_inverse_excess(mech, math.log(value - mech.alpha), tol))
    return out if np.ndim(y) else out[0]


# ---------------------------------------------------------------------------
# Integrals of 1/psi
# ---------------------------------------------------------------------------

def _log_integrand(mech: BranchingMechanism) -> Callable[[np.ndarray], np.ndarray]:
    # du / psi(u) with u = e^t
    return lambda t: t - log_psi(mech, t)


class ExtinctionResult(NamedTuple):
    value: float
    finite: bool
    pieces: int


def extinction_integral(mech: BranchingMechanism, lower: float,
                        tol: SolverTolerances = DEFAULT_TOLERANCES) -> ExtinctionResult:
    """
    int_{lower}^inf du / psi(u).

    The tail is compactified by u = e^t and summed piecewise in t with a
    geometric closing term; ``finite`` is False when the pieces stop
    decaying, with ``value`` holding the partial sum.
    """
    if not (lower > 0.0):
        raise DomainError("extinction integral needs lower > 0")
    if float(log_psi(mech, np.array([math.log(lower)]))[0]) == -math.inf:
        raise DomainError("psi(lower) must be positive")
    result = integrate_log_tail(_log_integrand(mech), math.log(lower), rtol=tol.quad_rtol)
    return ExtinctionResult(result.value, result.finite, result.pieces)


def extinction_holds(mech: BranchingMechanism, tol: SolverTolerances = DEFAULT_TOLERANCES) -> bool:
    """Whether int^inf du/psi(u) < inf"""
    if mech.is_stable or mech.beta > 0.0:
        return True
    return extinction_integral(mech, 1.0, tol).finite


def solve_v(mech: BranchingMechanism, a: float, tol: SolverTolerances = DEFAULT_TOLERANCES) -> float:
    """
    v(a) solving int_{v}^inf du / psi(u) = a.

    Raises:
        DomainError: a <= 0 or the extinction condition fails
    """
    if not (a > 0.0):
        raise DomainError("v(a) needs a > 0")
    log_f = _log_integrand(mech)
    quad_rtol = min(tol.quad_rtol, 1e-11)

    anchor = 0.0
    tail = integrate_log_tail(log_f, anchor, rtol=quad_rtol)
    if not tail.finite:
        raise DomainError("extinction condition fails: int^inf du/psi(u) diverges",
                          details={"partial_value": tail.value})
    step = 1.0
    while tail.value > a:
        anchor += step
        step *= 2.0
        tail = integrate_log_tail(log_f, anchor, rtol=quad_rtol)
        if anchor > 5e3:
            raise ConvergenceError("v(a) bracket expansion ran away", details={"anchor": anchor, "a": a})

    def excess(s: float) -> float:
        return integrate_pieces(log_f, s, anchor, quad_rtol) + tail.value - a

    lo, hi, _, _ = expand_bracket(excess, anchor - 1.0, anchor, max_expansions=tol.max_iter,
                                  upper_limit=anchor)
    s = bracketed_root(excess, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=tol.max_iter)
    return math.exp(s)


def solve_u(mech: BranchingMechanism, t: float, lam: float,
            tol: SolverTolerances = DEFAULT_TOLERANCES) -> float:
    """
    u(t, lambda) solving int_u^lambda dw / psi(w) = t; u(0, lambda) = lambda.
    """
    if t < 0.0 or lam < 0.0:
        raise DomainError("u(t, lambda) needs t, lambda >= 0")
    if t == 0.0 or lam == 0.0:
        return float(lam)
    log_f = _log_integrand(mech)
    top = math.log(lam)
    quad_rtol = min(tol.quad_rtol, 1e-11)

    def excess(s: float) -> float:
        return integrate_pieces(log_f, s, top, quad_rtol) - t

    lo, hi, _, _ = expand_bracket(excess, top - 1.0, top, max_expansions=tol.max_iter, upper_limit=top)
    s = bracketed_root(excess, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=tol.max_iter)
    return math.exp(s)


def stable_v(gamma: float, a: float) -> float:
    """Closed form v(a) = ((gamma-1) a)^{-1/(gamma-1)}"""
    return ((gamma - 1.0) * a) ** (-1.0 / (gamma - 1.0))


def stable_u(gamma: float, t: float, lam: float) -> float:
    """Closed form u(t, lambda) = (lambda^{1-gamma} + (gamma-1) t)^{-1/(gamma-1)}"""
    if lam == 0.0:
        return 0.0
    return (lam ** (1.0 - gamma) + (gamma - 1.0) * t) ** (-1.0 / (gamma - 1.0))


# ---------------------------------------------------------------------------
# Gauge
# ---------------------------------------------------------------------------

def make_gauge(mech: BranchingMechanism) -> GaugeFunction:
    """GaugeFunction with r0 = min(1/alpha, e^{-e})"""
    log_r0 = -math.e
    if mech.alpha > 0.0:
        log_r0 = min(log_r0, -math.log(mech.alpha))
    if mech.is_stable is False and log_psi_prime_excess_sup(mech) == -math.inf:
        raise DomainError("phi is constant; the gauge is undefined")
    return GaugeFunction(mech=mech, log_r0=log_r0)


class GaugeValue(NamedTuple):
    g: np.ndarray
    log_g: np.ndarray


def gauge_log_g(gauge: GaugeFunction, log_r: ArrayLike,
                tol: SolverTolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    log g(r) from log r, exact in the log domain.

    LL = log log(1/r) is formed from -log r, so r = e^{-10^6} is fine.
    """
    lr = np.atleast_1d(np.asarray(log_r, dtype=float))
    if np.any(~(lr < gauge.log_r0)):
        raise DomainError(f"gauge needs 0 < r < r0 = {gauge.r0:.6g}",
                          details={"log_r0": gauge.log_r0})
    mech = gauge.mech
    ll = np.log(-lr)
    log_ll = np.log(ll)
    log_u = log_ll - lr
    # log(u - alpha)
    if mech.alpha > 0.0:
        log_target = log_u + np.log1p(-mech.alpha * np.exp(-log_u))
    else:
        log_target = log_u

    if mech.is_stable:
        g_ = mech.gamma
        s = (log_target - math.log(g_)) / (g_ - 1.0)
        log_phi_inv = g_ * s
    else:
        log_phi_inv = np.array([log_phi_inverse_excess(mech, float(x), tol) for x in log_target])
    out = log_ll - log_phi_inv
    return out if np.ndim(log_r) else out[0]


def gauge_g(gauge: GaugeFunction, r: Optional[ArrayLike] = None, log_r: Optional[ArrayLike] = None,
            tol: SolverTolerances = DEFAULT_TOLERANCES) -> GaugeValue:
    """
    g(r) and log g(r); pass either r or log_r.

    Raises:
        DomainError: r outside (0, r0)
    """
    if log_r is None:
        if r is None:
            raise DomainError("gauge_g needs r or log_r")
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr <= 0.0):
            raise DomainError("gauge needs r > 0")
        log_r = np.log(r_arr)
    lg = gauge_log_g(gauge, log_r, tol)
    return GaugeValue(np.exp(lg), lg)


def stable_gauge_log_g(gamma: float, log_r: ArrayLike) -> np.ndarray:
    """
    Closed-form stable gauge:
    g(r) = gamma^{gamma/(gamma-1)} r^{gamma/(gamma-1)} LL^{-1/(gamma-1)}
    """
    lr = np.asarray(log_r, dtype=float)
    ll = np.log(-lr)
    k = gamma / (gamma - 1.0)
    return k * math.log(gamma) + k * lr - np.log(ll) / (gamma - 1.0)


# ---------------------------------------------------------------------------
# Exponents and doubling
# ---------------------------------------------------------------------------

def atom_scale_range(mech: BranchingMechanism) -> Tuple[float, float]:
    """log-lambda range [-log r_first, -log r_last] on which atoms switch on"""
    log_r, _ = mech.atom_arrays()
    if not log_r.size:
        raise DomainError("mechanism has no atoms")
    return float(-log_r[0]), float(-log_r[-1])


def default_exponent_range(mech: BranchingMechanism) -> Tuple[float, float]:
    """Scan range used when the config does not give one"""
    if mech.has_atoms and mech.beta == 0.0:
        return atom_scale_range(mech)
    return 0.0, 300.0


def _local_slope_floor(s: np.ndarray, lpsi: np.ndarray, window: float) -> float:
    j = np.searchsorted(s, s + window, side="left")
    ok = j < s.size
    if not np.any(ok):
        return float("nan")
    i = np.nonzero(ok)[0]
    slopes = (lpsi[j[ok]] - lpsi[i]) / (s[j[ok]] - s[i])
    return float(np.min(slopes))


def estimate_exponents(
    mech: BranchingMechanism,
    log_lambda_range: Optional[Tuple[float, float]] = None,
    n_points: int = 4000,
    floor_q: float = 1e-3,
    c_step: float = 0.01,
    slope_window: float = 0.5,
) -> ExponentReport:
    """
    Grid estimates of delta <= gamma <= eta.

    gamma_hat and eta_hat are the min and max of log psi / log lambda over
    the upper half of the grid. delta_hat is the largest c on the c-grid for
    which every grid pair u <= v (with log u >= 0) keeps
    psi(v) v^{-c} / (psi(u) u^{-c}) >= Q.

    Args:
        mech: Branching mechanism
        log_lambda_range: (lo, hi) in log lambda; must span at least 6 decades
        n_points: grid size
        floor_q: pair floor Q
        c_step: c-grid step on [1, 2]
        slope_window: width of the secant windows behind local_slope_floor

    Returns:
        ExponentReport
    """
    lo, hi = log_lambda_range or default_exponent_range(mech)
    notes = []
    if hi - lo < 6.0 * math.log(10.0):
        raise DomainError("exponent scan must span at least 6 decades")
    s = np.linspace(lo, hi, int(n_points))
    lpsi = log_psi(mech, s)

    upper = s >= 0.5 * (lo + hi)
    upper &= s > 0.0
    ratios = lpsi[upper] / s[upper]
    gamma_hat = float(np.min(ratios))
    eta_hat = float(np.max(ratios))

    tail = s >= 0.0
    st, lt = s[tail], lpsi[tail]
    log_q = math.log(floor_q)
    c_grid = np.round(1.0 + c_step * np.arange(int(round(1.0 / c_step)) + 1), 10)
    delta_hat = 1.0
    passed_any = False
    for c in c_grid:
        fc = lt - c * st
        drop = fc - np.maximum.accumulate(fc)
        if np.min(drop) >= log_q - 1e-12:
            delta_hat = float(c)
            passed_any = True
        else:
            break
    if not passed_any:
        notes.append("no c on the grid passed; delta_hat set to 1")

    floor = _local_slope_floor(st, lt, slope_window)
    notes.append(f"delta_hat: c-grid step {c_step}, floor Q={floor_q}, pairs restricted to log lambda >= 0")
    notes.append(f"gamma_hat/eta_hat: tail = upper half of [{lo:.4g}, {hi:.4g}]")
    notes.append(f"local_slope_floor: secant windows of width >= {slope_window}")

    stride = max(1, s.size // 400)
    scan = [(float(a), float(b)) for a, b in zip(s[::stride], lpsi[::stride])]
    return ExponentReport(
        delta_hat=delta_hat,
        gamma_hat=gamma_hat,
        eta_hat=eta_hat,
        local_slope_floor=floor,
        floor_q=floor_q,
        c_step=c_step,
        log_lambda_range=(float(lo), float(hi)),
        scan_grid=scan,
        notes=notes,
    )


def doubling_report(gauge: GaugeFunction, log_r: ArrayLike,
                    tol: SolverTolerances = DEFAULT_TOLERANCES) -> DoublingReport:
    """
    g(2r)/g(r) along a scale sequence given as log r.

    Raises:
        DomainError: some r or 2r outside (0, r0)
    """
    lr = np.atleast_1d(np.asarray(log_r, dtype=float))
    if lr.size == 0:
        return DoublingReport(max_ratio=float("nan"))
    if np.any(lr + LOG2 >= gauge.log_r0):
        raise DomainError("doubling scales need 2r < r0")
    log_ratio = gauge_log_g(gauge, lr + LOG2, tol) - gauge_log_g(gauge, lr, tol)
    k = int(np.argmax(log_ratio))
    return DoublingReport(
        max_ratio=float(np.exp(log_ratio[k])),
        log_r=lr.tolist(),
        log_ratios=np.asarray(log_ratio).tolist(),
        argmax_log_r=float(lr[k]),
    )


def dyadic_log_scales(log_r_max: float, steps: int) -> np.ndarray:
    """log r for r = r_max, r_max/2, ..., r_max/2^(steps-1)"""
    return log_r_max - LOG2 * np.arange(int(steps))


# ---------------------------------------------------------------------------
# Property checks
# ---------------------------------------------------------------------------

def roundtrip_errors(mech: BranchingMechanism, y: ArrayLike,
                     tol: SolverTolerances = DEFAULT_TOLERANCES) -> Dict[str, np.ndarray]:
    """
    Relative round-trip errors |psi(psi^-1(y)) - y| / max(1, y) and the same
    for phi (with y shifted by alpha so it lies in the domain of phi^-1).
    """
    y = np.asarray(y, dtype=float)
    lam = psi_inverse(mech, y, tol)
    psi_back = psi_family_eval(mech, lam).psi
    psi_err = np.abs(psi_back - y) / np.maximum(1.0, y)

    y_phi = mech.alpha + y
    sup = log_psi_prime_excess_sup(mech)
    phi_err = np.full(y.shape, np.nan)
    usable = np.log(y) < sup - 1e-9
    if np.any(usable):
        inv = phi_inverse(mech, y_phi[usable], tol)
        back = phi_forward(mech, inv, tol)
        phi_err[usable] = np.abs(back - y_phi[usable]) / np.maximum(1.0, y_phi[usable])
    return {"psi": psi_err, "phi": phi_err}


def convexity_sandwich(mech: BranchingMechanism, lam: ArrayLike, rel_slack: float = 1e-10,
                       tol: SolverTolerances = DEFAULT_TOLERANCES) -> Dict[str, int]:
    """
    Count violations of
        psi(2l) <= 4 psi(l),  psi~ <= psi' <= 4 psi~,  l/psi^-1(l) <= phi(l) <= 4 l/psi^-1(l)
    on a grid of lambdas > 0, all compared in logs.
    """
    lam = np.asarray(lam, dtype=float)
    s = np.log(lam)
    lpsi = log_psi(mech, s)
    lpsi2 = log_psi(mech, s + LOG2)
    log4 = math.log(4.0)
    lprime = log_psi_prime(mech, s)
    ltilde = lpsi - s

    s_inv = log_psi_inverse(mech, s, tol)
    lphi = log_psi_prime(mech, s_inv)
    lbound = s - s_inv

    eps = rel_slack
    return {
        "psi_doubling": int(np.sum(lpsi2 > lpsi + log4 + eps)),
        "tilde_below_prime": int(np.sum(ltilde > lprime + eps)),
        "prime_below_4tilde": int(np.sum(lprime > ltilde + log4 + eps)),
        "phi_lower": int(np.sum(lbound > lphi + eps)),
        "phi_upper": int(np.sum(lphi > lbound + log4 + eps)),
    }


J_CONSTANTS = (1.0 - math.exp(-1.0), 1.0)


def j_bounds_check(mech: BranchingMechanism, lam: ArrayLike, rel_slack: float = 1e-10) -> Dict[str, object]:
    """
    Compare psi'(l) - alpha = sum a_k r_k (1 - e^{-l r_k}) with
    l J(1/l) = sum a_k r_k min(l r_k, 1), using k1 = 1 - 1/e and k2 = 1.

    Only meaningful for beta = 0 atom mechanisms (no drift in psi').
    """
    if not mech.has_atoms or mech.beta > 0.0:
        raise DomainError("J bounds apply to beta = 0 atom mechanisms")
    s = np.log(np.asarray(lam, dtype=float))
    log_r, log_a = mech.atom_arrays()
    lexcess = log_psi_prime_excess(mech, s)
    shifted = s[:, None] + log_r
    log_lj = log_sum_exp(log_a + log_r + np.minimum(shifted, 0.0), axis=-1)
    k1, k2 = J_CONSTANTS
    lower_viol = int(np.sum(math.log(k1) + log_lj > lexcess + rel_slack))
    upper_viol = int(np.sum(lexcess > math.log(k2) + log_lj + rel_slack))
    return {
        "k1": k1,
        "k2": k2,
        "lower_violations": lower_viol,
        "upper_violations": upper_viol,
        "min_ratio": float(np.exp(np.min(lexcess - log_lj))),
        "max_ratio": float(np.exp(np.max(lexcess - log_lj))),
    }


def levy_moment(mech: BranchingMechanism) -> float:
    """log int (r ^ r^2) pi(dr); -inf without atoms"""
    log_r, log_a = mech.atom_arrays()
    if not log_r.size:
        return -math.inf
    return float(log_sum_exp(log_a + np.where(log_r < 0.0, 2.0 * log_r, log_r)))


def control_constant_profile(mech: BranchingMechanism, r: ArrayLike,
                             tol: SolverTolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """v(r) / (r phi^-1(1/r)) on a grid of r"""
    r = np.asarray(r, dtype=float)
    out = np.empty(r.shape)
    for i, value in enumerate(r.ravel()):
        v = solve_v(mech, float(value), tol)
        phi_inv = float(phi_inverse(mech, 1.0 / value, tol))
        out.ravel()[i] = v / (value * phi_inv)
    return out


def stable_control_constant(gamma: float) -> float:
    """(gamma-1)^{-1/(gamma-1)} gamma^{gamma/(gamma-1)}"""
    return (gamma - 1.0) ** (-1.0 / (gamma - 1.0)) * gamma ** (gamma / (gamma - 1.0))


def monotone(values: ArrayLike, increasing: bool = True, strict: bool = False) -> bool:
    """Pairwise monotonicity of consecutive values"""
    d = np.diff(np.asarray(values, dtype=float))
    if not increasing:
        d = -d
    return bool(np.all(d > 0.0) if strict else np.all(d >= 0.0))


def describe(mech: BranchingMechanism) -> Dict[str, object]:
    """Compact JSON-friendly description of a mechanism"""
    info: Dict[str, object] = {"label": mech.label, "alpha": mech.alpha, "beta": mech.beta,
                               "levy": mech.levy.kind}
    if mech.is_stable:
        info["gamma"] = mech.gamma
    if mech.has_atoms:
        log_r, log_a = mech.atom_arrays()
        info["atoms"] = int(log_r.size)
        info["log_r_range"] = [float(log_r[0]), float(log_r[-1])]
        info["log_moment"] = levy_moment(mech)
    return info


__all__: List[str] = [
    # Construction
    "stable_mechanism", "atom_mechanism", "build_counterexample", "build_mechanism", "describe",
    # psi family and inverses
    "PsiFamily", "log_psi", "log_psi_prime", "log_psi_prime_excess", "log_psi_prime_excess_sup",
    "psi_family_eval", "psi_inverse", "log_psi_inverse", "log_psi_prime_inverse",
    "phi_forward", "phi_inverse", "log_phi_inverse_excess", "roundtrip_errors",
    # Extinction, v and u
    "ExtinctionResult", "extinction_integral", "extinction_holds", "solve_v", "solve_u",
    "stable_v", "stable_u",
    # Gauge and doubling
    "GaugeValue", "make_gauge", "gauge_g", "gauge_log_g", "stable_gauge_log_g",
    "doubling_report", "dyadic_log_scales",
    # Exponents and sandwiches
    "atom_scale_range", "default_exponent_range", "estimate_exponents",
    "convexity_sandwich", "J_CONSTANTS", "j_bounds_check", "levy_moment",
    "control_constant_profile", "stable_control_constant", "monotone",
]
