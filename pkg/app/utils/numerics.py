"""
Numerical building blocks shared by the mechanism and kernel tools.

Everything here works on numpy arrays and keeps quantities in the log domain
whenever the caller needs to survive underflow (atom series at scales like
e^{-n^2}). Root finding delegates to scipy's brentq; quadrature is adaptive
Gauss-Legendre on top of scipy's Legendre nodes.
"""

from functools import lru_cache
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
from scipy import optimize, special

from ..models.errors import ConvergenceError, QuadratureError

LOG_FLOAT_MAX = float(np.log(np.finfo(float).max))
LOG2 = float(np.log(2.0))

# Series switch for f(x) = e^{-x} - 1 + x
_SERIES_CUTOFF = 1e-2


# ---------------------------------------------------------------------------
# Log-domain elementary functions
# ---------------------------------------------------------------------------

def log_excess_exponential(log_x: np.ndarray) -> np.ndarray:
    """
    log(e^{-x} - 1 + x) for x = exp(log_x), accurate for tiny and huge x.

    Args:
        log_x: log of the (positive) argument, any shape

    Returns:
        Array of the same shape
    """
    lx = np.asarray(log_x, dtype=float)
    out = np.empty_like(lx)

    small = lx < np.log(_SERIES_CUTOFF)
    large = lx > 30.0
    mid = ~(small | large)

    if np.any(small):
        x = np.exp(lx[small])
        # x^2/2 * (1 - x/3 + x^2/12 - x^3/60 + x^4/360)
        poly = 1.0 - x / 3.0 + x * x / 12.0 - x ** 3 / 60.0 + x ** 4 / 360.0
        out[small] = 2.0 * lx[small] - LOG2 + np.log(poly)
    if np.any(large):
        # e^{-x} is below 1e-13000 here; x - 1 is all that matters
        x_large = lx[large]
        out[large] = x_large + np.log1p(-np.exp(-x_large))
    if np.any(mid):
        x = np.exp(lx[mid])
        out[mid] = np.log(np.expm1(-x) + x)
    return out


def log_one_minus_exp_neg(log_x: np.ndarray) -> np.ndarray:
    """log(1 - e^{-x}) for x = exp(log_x)"""
    lx = np.asarray(log_x, dtype=float)
    out = np.empty_like(lx)
    tiny = lx < -30.0
    rest = ~tiny
    # 1 - e^{-x} = x (1 - x/2 + ...)
    out[tiny] = lx[tiny] - 0.5 * np.exp(lx[tiny])
    x = np.exp(np.minimum(lx[rest], 700.0))
    out[rest] = np.log(-np.expm1(-x))
    return out


def log1mexp(x: np.ndarray) -> np.ndarray:
    """log(1 - e^{-x}) for x > 0 given directly"""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x < LOG2, np.log(-np.expm1(-x)), np.log1p(-np.exp(-x)))


# ---------------------------------------------------------------------------
# Compensated summation
# ---------------------------------------------------------------------------

def neumaier_sum(values: np.ndarray, axis: int = -1) -> np.ndarray:
    """
    Neumaier-compensated sum along one axis, vectorized over the others.

    Args:
        values: array of addends
        axis: axis to reduce

    Returns:
        Array with ``axis`` removed
    """
    v = np.moveaxis(np.asarray(values, dtype=float), axis, -1)
    total = np.zeros(v.shape[:-1])
    comp = np.zeros(v.shape[:-1])
    for k in range(v.shape[-1]):
        x = v[..., k]
        t = total + x
        big = np.abs(total) >= np.abs(x)
        comp += np.where(big, (total - t) + x, (x - t) + total)
        total = t
    return total + comp


def log_sum_exp(log_terms: np.ndarray, axis: int = -1) -> np.ndarray:
    """
    Compensated log-sum-exp. Terms equal to -inf contribute nothing; a slice
    of only -inf terms returns -inf.
    """
    lt = np.asarray(log_terms, dtype=float)
    peak = np.max(lt, axis=axis, keepdims=True)
    safe_peak = np.where(np.isfinite(peak), peak, 0.0)
    scaled = np.exp(lt - safe_peak)
    total = neumaier_sum(scaled, axis=axis)
    with np.errstate(divide="ignore"):
        out = np.log(total) + np.squeeze(safe_peak, axis=axis)
    return np.where(np.isfinite(np.squeeze(peak, axis=axis)), out, -np.inf)


def saturate_log(log_value: np.ndarray, limit: float = LOG_FLOAT_MAX) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exponentiate a log-domain value, clipping instead of overflowing.

    Returns:
        (value, saturated_mask)
    """
    lv = np.asarray(log_value, dtype=float)
    saturated = lv > limit
    value = np.exp(np.minimum(lv, limit))
    return value, saturated


def stable_mean(values: np.ndarray) -> Tuple[float, float]:
    """Compensated sample mean and its standard error"""
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    if n == 0:
        return float("nan"), float("nan")
    mean = float(neumaier_sum(v) / n)
    if n == 1:
        return mean, float("nan")
    var = float(neumaier_sum((v - mean) ** 2) / (n - 1))
    return mean, float(np.sqrt(var / n))


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]"""
    nodes, weights = special.roots_legendre(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _gl_rule(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, n: int) -> float:
    nodes, weights = gauss_legendre(n)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    vals = np.asarray(f(mid + half * nodes), dtype=float)
    return float(half * neumaier_sum(weights * vals))


def adaptive_quad(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rtol: float = 1e-9,
    atol: float = 0.0,
    max_intervals: int = 4000,
) -> Tuple[float, float]:
    """
    Adaptive Gauss-Legendre quadrature of a vectorized integrand.

    Each interval is integrated with 16 and 32 nodes; intervals whose two
    estimates disagree beyond their share of the tolerance are bisected.

    Args:
        f: integrand accepting and returning numpy arrays
        a, b: finite limits
        rtol: relative tolerance on the total
        atol: absolute tolerance on the total
        max_intervals: bisection budget

    Returns:
        (value, error_estimate)

    Raises:
        QuadratureError: budget exhausted, with the partial value attached
    """
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0

    width = b - a
    stack = [(a, b)]
    accepted = []
    errors = []
    whole = _gl_rule(f, a, b, 32)
    processed = 0

    while stack:
        lo, hi = stack.pop()
        processed += 1
        coarse = _gl_rule(f, lo, hi, 16)
        fine = _gl_rule(f, lo, hi, 32)
        err = abs(fine - coarse)
        share = (hi - lo) / width
        tol = max(atol, rtol * abs(whole)) * share
        if err <= tol or (hi - lo) <= 1e-12 * width:
            accepted.append(fine)
            errors.append(err)
            continue
        if processed > max_intervals:
            partial = sign * float(neumaier_sum(np.array(accepted + [fine])))
            raise QuadratureError(
                "adaptive quadrature exceeded its interval budget",
                partial_value=partial,
                details={"a": a, "b": b, "intervals": processed},
            )
        mid = 0.5 * (lo + hi)
        stack.append((mid, hi))
        stack.append((lo, mid))

    value = float(neumaier_sum(np.array(accepted))) if accepted else 0.0
    return sign * value, float(np.sum(errors))


def integrate_pieces(
    log_f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    rtol: float = 1e-9,
    width: float = 1.0,
) -> float:
    """Integral of exp(log_f) over [lo, hi] as a sum of adaptive pieces of at most ``width``"""
    if hi <= lo:
        return 0.0
    edges = np.append(np.arange(lo, hi, width), hi)
    pieces = [adaptive_quad(lambda t: np.exp(log_f(t)), a, b, rtol=rtol)[0]
              for a, b in zip(edges[:-1], edges[1:]) if b > a]
    return float(neumaier_sum(np.array(pieces))) if pieces else 0.0


class TailIntegral(NamedTuple):
    """Result of a semi-infinite integral in a log variable"""
    value: float
    finite: bool
    pieces: int
    tail_ratio: float


def integrate_log_tail(
    log_integrand: Callable[[np.ndarray], np.ndarray],
    start: float,
    direction: int = 1,
    step: float = 1.0,
    rtol: float = 1e-9,
    max_pieces: int = 2000,
    stall_pieces: int = 30,
) -> TailIntegral:
    """
    Integrate exp(log_integrand(t)) over [start, +inf) (direction=+1) or
    (-inf, start] (direction=-1).

    The range is cut into pieces of width ``step``. Once the ratio of
    successive pieces settles below one, the remainder is closed by a
    geometric tail. Ratios stuck at one for ``stall_pieces`` pieces, or a
    piece budget that runs out, mark the integral as divergent.

    Returns:
        TailIntegral(value, finite, pieces, tail_ratio); ``value`` is the
        partial sum when ``finite`` is False
    """
    def integrand(t):
        return np.exp(log_integrand(t))

    parts = []
    prev_piece = None
    prev_ratio = None
    stalled = 0
    ratio = float("nan")

    for k in range(max_pieces):
        lo = start + direction * k * step
        hi = lo + direction * step
        piece, _ = adaptive_quad(integrand, min(lo, hi), max(lo, hi), rtol=rtol * 1e-2)
        parts.append(piece)
        total = float(neumaier_sum(np.array(parts)))

        if total > 0.0 and piece <= 1e-17 * total:
            return TailIntegral(total, True, k + 1, 0.0)

        if prev_piece is not None and prev_piece > 0.0:
            ratio = piece / prev_piece
            if ratio >= 1.0 - 1e-3:
                stalled += 1
                if stalled >= stall_pieces:
                    return TailIntegral(total, False, k + 1, ratio)
            else:
                stalled = 0
                tail = piece * ratio / (1.0 - ratio)
                settled = prev_ratio is not None and abs(ratio - prev_ratio) <= 1e-11
                if tail <= rtol * 1e-2 * total or (settled and tail <= 1e-3 * total):
                    return TailIntegral(total + tail, True, k + 1, ratio)
            prev_ratio = ratio
        prev_piece = piece

    return TailIntegral(float(neumaier_sum(np.array(parts))), False, max_pieces, ratio)


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------

def expand_bracket(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    grow: float = 2.0,
    max_expansions: int = 200,
    lower_limit: Optional[float] = None,
    upper_limit: Optional[float] = None,
) -> Tuple[float, float, float, float]:
    """
    Widen [lo, hi] geometrically until f changes sign.

    Returns:
        (lo, hi, f(lo), f(hi))

    Raises:
        ConvergenceError: no sign change inside the expansion budget
    """
    f_lo, f_hi = f(lo), f(hi)
    span = max(hi - lo, 1e-3)
    for _ in range(max_expansions):
        if np.sign(f_lo) != np.sign(f_hi) or f_lo == 0.0 or f_hi == 0.0:
            return lo, hi, f_lo, f_hi
        span *= grow
        # Move the endpoint whose value is closer to zero
        if abs(f_lo) < abs(f_hi):
            lo = lo - span
            if lower_limit is not None:
                lo = max(lo, lower_limit)
            f_lo = f(lo)
        else:
            hi = hi + span
            if upper_limit is not None:
                hi = min(hi, upper_limit)
            f_hi = f(hi)
    raise ConvergenceError(
        "bracket expansion found no sign change",
        details={"lo": lo, "hi": hi, "f_lo": f_lo, "f_hi": f_hi},
    )


def bracketed_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-13,
    rtol: float = 1e-13,
    maxiter: int = 200,
) -> float:
    """
    Brent's method on a sign-changing bracket.

    Raises:
        ConvergenceError: carrying the bracket when brentq does not converge
    """
    try:
        root, info = optimize.brentq(f, lo, hi, xtol=xtol, rtol=max(rtol, 4 * np.finfo(float).eps),
                                     maxiter=maxiter, full_output=True, disp=False)
    except ValueError as e:
        raise ConvergenceError(f"invalid bracket: {e}", details={"lo": lo, "hi": hi}) from e
    if not info.converged:
        raise ConvergenceError(
            f"brentq did not converge: {info.flag}",
            details={"lo": lo, "hi": hi, "iterations": info.iterations, "last": root},
        )
    return float(root)
