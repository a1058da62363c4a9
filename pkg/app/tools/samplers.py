"""
Random generators for the lab.

- Galton-Watson walks: offspring law with generating function
  f(s) = s + (1 - s)^gamma / gamma (Geometric(1/2) when gamma = 2), walk
  excursions and their discrete height processes.
- Subordinators with Laplace exponent phi* = phi - alpha on dyadic grids.
- The decorated spine: critical forests grafted along the ancestral line of a
  mass-random vertex, giving the ball masses M*_r.

Walks at scale p are rescaled by time 1/p and space b_p / p with b_p = p^(1/gamma).
Every sampler takes a numpy Generator; reproducible streams come from
``app.utils.rng.stream``.
"""

import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from tqdm import tqdm

from ..models.errors import DomainError, SamplerBudgetError
from ..models.mechanism import BranchingMechanism, GaugeFunction, NullMeasure
from ..models.samples import LaplaceEstimate, LiminfResult, SpineSample, SubordinatorPath, WalkExcursion
from ..utils.numerics import stable_mean
from ..utils.rng import chunk_bounds, stream
from .kernels import script_L
from .mechanism import gauge_log_g, phi_forward

# Purpose tags appended to (seed, index) stream keys
STREAM_TAGS: Dict[str, int] = {
    "walk": 1, "subordinator": 2, "spine": 3, "spine-profile": 4, "centers": 5, "tuples": 6, "laplace": 7, "kappa": 8,
}

OFFSPRING_TABLE_SIZE = 1 << 16
# Pareto tail draws are clipped here so cumulative sums stay inside int64
_TAIL_CLIP = float(1 << 50)
# neglected variance / increment variance for atom truncation
ATOM_TRUNCATION = 1e-6


# ---------------------------------------------------------------------------
# Offspring law
# ---------------------------------------------------------------------------

class OffspringLaw:
    """
    Critical offspring law in the domain of attraction of the gamma-stable law.

    For gamma < 2 the pmf p_0 = 1/gamma, p_1 = 0, p_2 = (gamma - 1)/2,
    p_{k+1} = p_k (k - gamma)/(k + 1) is tabulated up to K and the tail past K
    is drawn from the matching Pareto law. For gamma = 2 the law is
    Geometric(1/2) on {0, 1, ...}.
    """

    def __init__(self, gamma: float, table_size: int = OFFSPRING_TABLE_SIZE):
        if not (1.0 < gamma <= 2.0):
            raise DomainError(f"offspring law needs gamma in (1, 2], got {gamma}")
        self.gamma = float(gamma)
        self.geometric = gamma == 2.0
        self.table_size = int(table_size)
        if self.geometric:
            return

        K = self.table_size
        pmf = np.zeros(K + 1)
        pmf[0] = 1.0 / gamma
        pmf[2] = (gamma - 1.0) / 2.0
        k = np.arange(2, K, dtype=float)
        pmf[3:] = pmf[2] * np.cumprod((k - gamma) / (k + 1.0))
        self._pmf = pmf
        self._cdf = np.cumsum(pmf)
        self._tail = max(1.0 - self._cdf[-1], 0.0)
        sized = np.arange(K + 1) * pmf
        self._sb_cdf = np.cumsum(sized)
        self._sb_tail = max(1.0 - self._sb_cdf[-1], 0.0)
        self._table_mean = float(self._sb_cdf[-1])

    def pmf(self, k: Sequence[int]) -> np.ndarray:
        """P(xi = k); past the table the Pareto tail is not tabulated and reads 0"""
        k = np.asarray(k, dtype=np.int64)
        if self.geometric:
            return np.where(k >= 0, 0.5 ** (k.astype(float) + 1.0), 0.0)
        inside = (k >= 0) & (k <= self.table_size)
        return np.where(inside, self._pmf[np.clip(k, 0, self.table_size)], 0.0)

    def mean(self) -> float:
        """Mean of the sampled law, tail included"""
        if self.geometric:
            return 1.0
        nu = self.gamma
        return self._table_mean + self._tail * self.table_size * nu / (nu - 1.0)

    def _pareto(self, n: int, nu: float, rng: np.random.Generator) -> np.ndarray:
        v = 1.0 - rng.random(n)
        draws = np.floor(np.minimum(self.table_size * v ** (-1.0 / nu), _TAIL_CLIP))
        return np.maximum(draws, self.table_size + 1).astype(np.int64)

    def _inverse(self, cdf: np.ndarray, nu: float, size: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random(size)
        out = np.searchsorted(cdf, u, side="right").astype(np.int64)
        tail = out > self.table_size
        n_tail = int(np.count_nonzero(tail))
        if n_tail:
            out[tail] = self._pareto(n_tail, nu, rng)
        return out

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """iid offspring counts"""
        if self.geometric:
            return rng.geometric(0.5, size).astype(np.int64) - 1
        return self._inverse(self._cdf, self.gamma, size, rng)

    def size_biased_minus_one(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """xi^ - 1 where P(xi^ = k) = k p_k; siblings of a spine vertex"""
        if self.geometric:
            return rng.negative_binomial(2, 0.5, size).astype(np.int64)
        return self._inverse(self._sb_cdf, self.gamma - 1.0, size, rng) - 1

    def sum(self, counts: np.ndarray, rng: np.random.Generator, budget: int = 1 << 27) -> np.ndarray:
        """
        Total offspring of counts[i] independent parents, elementwise.

        Raises:
            SamplerBudgetError: more than ``budget`` parents in one call (gamma < 2)
        """
        counts = np.asarray(counts, dtype=np.int64)
        if self.geometric:
            out = rng.negative_binomial(np.maximum(counts, 1), 0.5).astype(np.int64)
            return np.where(counts > 0, out, 0)
        total = int(counts.sum())
        if total > budget:
            raise SamplerBudgetError(f"{total} parents exceed the per-generation budget {budget}",
                                     attempts=1, details={"parents": total, "budget": budget})
        draws = self.sample(total, rng)
        cs = np.concatenate([[0], np.cumsum(draws)])
        ends = np.cumsum(counts)
        return cs[ends] - cs[ends - counts]


def walk_normalization(gamma: float, scale: int) -> Tuple[float, float, float]:
    """(b_p, time step 1/p, space step b_p/p) with b_p = p^(1/gamma)"""
    if scale < 1:
        raise DomainError("walk scale p must be >= 1")
    b_p = float(scale) ** (1.0 / gamma)
    return b_p, 1.0 / scale, b_p / scale


def walk_exponent_constant(gamma: float) -> float:
    """
    c with log E exp(-l (xi - 1)) ~ c l^gamma as l -> 0.

    The rescaled walk then has Laplace exponent c l^gamma: c = 1 for
    Geometric(1/2) (variance 2) and 1/gamma for the gamma < 2 law.
    """
    return 1.0 if gamma == 2.0 else 1.0 / gamma


# ---------------------------------------------------------------------------
# Height processes
# ---------------------------------------------------------------------------

def _check_steps(steps: Sequence[int]) -> np.ndarray:
    arr = np.asarray(steps)
    if arr.ndim != 1:
        raise DomainError("walk steps must be one-dimensional")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise DomainError("walk steps must be integers")
    arr = arr.astype(np.int64)
    if np.any(arr < -1):
        raise DomainError("walk steps must be >= -1 (downward skip-free)")
    return arr


def discrete_height(steps: Sequence[int]) -> np.ndarray:
    """
    Height process of a downward skip-free walk.

    With S_0 = 0 and S_{n+1} = S_n + steps[n],
    H_n = #{0 <= j < n : S_j = min_{j <= k <= n} S_k} for n = 0..len(steps).
    A monotone stack of the S_j still equal to the running minimum gives
    amortized O(1) per step.

    Raises:
        DomainError: a step below -1
    """
    arr = _check_steps(steps)
    heights = np.empty(arr.size + 1, dtype=np.int64)
    stack: List[int] = []
    s = 0
    heights[0] = 0
    stack.append(0)
    for n, step in enumerate(arr.tolist(), start=1):
        s += step
        while stack and stack[-1] > s:
            stack.pop()
        heights[n] = len(stack)
        stack.append(s)
    return heights


def brute_force_heights(steps: Sequence[int]) -> np.ndarray:
    """Quadratic evaluation of the defining count"""
    arr = _check_steps(steps)
    walk = np.concatenate([[0], np.cumsum(arr)])
    out = np.zeros(walk.size, dtype=np.int64)
    for n in range(walk.size):
        out[n] = sum(1 for j in range(n) if walk[j] == walk[j:n + 1].min())
    return out


def _first_passage_steps(law: OffspringLaw, rng: np.random.Generator, max_length: int) -> Optional[np.ndarray]:
    """Steps xi - 1 from 0 up to the first hit of -1; None past max_length"""
    chunks: List[np.ndarray] = []
    level = 0
    total = 0
    chunk = 1024
    while total < max_length:
        size = min(chunk, max_length - total)
        steps = law.sample(size, rng) - 1
        path = level + np.cumsum(steps)
        hit = np.flatnonzero(path < 0)
        if hit.size:
            chunks.append(steps[: hit[0] + 1])
            return np.concatenate(chunks)
        chunks.append(steps)
        level = int(path[-1])
        total += size
        chunk *= 2
    return None


def sample_walk_excursion(
    gamma: float,
    scale: int,
    min_length: int,
    rng: np.random.Generator,
    max_factor: float = 8.0,
    max_attempts: int = 1_000_000,
    law: Optional[OffspringLaw] = None,
) -> WalkExcursion:
    """
    One excursion of the Lukasiewicz walk with min_length <= N <= max_factor * min_length.

    Args:
        gamma: stable index in (1, 2]
        scale: walk scale p
        min_length: smallest accepted number of vertices
        rng: random generator
        max_factor: longest accepted excursion as a multiple of min_length
        max_attempts: resampling budget
        law: prebuilt offspring law, reused across calls

    Returns:
        WalkExcursion with heights H_0..H_N (H_N = 0)

    Raises:
        SamplerBudgetError: no accepted excursion within max_attempts
    """
    if min_length < 1:
        raise DomainError("min_length must be >= 1")
    law = law or OffspringLaw(gamma)
    _, time_scale, space_scale = walk_normalization(gamma, scale)
    max_length = max(int(max_factor * min_length), min_length)

    for attempt in range(1, max_attempts + 1):
        steps = _first_passage_steps(law, rng, max_length)
        if steps is None or steps.size < min_length:
            continue
        return WalkExcursion(
            steps=steps, heights=discrete_height(steps), gamma=gamma, scale=scale,
            time_scale=time_scale, space_scale=space_scale, attempts=attempt,
        )
    raise SamplerBudgetError(
        f"no excursion of length in [{min_length}, {max_length}] after {max_attempts} attempts",
        attempts=max_attempts, details={"gamma": gamma, "min_length": min_length},
    )


def excursion_max_cdf(x: Sequence[float], terms: int = 200) -> np.ndarray:
    """P(max of a unit Brownian excursion <= x) = 1 + 2 sum_k (1 - 4k^2x^2) e^{-2k^2x^2}"""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k = np.arange(1, terms + 1, dtype=float)[:, None]
    arg = 2.0 * (k * x[None, :]) ** 2
    series = 1.0 + 2.0 * np.sum((1.0 - 2.0 * arg) * np.exp(-arg), axis=0)
    return np.where(x <= 0.05, 0.0, np.clip(series, 0.0, 1.0))


def brownian_max_statistic(walk: WalkExcursion) -> float:
    """max H / sqrt(2 N): the unit excursion maximum for offspring variance 2"""
    if not walk.gamma == 2.0:
        raise DomainError("the Brownian excursion statistic needs gamma = 2")
    return float(walk.heights.max()) / math.sqrt(2.0 * walk.length)


def brownian_max_ks(walks: Sequence[WalkExcursion]):
    """scipy KS test of the rescaled maxima against the Brownian excursion maximum law"""
    sample = np.array([brownian_max_statistic(w) for w in walks])
    return stats.kstest(sample, lambda x: excursion_max_cdf(x))


# ---------------------------------------------------------------------------
# Subordinators
# ---------------------------------------------------------------------------

def dyadic_radii(r_max: float, depth: int) -> np.ndarray:
    """r_max 2^-depth < ... < r_max / 2 < r_max"""
    if not (r_max > 0.0) or depth < 0:
        raise DomainError("dyadic grid needs r_max > 0 and depth >= 0")
    return r_max * np.exp2(-np.arange(depth, -1, -1, dtype=float))


def phi_star(mech: BranchingMechanism, lam: float) -> float:
    """phi*(lambda) = phi(lambda) - alpha"""
    if mech.is_stable:
        g = mech.gamma
        return g * lam ** ((g - 1.0) / g)
    return float(phi_forward(mech, lam)) - mech.alpha


def positive_stable(rho: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Z > 0 with E exp(-l Z) = exp(-l^rho), rho in (0, 1), by Kanter's transform
    Z = sin(rho U) / sin(U)^(1/rho) * (sin((1 - rho) U) / E)^((1 - rho)/rho)
    """
    if not (0.0 < rho < 1.0):
        raise DomainError(f"positive stable index must lie in (0, 1), got {rho}")
    u = np.pi * (1.0 - rng.random(size))
    e = rng.standard_exponential(size)
    a = np.sin(rho * u) / np.sin(u) ** (1.0 / rho)
    b = (np.sin((1.0 - rho) * u) / e) ** ((1.0 - rho) / rho)
    return a * b


def _truncated_atoms(mech: BranchingMechanism, threshold: float = ATOM_TRUNCATION) -> Dict[str, object]:
    """
    Keep the largest atoms; drop the smallest while their share of the
    jump variance sum a_k r_k^3 of U stays below ``threshold``.
    """
    log_r, log_a = mech.atom_arrays()
    r, a = np.exp(log_r), np.exp(log_a)
    log_var = log_a + 3.0 * log_r
    var = np.exp(log_var - log_var.max())
    # atoms are stored by decreasing position; accumulate from the small end
    dropped_share = np.cumsum(var[::-1])[::-1] / var.sum()
    keep = dropped_share > threshold
    keep[0] = True
    drop = ~keep
    return {
        "r": r[keep], "a": a[keep],
        "u_drift": float(np.sum(a[drop] * r[drop] ** 2)),
        "x_drift": mech.alpha + float(np.sum(a[keep] * r[keep])),
        "dropped": int(np.count_nonzero(drop)),
        "dropped_share": float(dropped_share[keep.sum()]) if drop.any() else 0.0,
    }


def _first_passage_times(levels: np.ndarray, drift: float, sizes: np.ndarray, rates: np.ndarray,
                         rng: np.random.Generator, budget: int) -> np.ndarray:
    """
    T_l = inf{t : X_t < -l} at nondecreasing levels for X_t = -drift t + compound
    Poisson jumps ``sizes`` at ``rates``. X only moves down continuously, so each
    passage happens inside a drift segment between two jumps.
    """
    out = np.zeros(levels.size)
    total_rate = float(rates.sum())
    if total_rate == 0.0:
        return levels / drift
    probs = rates / total_rate
    t, x = 0.0, 0.0
    done, used, batch = 0, 0, 1024
    while done < levels.size:
        if used >= budget:
            raise SamplerBudgetError(f"first passage needed more than {budget} jumps", attempts=used,
                                     details={"resolved_levels": done})
        n = min(batch, budget - used)
        gaps = rng.exponential(1.0 / total_rate, n)
        jumps = sizes[rng.choice(sizes.size, n, p=probs)]
        start_t = t + np.concatenate([[0.0], np.cumsum(gaps)[:-1]])
        start_x = x + np.concatenate([[0.0], np.cumsum(jumps - drift * gaps)[:-1]])
        end_x = start_x - drift * gaps
        reach = -np.minimum.accumulate(end_x)
        pending = levels[done:]
        idx = np.searchsorted(reach, pending, side="left")
        hit = idx < n
        n_hit = int(np.count_nonzero(hit))
        if n_hit:
            seg = idx[:n_hit]
            out[done:done + n_hit] = start_t[seg] + (start_x[seg] + pending[:n_hit]) / drift
            done += n_hit
        t = float(start_t[-1] + gaps[-1])
        x = float(end_x[-1] + jumps[-1])
        used += n
        batch *= 2
    return out


def _atom_path(increments: np.ndarray, rng: np.random.Generator,
               budget: int, trunc: Dict[str, object]) -> np.ndarray:
    """S at the right ends of consecutive intervals of the given lengths, S = T o U"""
    r, a = trunc["r"], trunc["a"]
    counts = rng.poisson(np.outer(increments, a * r))
    u = np.cumsum(counts @ r + trunc["u_drift"] * increments)
    return _first_passage_times(u, trunc["x_drift"], r, a, rng, budget)


def _check_subordinator_mech(mech: BranchingMechanism) -> str:
    if mech.is_stable:
        return "stable"
    if isinstance(mech.levy, NullMeasure):
        if mech.beta == 0.0:
            return "zero"
        return "inverse-gaussian" if mech.alpha > 0.0 else "levy"
    if mech.beta == 0.0:
        return "atoms"
    raise DomainError("unsupported exponent kind: atoms with a Brownian part")


def subordinator_increments(mech: BranchingMechanism, delta: float, size: int,
                            rng: np.random.Generator, budget: int = 1 << 24) -> np.ndarray:
    """
    ``size`` independent copies of S_delta.

    Raises:
        DomainError: unsupported mechanism, delta < 0
        SamplerBudgetError: atom first passages beyond the jump budget
    """
    if delta < 0.0:
        raise DomainError("subordinator increment needs delta >= 0")
    kind = _check_subordinator_mech(mech)
    if delta == 0.0 or kind == "zero":
        return np.zeros(size)
    if kind == "stable":
        g = mech.gamma
        rho = (g - 1.0) / g
        return (g * delta) ** (1.0 / rho) * positive_stable(rho, size, rng)
    beta = mech.beta
    if kind == "inverse-gaussian":
        return rng.wald(2.0 * beta * delta / mech.alpha, 2.0 * beta * delta ** 2, size)
    if kind == "levy":
        return 2.0 * beta * delta ** 2 / rng.standard_normal(size) ** 2
    trunc = _truncated_atoms(mech)
    steps = np.array([delta])
    return np.array([_atom_path(steps, rng, budget, trunc)[0] for _ in range(size)])


def sample_subordinator(mech: BranchingMechanism, depth: int, rng: np.random.Generator,
                        r_max: float = 1.0, seed: int = 0, stream_index: int = 0,
                        budget: int = 1 << 24) -> SubordinatorPath:
    """
    Subordinator with Laplace exponent phi* on {0} + dyadic_radii(r_max, depth).

    Stable and Null mechanisms get exact independent increments; drift-free
    atom mechanisms use S = T o U with a truncated, drift-compensated U.

    Raises:
        DomainError: unsupported mechanism
        SamplerBudgetError: atom first passages beyond the jump budget
    """
    kind = _check_subordinator_mech(mech)
    r = np.concatenate([[0.0], dyadic_radii(r_max, depth)])
    lengths = np.diff(r)
    notes: List[str] = []
    if kind == "atoms":
        trunc = _truncated_atoms(mech)
        values = _atom_path(lengths, rng, budget, trunc)
        notes.append(f"dropped {trunc['dropped']} smallest atoms, variance share {trunc['dropped_share']:.3g}")
        notes.append(f"U drift compensation {trunc['u_drift']:.6g}")
    else:
        values = np.array([subordinator_increments(mech, float(d), 1, rng)[0] for d in lengths])
        values = np.cumsum(values)
    if mech.is_stable:
        g = mech.gamma
        exponent = f"phi*(l) = {g:g} l^{(g - 1.0) / g:.6g}"
    else:
        exponent = f"phi*(l) = phi(l) - {mech.alpha:g} ({kind})"
    return SubordinatorPath(
        r=r, values=np.concatenate([[0.0], values]), mech_label=mech.label, exponent=exponent,
        seed=seed, stream=stream_index, notes=notes,
    )


# ---------------------------------------------------------------------------
# Monte Carlo Laplace checks
# ---------------------------------------------------------------------------

def laplace_estimate(samples: np.ndarray, r: float, lam: float, target: float,
                     sigmas: float = 3.0) -> LaplaceEstimate:
    """Compare the sample mean of exp(-lam X) with a target in standard errors"""
    values = np.exp(-lam * np.asarray(samples, dtype=float))
    mean, se = stable_mean(values)
    if se > 0.0:
        z = (mean - target) / se
    else:
        z = 0.0 if mean == target else math.inf
    return LaplaceEstimate(r=r, lam=lam, mean=mean, se=se, target=target, z_score=z,
                           replicates=int(values.size), passed=bool(abs(z) <= sigmas))


def subordinator_laplace(mech: BranchingMechanism, r: float, lam: float, samples: int,
                         rng: np.random.Generator, sigmas: float = 3.0) -> LaplaceEstimate:
    """E exp(-lam S_r) against exp(-r phi*(lam))"""
    draws = subordinator_increments(mech, r, samples, rng)
    return laplace_estimate(draws, r, lam, math.exp(-r * phi_star(mech, lam)), sigmas)


# ---------------------------------------------------------------------------
# Decorated spine
# ---------------------------------------------------------------------------

def _spine_gamma(mech: BranchingMechanism) -> float:
    if not mech.is_stable:
        raise DomainError("spine decorations need a StableTail mechanism")
    return float(mech.gamma)


def _levels(radii: np.ndarray, height: float) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0 or np.any(radii < 0.0) or np.any(np.diff(radii) < 0.0):
        raise DomainError("spine radii must be nonnegative and ascending")
    return np.floor(radii / height * (1.0 + 1e-12)).astype(np.int64)


def spine_mass_batch(mech: BranchingMechanism, radii: Sequence[float], scale: int, size: int,
                     rng: np.random.Generator, budget: int = 1 << 27) -> np.ndarray:
    """
    ``size`` independent M*_r profiles at GW scale p, shape (size, len(radii)).

    Generation k of the spine (distance k h_p from the marked vertex) holds
    Z_k vertices: the offspring of Z_{k-1} plus the xi^ - 1 siblings of the
    spine vertex, Z_0 = 1 being the marked vertex. M*_r counts vertices within
    floor(r / h_p) generations, each of mass 1/p. Spine vertices carry no mass.
    """
    gamma = _spine_gamma(mech)
    law = OffspringLaw(gamma)
    _, _, height = walk_normalization(gamma, scale)
    levels = _levels(np.asarray(radii), height)
    out = np.empty((size, levels.size))
    z = np.ones(size, dtype=np.int64)
    acc = np.ones(size, dtype=np.int64)
    out[:, levels == 0] = 1.0 / scale
    for k in range(1, int(levels.max()) + 1):
        z = law.sum(z, rng, budget)
        if k >= 2:
            z = z + law.size_biased_minus_one(size, rng)
        acc += z
        hit = levels == k
        if hit.any():
            out[:, hit] = (acc / scale)[:, None]
    return out


def spine_mass_chunk(mech: BranchingMechanism, radii: Sequence[float], scale: int, seed: int,
                     chunk_index: int, size: int, budget: int = 1 << 27) -> np.ndarray:
    """spine_mass_batch on the stream (seed, chunk_index, spine tag)"""
    rng = stream(seed, chunk_index, STREAM_TAGS["spine"])
    return spine_mass_batch(mech, radii, scale, size, rng, budget)


def spine_laplace_targets(mech: BranchingMechanism, radii: Sequence[float],
                          lams: Sequence[float]) -> Dict[Tuple[float, float], float]:
    """e^{alpha r} L_r(lambda) per (r, lambda)"""
    return {
        (float(r), float(lam)): math.exp(mech.alpha * r) * script_L(mech, float(r), float(lam), cross_check=False).value
        for r in radii for lam in lams
    }


def spine_laplace(mech: BranchingMechanism, radii: Sequence[float], lams: Sequence[float], scale: int,
                  replicates: int, seed: int, chunk_size: int = 1000, sigmas: float = 3.0,
                  progress: bool = False) -> List[LaplaceEstimate]:
    """
    Monte Carlo E exp(-lam M*_r) against e^{alpha r} L_r(lam), radius-major.

    Replicates are drawn in fixed chunks, one stream per chunk, so the
    estimate does not depend on how chunks are scheduled.
    """
    chunks = chunk_bounds(replicates, chunk_size)
    iterator = tqdm(list(enumerate(chunks)), desc="spine", disable=not progress)
    masses = np.vstack([spine_mass_chunk(mech, radii, scale, seed, c, len(rows)) for c, rows in iterator])
    return spine_estimates(mech, masses, radii, lams, sigmas)


def spine_estimates(mech: BranchingMechanism, masses: np.ndarray, radii: Sequence[float],
                    lams: Sequence[float], sigmas: float = 3.0) -> List[LaplaceEstimate]:
    """Laplace estimates from an assembled (replicates, radii) mass matrix"""
    targets = spine_laplace_targets(mech, radii, lams)
    return [
        laplace_estimate(masses[:, i], float(r), float(lam), targets[(float(r), float(lam))], sigmas)
        for i, r in enumerate(radii) for lam in lams
    ]


def _forest_lifetime_tail(gamma: float, roots: np.ndarray, b_p: float, rng: np.random.Generator) -> np.ndarray:
    """
    Continuum total mass of forests with ``roots`` roots: the first passage
    tau(x) of the rescaled walk below -x, x = roots / b_p, is
    x^gamma / c * Z with E exp(-l Z) = exp(-l^(1/gamma)).
    """
    x = roots / b_p
    out = np.zeros(roots.size)
    live = roots > 0
    if live.any():
        c = walk_exponent_constant(gamma)
        z = positive_stable(1.0 / gamma, int(live.sum()), rng)
        out[live] = x[live] ** gamma / c * z
    return out


def sample_spine(mech: BranchingMechanism, r_max: float, rng: np.random.Generator, scale: int,
                 radii: Optional[Sequence[float]] = None, budget: int = 50_000_000,
                 keep_profiles: bool = False, seed: int = 0, stream_index: int = 0) -> SpineSample:
    """
    One decorated spine on [0, r_max].

    Forest j is grafted at spine height j h_p (forest 0 is the marked vertex)
    and grown generation by generation up to r_max. Its mass profile m_j(y)
    is the number of its vertices within depth y, over p; the forest lifetime
    is the simulated mass plus a continuum first-passage draw for what is
    still alive at r_max. Then M*_r = sum_j m_j(r - r*_j) and
    S_r = sum_{r*_j <= r} zeta_j, so M* <= S pathwise.

    Raises:
        DomainError: non-stable mechanism, bad radii
        SamplerBudgetError: more than ``budget`` simulated vertices
    """
    gamma = _spine_gamma(mech)
    law = OffspringLaw(gamma)
    b_p, _, height = walk_normalization(gamma, scale)
    R = int(math.floor(r_max / height * (1.0 + 1e-12)))
    if R < 1:
        raise DomainError(f"r_max = {r_max} is below one generation h_p = {height:.3g}")
    if radii is None:
        radii = dyadic_radii(r_max, max(int(math.floor(math.log2(r_max / height))), 0))
    radii = np.asarray(radii, dtype=float)
    levels = _levels(radii, height)
    if levels.max() > R:
        raise DomainError("spine radii exceed r_max")

    roots = np.zeros(R + 1, dtype=np.int64)
    roots[0] = 1
    if R >= 2:
        roots[2:] = law.size_biased_minus_one(R - 1, rng)
    pop = np.zeros(R + 1, dtype=np.int64)
    profiles = np.zeros((R + 1, R + 1), dtype=np.int64)
    simulated = 0
    for k in range(R + 1):
        if k:
            pop[:k] = law.sum(pop[:k], rng, budget)
        pop[k] = roots[k]
        j = np.arange(k + 1)
        profiles[j, k - j] = pop[: k + 1]
        simulated += int(pop[: k + 1].sum())
        if simulated > budget:
            raise SamplerBudgetError(f"spine simulation passed {budget} vertices", attempts=1,
                                     details={"generation": k, "vertices": simulated})

    cum = np.cumsum(profiles, axis=1)
    mass = np.array([cum[np.arange(L + 1), L - np.arange(L + 1)].sum() for L in levels], dtype=float) / scale

    simulated_mass = cum[:, -1].astype(float)
    extra = np.maximum(scale * _forest_lifetime_tail(gamma, pop, b_p, rng) - pop, 0.0)
    lifetimes = (simulated_mass + extra) / scale
    lifetime_sum = np.array([lifetimes[: L + 1].sum() for L in levels])

    grafted = np.flatnonzero(roots > 0)
    return SpineSample(
        jump_positions=grafted * height,
        jump_sizes=roots[grafted] / b_p,
        lifetimes=lifetimes[grafted],
        profiles=cum[grafted] / scale if keep_profiles else None,
        radii=radii, mass=mass, lifetime_sum=lifetime_sum,
        scale=scale, generation_height=height, seed=seed, stream=stream_index,
    )


# ---------------------------------------------------------------------------
# liminf along a grid
# ---------------------------------------------------------------------------

def liminf_ratio(values: Sequence[float], log_r: Sequence[float], gauge: GaugeFunction,
                 window: Tuple[float, float]) -> LiminfResult:
    """
    min over grid r in [r_lo, r_hi] of value(r) / g(r), computed as a log ratio.

    Args:
        values: nondecreasing values on an ascending log-r grid
        log_r: the grid as log r
        gauge: gauge g
        window: (r_lo, r_hi) inside (0, r0)

    Raises:
        DomainError: decreasing values, window outside (0, r0), empty window
    """
    values = np.asarray(values, dtype=float)
    log_r = np.asarray(log_r, dtype=float)
    if values.shape != log_r.shape:
        raise DomainError("values and grid differ in shape")
    if np.any(np.diff(log_r) <= 0.0):
        raise DomainError("the r grid must be strictly ascending")
    if np.any(np.diff(values) < 0.0) or np.any(values < 0.0):
        raise DomainError("liminf_ratio needs nonnegative nondecreasing values")
    r_lo, r_hi = window
    if not (0.0 < r_lo <= r_hi) or not (math.log(r_hi) < gauge.log_r0):
        raise DomainError(f"window {window} lies outside (0, r0 = {gauge.r0:.6g})")

    inside = (log_r >= math.log(r_lo) - 1e-12) & (log_r <= math.log(r_hi) + 1e-12)
    if not inside.any():
        raise DomainError(f"no grid point inside the window {window}")
    lr = log_r[inside]
    with np.errstate(divide="ignore"):
        log_ratio = np.log(values[inside]) - np.atleast_1d(gauge_log_g(gauge, lr))
    ratio = np.exp(log_ratio)
    k = int(np.argmin(ratio))
    return LiminfResult(
        min_ratio=float(ratio[k]),
        argmin_r=float(math.exp(lr[k])),
        window=(float(r_lo), float(r_hi)),
        profile=[(float(a), float(b)) for a, b in zip(lr, ratio)],
    )


__all__: List[str] = [
    "OffspringLaw", "walk_normalization", "walk_exponent_constant",
    "discrete_height", "brute_force_heights", "sample_walk_excursion",
    "excursion_max_cdf", "brownian_max_statistic", "brownian_max_ks",
    "dyadic_radii", "phi_star", "positive_stable", "subordinator_increments", "sample_subordinator",
    "laplace_estimate", "subordinator_laplace",
    "spine_mass_batch", "spine_mass_chunk", "spine_laplace", "spine_estimates", "spine_laplace_targets",
    "sample_spine", "liminf_ratio", "STREAM_TAGS",
]
