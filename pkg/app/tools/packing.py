"""
Packing pre-measure estimates on finite samples of a coded tree.

Candidates are closed balls B(x_i, r_k) over a point sample and a finite
radius grid inside (0, epsilon]; two candidates conflict when
d(x_i, x_j) <= r_k + r_l (same center included). The packing value is a
maximum-weight independent set of the conflict graph with weights g(r_k):
exact by bitmask branch-and-bound under a pair cap, greedy above it.
"""

import math
from itertools import combinations
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..models.errors import DomainError, SolverCapError
from ..models.mechanism import GaugeFunction
from ..models.packing import (
    Ball,
    DensityProfile,
    PackingEstimate,
    PackingInstance,
    PackingMethod,
    PackingRatioReport,
    PackingRatioRow,
    ToyGauge,
)
from .mechanism import gauge_log_g
from .realtree import CodedTree, ball_masses, excursion_intervals, tree_distance

GaugeLike = Union[GaugeFunction, ToyGauge, Callable[[np.ndarray], np.ndarray]]

EXACT_PAIR_CAP = 64
ENUMERATION_CAP = 20


def gauge_values(gauge: GaugeLike, radii: Sequence[float]) -> np.ndarray:
    """g on a radius grid; real gauges are evaluated in the log domain"""
    r = np.asarray(radii, dtype=float)
    if isinstance(gauge, GaugeFunction):
        return np.exp(np.atleast_1d(gauge_log_g(gauge, np.log(r))))
    try:
        return np.asarray(gauge(r), dtype=float)
    except ValueError as e:
        raise DomainError(str(e)) from e


def gauge_log_values(gauge: GaugeLike, radii: Sequence[float]) -> np.ndarray:
    r = np.asarray(radii, dtype=float)
    if isinstance(gauge, GaugeFunction):
        return np.atleast_1d(gauge_log_g(gauge, np.log(r)))
    with np.errstate(divide="ignore"):
        return np.log(gauge_values(gauge, r))


def dyadic_radius_grid(epsilon: float, depth: int) -> List[float]:
    """epsilon, epsilon/2, ..., epsilon 2^-(depth-1)"""
    if not (epsilon > 0.0) or depth < 1:
        raise DomainError("radius grid needs epsilon > 0 and depth >= 1")
    return [epsilon * 2.0 ** -k for k in range(depth)]


def make_instance(distances: np.ndarray, gauge: GaugeLike, epsilon: float,
                  radius_grid: Optional[Sequence[float]] = None, depth: int = 4,
                  points: Optional[Sequence[int]] = None) -> PackingInstance:
    """PackingInstance from a distance matrix"""
    distances = np.asarray(distances, dtype=float)
    n = distances.shape[0] if distances.size else 0
    grid = list(radius_grid) if radius_grid is not None else dyadic_radius_grid(epsilon, depth)
    grid = sorted((float(r) for r in grid), reverse=True)
    points = list(points) if points is not None else list(range(n))
    try:
        return PackingInstance(points=points, distances=distances, epsilon=epsilon, radius_grid=grid,
                               weights=[float(w) for w in gauge_values(gauge, grid)])
    except ValueError as e:
        raise DomainError(f"invalid packing instance: {e}") from e


def instance_from_tree(tree: CodedTree, points: Sequence[int], gauge: GaugeLike, epsilon: float,
                       radius_grid: Optional[Sequence[float]] = None, depth: int = 4) -> PackingInstance:
    """Instance on grid indices of a coded tree, distances from the range-minimum index"""
    idx = np.asarray(points, dtype=np.int64)
    if idx.size:
        distances = np.atleast_2d(tree_distance(tree, idx[:, None], idx[None, :]))
    else:
        distances = np.zeros((0, 0))
    return make_instance(distances, gauge, epsilon, radius_grid, depth, [int(i) for i in idx])


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------

def _candidates(instance: PackingInstance) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(point position, radius, weight) per candidate, point-major; zero weights dropped"""
    n, m = len(instance.points), len(instance.radius_grid)
    pos = np.repeat(np.arange(n), m)
    radius = np.tile(np.asarray(instance.radius_grid, dtype=float), n)
    weight = np.tile(np.asarray(instance.weights, dtype=float), n)
    keep = weight > 0.0
    return pos[keep], radius[keep], weight[keep]


def _conflicts(instance: PackingInstance, pos: np.ndarray, radius: np.ndarray) -> np.ndarray:
    d = instance.distances[pos[:, None], pos[None, :]]
    return d <= radius[:, None] + radius[None, :]


def _estimate(instance: PackingInstance, chosen: Sequence[int], pos: np.ndarray, radius: np.ndarray,
              weight: np.ndarray, method: PackingMethod, gap: Optional[float] = None) -> PackingEstimate:
    balls = [Ball(center=instance.points[int(pos[c])], radius=float(radius[c]), weight=float(weight[c]))
             for c in chosen]
    estimate = PackingEstimate(value=float(sum(b.weight for b in balls)), balls=balls, method=method,
                               gap=gap, epsilon=instance.epsilon)
    estimate.violations = validate_packing(instance, estimate)
    return estimate


def validate_packing(instance: PackingInstance, estimate: PackingEstimate) -> int:
    """Post-hoc count of ball pairs failing the strict test d > r_i + r_j"""
    where = {p: i for i, p in enumerate(instance.points)}
    violations = 0
    for a, b in combinations(estimate.balls, 2):
        if a.center not in where or b.center not in where:
            violations += 1
            continue
        if not instance.distances[where[a.center], where[b.center]] > a.radius + b.radius:
            violations += 1
    return violations


def packing_value_greedy(instance: PackingInstance) -> PackingEstimate:
    """
    Admit candidates by decreasing g(r), ties broken by point then radius,
    whenever the ball is strictly disjoint from every admitted one.
    """
    pos, radius, weight = _candidates(instance)
    if pos.size == 0:
        return PackingEstimate(value=0.0, method=PackingMethod.GREEDY, epsilon=instance.epsilon)
    order = np.lexsort((-radius, pos, -weight))
    # clearance[i] = min over admitted balls B(x_j, r_j) of d(x_i, x_j) - r_j
    clearance = np.full(len(instance.points), np.inf)
    chosen: List[int] = []
    for c in order:
        i = pos[c]
        if clearance[i] > radius[c]:
            chosen.append(int(c))
            clearance = np.minimum(clearance, instance.distances[:, i] - radius[c])
    return _estimate(instance, chosen, pos, radius, weight, PackingMethod.GREEDY)


def packing_value_exact(instance: PackingInstance, cap: int = EXACT_PAIR_CAP) -> PackingEstimate:
    """
    Maximum-weight independent set of the conflict graph by branch-and-bound
    on bitmasks: greedy incumbent, branch on the heaviest remaining candidate,
    prune when the current weight plus all remaining weight cannot win.

    Raises:
        SolverCapError: more than ``cap`` center-radius pairs; use packing_value_greedy
    """
    if instance.n_pairs > cap:
        raise SolverCapError(
            f"{instance.n_pairs} center-radius pairs exceed the exact cap {cap}; use packing_value_greedy",
            details={"pairs": instance.n_pairs, "cap": cap},
        )
    pos, radius, weight = _candidates(instance)
    n = int(pos.size)
    if n == 0:
        return PackingEstimate(value=0.0, method=PackingMethod.EXACT, gap=0.0, epsilon=instance.epsilon)

    conflict = _conflicts(instance, pos, radius)
    adj_mask = [sum(1 << int(j) for j in np.flatnonzero(conflict[i])) for i in range(n)]
    w = [float(x) for x in weight]

    best = {"weight": 0.0, "set": []}
    # greedy incumbent
    used = 0
    for i in sorted(range(n), key=lambda k: (-w[k], int(pos[k]), -float(radius[k]))):
        if not (used >> i) & 1:
            best["set"].append(i)
            used |= adj_mask[i]
    best["weight"] = sum(w[i] for i in best["set"])

    def dfs(mask: int, current: float, chosen: List[int], remaining: float) -> None:
        if current + remaining <= best["weight"]:
            return
        if mask == 0:
            best["weight"] = current
            best["set"] = list(chosen)
            return
        node, heaviest = -1, -1.0
        m = mask
        while m:
            low = m & -m
            i = low.bit_length() - 1
            if w[i] > heaviest:
                heaviest, node = w[i], i
            m ^= low
        removed = adj_mask[node] & mask
        lost = 0.0
        m = removed
        while m:
            low = m & -m
            lost += w[low.bit_length() - 1]
            m ^= low
        chosen.append(node)
        dfs(mask & ~removed, current + w[node], chosen, remaining - lost)
        chosen.pop()
        dfs(mask & ~(1 << node), current, chosen, remaining - w[node])

    dfs((1 << n) - 1, 0.0, [], sum(w))
    return _estimate(instance, best["set"], pos, radius, weight, PackingMethod.EXACT, gap=0.0)


def packing_value_enumerate(instance: PackingInstance, cap: int = ENUMERATION_CAP) -> PackingEstimate:
    """Full subset enumeration; reference for small instances"""
    if instance.n_pairs > cap:
        raise SolverCapError(f"enumeration is limited to {cap} pairs", details={"pairs": instance.n_pairs})
    pos, radius, weight = _candidates(instance)
    conflict = _conflicts(instance, pos, radius)
    n = int(pos.size)
    best_value, best_set = 0.0, ()
    for size in range(1, n + 1):
        for subset in combinations(range(n), size):
            if any(conflict[a, b] for a, b in combinations(subset, 2)):
                continue
            value = float(sum(weight[list(subset)]))
            if value > best_value:
                best_value, best_set = value, subset
    return _estimate(instance, list(best_set), pos, radius, weight, PackingMethod.ENUMERATE, gap=0.0)


def packing_value(instance: PackingInstance, cap: int = EXACT_PAIR_CAP) -> PackingEstimate:
    """Exact under the cap, greedy above it"""
    if instance.n_pairs <= cap:
        return packing_value_exact(instance, cap)
    return packing_value_greedy(instance)


def pre_measure_estimate(tree: CodedTree, points: Sequence[int], gauge: GaugeLike,
                         eps_sequence: Sequence[float], depth: int = 4,
                         cap: int = EXACT_PAIR_CAP) -> List[PackingEstimate]:
    """
    P^(eps) along a decreasing eps sequence.

    Every epsilon draws its radii from one dyadic ladder started at the first
    epsilon and long enough to give the last one ``depth`` rungs. Each
    candidate family then contains the next and exact values are nonincreasing.

    Raises:
        DomainError: eps sequence empty or not strictly decreasing
    """
    eps = [float(e) for e in eps_sequence]
    if not eps or any(b >= a for a, b in zip(eps, eps[1:])):
        raise DomainError("epsilon sequence must be nonempty and strictly decreasing")
    extra = int(math.ceil(math.log2(eps[0] / eps[-1]) - 1e-9))
    ladder = dyadic_radius_grid(eps[0], depth + extra)
    results = []
    for epsilon in eps:
        grid = [r for r in ladder if r <= epsilon]
        instance = instance_from_tree(tree, points, gauge, epsilon, grid)
        results.append(packing_value(instance, cap))
    return results


# ---------------------------------------------------------------------------
# Density and packing-versus-mass estimates
# ---------------------------------------------------------------------------

def window_radii(window: Tuple[float, float], per_octave: int = 1) -> np.ndarray:
    """Geometric grid r_hi 2^{-j/per_octave} down to r_lo, ascending"""
    r_lo, r_hi = window
    if not (0.0 < r_lo <= r_hi) or per_octave < 1:
        raise DomainError(f"bad radius window {window}")
    steps = int(math.floor(per_octave * math.log2(r_hi / r_lo) + 1e-9))
    return r_hi * np.exp2(-np.arange(steps, -1, -1, dtype=float) / per_octave)


def profile_from_masses(center: int, radii: Sequence[float], masses: Sequence[float],
                        gauge: GaugeLike) -> DensityProfile:
    """Density profile from precomputed ball masses"""
    radii = np.asarray(radii, dtype=float)
    masses = np.asarray(masses, dtype=float)
    if np.any(np.diff(masses) < 0.0):
        raise DomainError("ball masses must be nondecreasing in r")
    with np.errstate(divide="ignore"):
        log_ratios = np.log(masses) - gauge_log_values(gauge, radii)
    k = int(np.argmin(log_ratios))
    return DensityProfile(
        center=int(center), radii=radii.tolist(), masses=masses.tolist(),
        log_ratios=log_ratios.tolist(), min_ratio=float(np.exp(log_ratios[k])), argmin_r=float(radii[k]),
    )


def density_profile(tree: CodedTree, center: int, gauge: GaugeLike, window: Tuple[float, float],
                    per_octave: int = 1) -> DensityProfile:
    """
    m(B(center, r)) / g(r) over a dyadic window.

    Raises:
        DomainError: window outside (0, r0) for a real gauge
    """
    if isinstance(gauge, GaugeFunction) and not math.log(window[1]) < gauge.log_r0:
        raise DomainError(f"window {window} exceeds r0 = {gauge.r0:.6g}")
    radii = window_radii(window, per_octave)
    return profile_from_masses(center, radii, ball_masses(tree, int(center), radii), gauge)


def interval_points(start: int, stop: int, count: int) -> List[int]:
    """Evenly spaced grid indices in [start, stop]"""
    count = max(1, min(count, stop - start + 1))
    return sorted(set(int(i) for i in np.rint(np.linspace(start, stop, count))))


def subtree_intervals(tree: CodedTree, count: int, levels: int = 64) -> List[Tuple[int, int]]:
    """
    ``count`` disjoint subtrees, each the excursion of h above one vertex.

    Scans evenly spaced levels and keeps the one whose ``count`` longest
    excursions have the largest minimum length. Intervals are inclusive
    grid indices, ordered by start.

    Raises:
        DomainError: no level has ``count`` excursions
    """
    if count < 1:
        raise DomainError("need at least one subtree")
    best: Optional[Tuple[int, np.ndarray]] = None
    for a in np.linspace(0.0, tree.path.height, levels + 2)[1:-1]:
        runs = excursion_intervals(tree, float(a))
        if runs.shape[0] < count:
            continue
        lengths = runs[:, 1] - runs[:, 0]
        top = np.argsort(-lengths, kind="stable")[:count]
        score = int(lengths[top].min())
        if best is None or score > best[0]:
            best = (score, runs[top])
    if best is None:
        raise DomainError(f"no level splits the tree into {count} subtrees")
    chosen = best[1][np.argsort(best[1][:, 0])]
    return [(int(start), int(end) - 1) for start, end in chosen]


def packing_vs_mass(tree: CodedTree, intervals: Sequence[Tuple[int, int]], gauge: GaugeLike,
                    epsilon: float, points_per_interval: int = 400, depth: int = 4,
                    cap: int = EXACT_PAIR_CAP) -> PackingRatioReport:
    """
    Packing estimate over mass for subtrees coded by disjoint time intervals.

    Intervals are (start, stop) grid indices; the mass of an interval is
    (stop - start) dt. Degenerate intervals are skipped with a note.

    Raises:
        DomainError: overlapping intervals
    """
    ordered = sorted((int(a), int(b)) for a, b in intervals)
    for (a0, b0), (a1, b1) in zip(ordered, ordered[1:]):
        if a1 <= b0:
            raise DomainError(f"intervals [{a0}, {b0}] and [{a1}, {b1}] overlap")

    report = PackingRatioReport(epsilon=epsilon)
    grid = dyadic_radius_grid(epsilon, depth)
    for k, (start, stop) in enumerate(intervals):
        start, stop = int(start), int(stop)
        if stop - start < 2 or start < 0 or stop >= tree.n:
            report.notes.append(f"interval {k} [{start}, {stop}] skipped: degenerate or out of range")
            continue
        points = interval_points(start, stop, points_per_interval)
        instance = instance_from_tree(tree, points, gauge, epsilon, grid)
        estimate = packing_value(instance, cap)
        mass = (stop - start) * tree.dt
        report.rows.append(PackingRatioRow(
            interval_id=k, start=start, stop=stop, estimate=estimate.value, mass=mass,
            ratio=estimate.value / mass, method=estimate.method,
        ))
    ratios = [row.ratio for row in report.rows]
    if ratios and min(ratios) > 0.0:
        report.max_min_ratio = max(ratios) / min(ratios)
    elif ratios:
        report.notes.append("a zero packing estimate makes the spread undefined")
    return report


__all__: List[str] = [
    "gauge_values", "gauge_log_values", "dyadic_radius_grid", "make_instance", "instance_from_tree",
    "packing_value_exact", "packing_value_greedy", "packing_value_enumerate", "packing_value",
    "validate_packing", "pre_measure_estimate", "window_radii", "profile_from_masses",
    "density_profile", "interval_points", "subtree_intervals", "packing_vs_mass", "EXACT_PAIR_CAP", "ENUMERATION_CAP",
]
