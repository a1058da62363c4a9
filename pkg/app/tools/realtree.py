"""
Real trees coded by excursion paths.

The tree is never materialized: a point is a grid index i of the coding path
h, the mass measure puts dt on every index except the last, and

    d(s, t) = h(s) + h(t) - 2 min_{[s ^ t, s v t]} h

is answered in O(1) by a two-level sparse table (in-block windows of up to
32 samples, and a sparse table over block minima).
"""

from typing import Dict, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from ..models.errors import DomainError
from ..models.tree import ExcursionPath, LocalTimeEstimate, PathOrigin

IndexLike = Union[int, Sequence[int], np.ndarray]

_BLOCK_LEVELS = 5
_BLOCK = 1 << _BLOCK_LEVELS

LTEX_MAGIC = b"LTEX"
LTEX_VERSION = 1
LTEX_HEADER = np.dtype([("magic", "S4"), ("version", "<u4"), ("n", "<u8"), ("dt", "<f8")])


class RangeMinimum:
    """Static range-minimum index over a float array, vectorized queries"""

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        self.size = values.size
        n_blocks = -(-self.size // _BLOCK)
        padded = np.full(n_blocks * _BLOCK + _BLOCK, np.inf)
        padded[: self.size] = values

        # fine[k][x] = min(values[x : x + 2^k])
        fine = [padded]
        for k in range(1, _BLOCK_LEVELS + 1):
            prev = fine[-1]
            half = 1 << (k - 1)
            level = prev.copy()
            level[:-half] = np.minimum(prev[:-half], prev[half:])
            fine.append(level)
        self._fine = fine

        # coarse[k][b] = min(blocks b .. b + 2^k - 1)
        block_min = padded[: n_blocks * _BLOCK].reshape(n_blocks, _BLOCK).min(axis=1)
        coarse = [block_min]
        k = 1
        while (1 << k) <= n_blocks:
            prev = coarse[-1]
            half = 1 << (k - 1)
            coarse.append(np.minimum(prev[: prev.size - half], prev[half:]))
            k += 1
        self._coarse = coarse

    def _fine_query(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        # windows shorter than 2 * _BLOCK; empty ranges give +inf
        length = j - i + 1
        out = np.full(i.shape, np.inf)
        ok = length > 0
        if np.any(ok):
            lo, hi, ln = i[ok], j[ok], length[ok]
            k = np.floor(np.log2(ln)).astype(int)
            vals = np.empty(lo.shape)
            for level in np.unique(k):
                sel = k == level
                table = self._fine[level]
                vals[sel] = np.minimum(table[lo[sel]], table[hi[sel] - (1 << level) + 1])
            out[ok] = vals
        return out

    def _coarse_query(self, bi: np.ndarray, bj: np.ndarray) -> np.ndarray:
        out = np.full(bi.shape, np.inf)
        ok = bj >= bi
        if np.any(ok):
            lo, hi = bi[ok], bj[ok]
            k = np.floor(np.log2(hi - lo + 1)).astype(int)
            vals = np.empty(lo.shape)
            for level in np.unique(k):
                sel = k == level
                table = self._coarse[level]
                vals[sel] = np.minimum(table[lo[sel]], table[hi[sel] - (1 << level) + 1])
            out[ok] = vals
        return out

    def query(self, i: IndexLike, j: IndexLike) -> np.ndarray:
        """min(values[min(i, j) .. max(i, j)]), inclusive, elementwise"""
        a = np.atleast_1d(np.asarray(i, dtype=np.int64))
        b = np.atleast_1d(np.asarray(j, dtype=np.int64))
        a, b = np.broadcast_arrays(a, b)
        lo, hi = np.minimum(a, b), np.maximum(a, b)

        short = (hi - lo + 1) < 2 * _BLOCK
        out = np.empty(lo.shape)
        if np.any(short):
            out[short] = self._fine_query(lo[short], hi[short])
        long_ = ~short
        if np.any(long_):
            l, h = lo[long_], hi[long_]
            first_block = -(-l // _BLOCK)
            last_block = (h + 1) // _BLOCK - 1
            head = self._fine_query(l, first_block * _BLOCK - 1)
            tail = self._fine_query((last_block + 1) * _BLOCK, h)
            body = self._coarse_query(first_block, last_block)
            out[long_] = np.minimum(np.minimum(head, tail), body)
        return out


class CodedTree:
    """
    Metric and mass view of an excursion path. Immutable after construction;
    queries take grid indices.
    """

    def __init__(self, path: ExcursionPath):
        self.path = path
        self.h = path.samples
        self.dt = float(path.dt)
        self.n = path.n
        self._rmq = RangeMinimum(self.h)

    @property
    def zeta(self) -> float:
        return self.path.zeta

    def check_index(self, t: IndexLike) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(t))
        if not np.issubdtype(idx.dtype, np.integer):
            raise DomainError("grid indices must be integers; use time_index for times")
        if np.any(idx < 0) or np.any(idx >= self.n):
            raise DomainError(f"grid index outside [0, {self.n - 1}]")
        return idx.astype(np.int64)

    def time_index(self, time: Union[float, Sequence[float], np.ndarray]) -> np.ndarray:
        """Nearest grid index of times in [0, zeta]"""
        times = np.atleast_1d(np.asarray(time, dtype=float))
        if np.any(times < 0.0) or np.any(times > self.zeta + 0.5 * self.dt):
            raise DomainError(f"time outside [0, {self.zeta}]")
        return np.minimum(np.rint(times / self.dt).astype(np.int64), self.n - 1)

    def min_between(self, s: IndexLike, t: IndexLike) -> np.ndarray:
        return self._rmq.query(self.check_index(s), self.check_index(t))

    def distances_from(self, t: int) -> np.ndarray:
        """d(s, t) for every grid index s, in O(n)"""
        t = int(self.check_index(t)[0])
        b = np.empty(self.n)
        b[t:] = np.minimum.accumulate(self.h[t:])
        b[: t + 1] = np.minimum.accumulate(self.h[t::-1])[::-1]
        return self.h + self.h[t] - 2.0 * b


def code_tree(path: ExcursionPath) -> CodedTree:
    """
    Build the range-minimum index of a path.

    Raises:
        DomainError: zeta = 0 or an identically zero path
    """
    if path.zeta <= 0.0 or path.height <= 0.0:
        raise DomainError("degenerate excursion: the coded tree would be a single point")
    return CodedTree(path)


def make_path(samples: Union[Sequence[float], np.ndarray], dt: float,
              origin: PathOrigin = PathOrigin.SYNTHETIC) -> ExcursionPath:
    """ExcursionPath with validation failures reported as DomainError"""
    try:
        return ExcursionPath(samples=samples, dt=dt, origin=origin)
    except ValidationError as e:
        raise DomainError(f"invalid excursion path: {e.errors()[0]['msg']}") from e


def piecewise_linear_path(knot_times: Sequence[float], knot_heights: Sequence[float], dt: float) -> ExcursionPath:
    """Synthetic path interpolating the knots on a grid of step dt"""
    knot_times = np.asarray(knot_times, dtype=float)
    n = int(round(knot_times[-1] / dt)) + 1
    grid = np.arange(n) * dt
    h = np.interp(grid, knot_times, np.asarray(knot_heights, dtype=float))
    h[0] = 0.0
    h[-1] = 0.0
    return make_path(h, dt)


def tent_path(height: float = 1.0, dt: float = 0.01) -> ExcursionPath:
    return piecewise_linear_path([0.0, height, 2.0 * height], [0.0, height, 0.0], dt)


def tree_distance(tree: CodedTree, s: IndexLike, t: IndexLike) -> Union[float, np.ndarray]:
    """d(s, t) at grid indices; scalar in, scalar out"""
    si, ti = tree.check_index(s), tree.check_index(t)
    d = tree.h[si] + tree.h[ti] - 2.0 * tree._rmq.query(si, ti)
    if np.ndim(s) == 0 and np.ndim(t) == 0:
        return float(d[0])
    return d


def ball_mass(tree: CodedTree, t: int, r: float) -> float:
    """m(B(p(t), r)) = dt * #{s < n - 1 : d(s, t) <= r}"""
    if r < 0.0:
        raise DomainError("ball radius must be nonnegative")
    d = tree.distances_from(t)[:-1]
    return tree.dt * int(np.count_nonzero(d <= r))


def ball_masses(tree: CodedTree, t: int, radii: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    """ball_mass at several radii from one sorted distance profile"""
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < 0.0):
        raise DomainError("ball radius must be nonnegative")
    d = np.sort(tree.distances_from(t)[:-1])
    return tree.dt * np.searchsorted(d, radii, side="right").astype(float)


def local_time_estimate(tree: CodedTree, a: float, epsilon: float, v_eps: float) -> LocalTimeEstimate:
    """
    Count the excursion intervals of h above level a whose maximum reaches
    a + epsilon, normalized by v(epsilon).
    """
    if a < 0.0 or not (epsilon > 0.0) or not (v_eps > 0.0):
        raise DomainError("local time needs a >= 0, epsilon > 0 and v(epsilon) > 0")
    runs = excursion_intervals(tree, a)
    count = 0
    if runs.size:
        # h(zeta) = 0 so every run ends inside the array
        run_max = np.maximum.reduceat(tree.h, runs.ravel())[::2]
        count = int(np.count_nonzero(run_max >= a + epsilon))
    return LocalTimeEstimate(level=a, epsilon=epsilon, count=count, v_eps=v_eps, value=count / v_eps)


def excursion_intervals(tree: CodedTree, a: float) -> np.ndarray:
    """
    Maximal runs of grid indices with h > a, as (start, end) rows with end
    exclusive. Each run codes the subtree above one vertex at height a.
    """
    if a < 0.0:
        raise DomainError("excursion level must be >= 0")
    above = (tree.h > a).astype(np.int8)
    edges = np.diff(np.concatenate(([0], above, [0])))
    return np.column_stack([np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)])


def mass_consistency(tree: CodedTree, epsilon: float, delta: float, v_eps: float) -> Dict[str, float]:
    """
    Compare sum_k ell^{k delta} delta with the total mass zeta.

    Returns:
        Dict with the level sum, zeta, the relative error and the number of levels
    """
    if not (delta > 0.0):
        raise DomainError("level spacing must be positive")
    levels = delta * np.arange(int(np.floor(tree.path.height / delta)) + 1)
    counts = np.array([local_time_estimate(tree, float(a), epsilon, v_eps).count for a in levels])
    total = float(np.sum(counts) * delta / v_eps)
    return {
        "level_sum": total,
        "zeta": tree.zeta,
        "relative_error": abs(total - tree.zeta) / tree.zeta,
        "levels": int(levels.size),
    }


def four_point_holds(d12, d34, d13, d24, d14, d23, slack: float = 1e-12) -> np.ndarray:
    return d12 + d34 <= np.maximum(d13 + d24, d14 + d23) + slack


def four_point_check(tree: CodedTree, quadruple: Sequence[int], slack: float = 1e-12) -> bool:
    """d12 + d34 <= max(d13 + d24, d14 + d23) + slack"""
    s1, s2, s3, s4 = (int(x) for x in quadruple)
    return bool(four_point_violations(tree, np.array([[s1, s2, s3, s4]]), slack) == 0)


def four_point_violations(tree: CodedTree, quads: np.ndarray, slack: float = 1e-12) -> int:
    """Number of violating rows of an (m, 4) array of grid indices"""
    q = np.asarray(quads, dtype=np.int64)
    d = {}
    for i, j in ((0, 1), (2, 3), (0, 2), (1, 3), (0, 3), (1, 2)):
        d[i, j] = tree_distance(tree, q[:, i], q[:, j])
    ok = four_point_holds(d[0, 1], d[2, 3], d[0, 2], d[1, 3], d[0, 3], d[1, 2], slack)
    return int(np.count_nonzero(~ok))


def triangle_violations(tree: CodedTree, triples: np.ndarray, slack: float = 1e-12) -> int:
    q = np.asarray(triples, dtype=np.int64)
    d01 = tree_distance(tree, q[:, 0], q[:, 1])
    d12 = tree_distance(tree, q[:, 1], q[:, 2])
    d02 = tree_distance(tree, q[:, 0], q[:, 2])
    return int(np.count_nonzero(d02 > d01 + d12 + slack))


def root_distance_errors(tree: CodedTree) -> int:
    """Grid indices where d(0, t) differs from h(t)"""
    return int(np.count_nonzero(tree.distances_from(0) != tree.h))


def root_ball_errors(tree: CodedTree, radii: Union[Sequence[float], np.ndarray]) -> int:
    """Radii where ball_mass(0, r) differs from dt * #{s : h(s) <= r}"""
    radii = np.asarray(radii, dtype=float)
    masses = ball_masses(tree, 0, radii)
    direct = np.array([tree.dt * np.count_nonzero(tree.h[:-1] <= r) for r in radii])
    return int(np.count_nonzero(masses != direct))


def is_leaf_time(tree: CodedTree, t: int, epsilon: float) -> bool:
    """
    Grid leaf test: both min h over [t - eps, t] and over [t, t + eps] lie
    strictly below h(t).

    Raises:
        DomainError: t at the boundary, or eps not below min(t, zeta - t)
    """
    t = int(tree.check_index(t)[0])
    if t == 0 or t == tree.n - 1:
        raise DomainError("leaf test needs 0 < t < zeta")
    k = max(1, int(round(epsilon / tree.dt)))
    if not k < min(t, tree.n - 1 - t):
        raise DomainError("leaf test needs epsilon < min(t, zeta - t)")
    left = tree._rmq.query(t - k, t)[0]
    right = tree._rmq.query(t, t + k)[0]
    return bool(left < tree.h[t] and right < tree.h[t])


def path_to_ltex(path: ExcursionPath) -> bytes:
    """Binary dump: 24-byte header (magic, u32 version, u64 n, f64 dt) then little-endian f64 samples"""
    header = np.zeros(1, dtype=LTEX_HEADER)
    header["magic"] = LTEX_MAGIC
    header["version"] = LTEX_VERSION
    header["n"] = path.n
    header["dt"] = path.dt
    return header.tobytes() + path.samples.astype("<f8").tobytes()


def path_from_ltex(payload: bytes, origin: PathOrigin = PathOrigin.SIMULATED) -> ExcursionPath:
    if len(payload) < LTEX_HEADER.itemsize:
        raise DomainError("LTEX payload shorter than its header")
    header = np.frombuffer(payload, dtype=LTEX_HEADER, count=1)[0]
    if bytes(header["magic"]) != LTEX_MAGIC:
        raise DomainError("not an LTEX payload")
    if int(header["version"]) != LTEX_VERSION:
        raise DomainError(f"unsupported LTEX version {int(header['version'])}")
    n = int(header["n"])
    if len(payload) != LTEX_HEADER.itemsize + 8 * n:
        raise DomainError("LTEX payload length does not match its header")
    samples = np.frombuffer(payload, dtype="<f8", count=n, offset=LTEX_HEADER.itemsize)
    return make_path(samples.astype(float), float(header["dt"]), origin)


def path_frame(path: ExcursionPath) -> pd.DataFrame:
    """(t, h) table for CSV inspection"""
    return pd.DataFrame({"t": np.arange(path.n) * path.dt, "h": path.samples})
