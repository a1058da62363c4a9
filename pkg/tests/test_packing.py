"""
Tests for packing pre-measure estimates: solvers on small instances,
monotonicity in epsilon, density profiles and packing-versus-mass comparisons.
"""

import numpy as np
import pytest

from app.models.errors import DomainError, SolverCapError
from app.models.packing import Ball, PackingEstimate, PackingMethod, ToyGauge
from app.tools.mechanism import make_gauge
from app.tools.packing import (
    density_profile,
    dyadic_radius_grid,
    instance_from_tree,
    interval_points,
    make_instance,
    packing_value,
    packing_value_enumerate,
    packing_value_exact,
    packing_value_greedy,
    packing_vs_mass,
    pre_measure_estimate,
    profile_from_masses,
    subtree_intervals,
    validate_packing,
)
from app.tools.realtree import ball_mass, code_tree, make_path, tree_distance
from app.utils.rng import stream

LINE = [[0.0, 1.0, 3.0], [1.0, 0.0, 2.0], [3.0, 2.0, 0.0]]


@pytest.fixture
def line_instance():
    """Three points on a line at 0, 1 and 3"""
    return make_instance(LINE, ToyGauge(power=1.0), 1.0, radius_grid=[1.0, 0.5])


def test_solvers_agree_on_line(line_instance):
    for solver in (packing_value_exact, packing_value_enumerate, packing_value_greedy):
        estimate = solver(line_instance)
        assert estimate.value == pytest.approx(2.0)
        assert estimate.violations == 0
    assert packing_value_exact(line_instance).gap == 0.0


def test_exact_matches_enumeration_on_tree(random_tree):
    gauge = ToyGauge(power=1.5)
    instance = instance_from_tree(random_tree, [1000, 1003, 1010, 1030], gauge, 0.05, depth=4)
    exact = packing_value_exact(instance)
    reference = packing_value_enumerate(instance)
    greedy = packing_value_greedy(instance)
    assert exact.value == pytest.approx(reference.value, rel=1e-12)
    assert greedy.value <= exact.value + 1e-12
    assert exact.violations == reference.violations == greedy.violations == 0
    assert exact.method == "exact"


def _ultrametric(rng, n):
    """d(i, j) = largest gap between consecutive leaves i..j"""
    gaps = rng.uniform(0.1, 1.0, size=n - 1)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = gaps[i:j].max()
    return d


def _tree_metric(rng, n):
    inner = np.abs(np.cumsum(rng.standard_normal(399))) * 0.05 + 0.01
    tree = code_tree(make_path(np.concatenate([[0.0], inner, [0.0]]), 0.01))
    idx = np.sort(rng.choice(np.arange(1, 400), size=n, replace=False))
    return tree_distance(tree, idx[:, None], idx[None, :])


def _bank_instance(seed):
    """Small instance: an ultrametric for even seeds, points of a coded tree for odd ones"""
    rng = stream(seed, 0)
    n = int(rng.integers(3, 7))
    d = _ultrametric(rng, n) if seed % 2 == 0 else _tree_metric(rng, n)
    epsilon = float(np.median(d[np.triu_indices(n, 1)]))
    gauge = ToyGauge(power=float(rng.uniform(1.0, 2.5)))
    return make_instance(d, gauge, epsilon, depth=min(3, 12 // n))


@pytest.mark.parametrize("seed", range(50))
def test_exact_matches_enumeration_bank(seed):
    instance = _bank_instance(seed)
    assert instance.n_pairs <= 12
    exact = packing_value_exact(instance)
    reference = packing_value_enumerate(instance)
    greedy = packing_value_greedy(instance)
    assert exact.value == pytest.approx(reference.value, rel=1e-12)
    assert greedy.value <= exact.value + 1e-12
    assert exact.violations == reference.violations == greedy.violations == 0


def test_cap_falls_back_to_greedy(random_tree):
    points = interval_points(500, 1500, 17)
    instance = instance_from_tree(random_tree, points, ToyGauge(), 0.05, depth=4)
    assert instance.n_pairs == 68
    with pytest.raises(SolverCapError):
        packing_value_exact(instance)
    assert packing_value(instance).method == PackingMethod.GREEDY.value


def test_validate_packing_counts_overlaps(line_instance):
    estimate = PackingEstimate(
        value=2.0, method=PackingMethod.GREEDY, epsilon=1.0,
        balls=[Ball(center=0, radius=1.0, weight=1.0), Ball(center=1, radius=1.0, weight=1.0)],
    )
    assert validate_packing(line_instance, estimate) == 1


def test_instance_validation():
    with pytest.raises(DomainError):
        make_instance(LINE, ToyGauge(), 1.0, radius_grid=[2.0])
    with pytest.raises(DomainError):
        make_instance([[0.0, 1.0], [2.0, 0.0]], ToyGauge(), 1.0)
    with pytest.raises(DomainError):
        make_instance(LINE, ToyGauge(table=[(1.0, 1.0)]), 1.0, radius_grid=[1.0, 0.5])
    assert dyadic_radius_grid(1.0, 3) == [1.0, 0.5, 0.25]
    with pytest.raises(DomainError):
        dyadic_radius_grid(1.0, 0)


def test_pre_measure_is_nonincreasing(random_tree):
    points = interval_points(800, 1200, 10)
    estimates = pre_measure_estimate(random_tree, points, ToyGauge(power=1.5), [0.1, 0.05, 0.025])
    values = [e.value for e in estimates]
    assert all(e.method == "exact" for e in estimates)
    assert values[0] >= values[1] >= values[2]

    with pytest.raises(DomainError):
        pre_measure_estimate(random_tree, points, ToyGauge(), [0.05, 0.1])


def test_subtree_intervals_are_disjoint(random_tree):
    intervals = subtree_intervals(random_tree, 3)
    assert len(intervals) == 3
    for (_, stop), (start, _) in zip(intervals, intervals[1:]):
        assert stop < start
    with pytest.raises(DomainError):
        subtree_intervals(random_tree, 0)


def test_packing_vs_mass(random_tree):
    intervals = subtree_intervals(random_tree, 3)
    report = packing_vs_mass(random_tree, intervals, ToyGauge(power=1.5), 0.05, points_per_interval=10)
    assert len(report.rows) == 3
    assert all(row.ratio > 0.0 for row in report.rows)
    assert report.max_min_ratio >= 1.0

    with pytest.raises(DomainError):
        packing_vs_mass(random_tree, [(0, 100), (50, 200)], ToyGauge(), 0.05)

    skipped = packing_vs_mass(random_tree, [(10, 11)], ToyGauge(), 0.05)
    assert skipped.rows == [] and len(skipped.notes) == 1


def test_density_profile(random_tree, brownian):
    gauge = make_gauge(brownian)
    center = int(np.argmax(random_tree.h))
    profile = density_profile(random_tree, center, gauge, (1e-3, 0.05))
    assert len(profile.radii) == 6
    assert np.all(np.diff(profile.masses) >= 0.0)
    assert profile.min_ratio >= 0.0
    with pytest.raises(DomainError):
        density_profile(random_tree, center, gauge, (0.01, 0.5))
    with pytest.raises(DomainError):
        profile_from_masses(0, [0.1, 0.2], [2.0, 1.0], gauge)


def test_value_grows_with_the_point_set(random_tree):
    gauge = ToyGauge(power=1.5)
    points = [900, 905, 920, 950, 990, 1040]
    small = packing_value_exact(instance_from_tree(random_tree, points[:4], gauge, 0.05))
    large = packing_value_exact(instance_from_tree(random_tree, points, gauge, 0.05))
    assert small.value <= large.value + 1e-12


def test_separated_sets_add(line_instance):
    far = np.full((3, 3), 100.0)
    block = np.block([[np.asarray(LINE), far], [far, np.asarray(LINE)]])
    union = make_instance(block, ToyGauge(power=1.0), 1.0, radius_grid=[1.0, 0.5])
    assert packing_value_exact(union).value == pytest.approx(2.0 * packing_value_exact(line_instance).value)


def test_packing_is_bounded_by_mass_over_density(random_tree):
    """Disjoint balls with m(B) >= c g(r) give sum g(r) <= zeta / c"""
    gauge = ToyGauge(power=1.5)
    estimate = packing_value_exact(instance_from_tree(random_tree, interval_points(600, 1400, 12), gauge, 0.05))
    masses = np.array([ball_mass(random_tree, ball.center, ball.radius) for ball in estimate.balls])
    weights = np.array([ball.weight for ball in estimate.balls])
    assert masses.sum() <= random_tree.zeta + 1e-12
    c = float(np.min(masses / weights))
    assert estimate.value <= random_tree.zeta / c + 1e-9
