"""
Tests for trees coded by excursion paths: distances, ball masses, the
four-point condition, excursion intervals and local times.
"""

import numpy as np
import pytest

from app.models.errors import DomainError
from app.tools.mechanism import stable_v
from app.tools.realtree import (
    RangeMinimum,
    ball_mass,
    ball_masses,
    code_tree,
    excursion_intervals,
    four_point_check,
    four_point_violations,
    is_leaf_time,
    local_time_estimate,
    make_path,
    mass_consistency,
    path_from_ltex,
    path_to_ltex,
    piecewise_linear_path,
    root_ball_errors,
    root_distance_errors,
    tent_path,
    tree_distance,
    triangle_violations,
)
from app.tools.samplers import sample_walk_excursion
from app.utils.rng import stream


@pytest.fixture
def two_humps():
    """Two peaks of height 1 joined at height 0.2"""
    return code_tree(piecewise_linear_path([0.0, 1.0, 2.0, 3.0, 4.0], [0.0, 1.0, 0.2, 1.0, 0.0], 0.01))


def test_range_minimum_matches_brute_force():
    rng = stream(3, 0)
    values = rng.random(1000)
    rmq = RangeMinimum(values)
    i = rng.integers(0, 1000, size=500)
    j = rng.integers(0, 1000, size=500)
    expected = [values[min(a, b):max(a, b) + 1].min() for a, b in zip(i, j)]
    assert np.array_equal(rmq.query(i, j), expected)
    assert rmq.query(5, 5)[0] == values[5]


def test_tent_distances():
    tree = code_tree(tent_path(1.0, 0.01))
    assert tree.n == 201
    assert tree.zeta == pytest.approx(2.0)
    assert tree_distance(tree, 40, 150) == pytest.approx(0.1)
    assert tree_distance(tree, 50, 150) == pytest.approx(0.0, abs=1e-12)
    assert tree_distance(tree, 0, 100) == pytest.approx(1.0)


def test_distances_from_matches_pairwise(random_tree):
    t = 777
    everything = np.arange(random_tree.n)
    assert np.allclose(random_tree.distances_from(t), tree_distance(random_tree, everything, t), atol=1e-12)


def test_metric_checks_on_random_tree(random_tree):
    rng = stream(5, 0)
    quads = rng.integers(0, random_tree.n, size=(2000, 4))
    assert four_point_violations(random_tree, quads) == 0
    assert triangle_violations(random_tree, quads[:, :3]) == 0
    assert four_point_check(random_tree, quads[0])
    assert root_distance_errors(random_tree) == 0
    assert root_ball_errors(random_tree, np.linspace(0.0, random_tree.path.height, 17)[1:]) == 0


def test_ball_mass(random_tree):
    top = int(np.argmax(random_tree.h))
    assert ball_mass(random_tree, top, 10.0 * random_tree.path.height) == pytest.approx(random_tree.zeta)
    radii = [0.0, 0.01, 0.1, 1.0]
    masses = ball_masses(random_tree, top, radii)
    assert np.all(np.diff(masses) >= 0.0)
    assert masses[1] == pytest.approx(ball_mass(random_tree, top, 0.01))
    with pytest.raises(DomainError):
        ball_mass(random_tree, top, -0.1)


def test_excursion_intervals(two_humps):
    assert excursion_intervals(two_humps, 0.5).shape == (2, 2)
    assert excursion_intervals(two_humps, 0.1).shape == (1, 2)
    assert excursion_intervals(two_humps, 1.5).shape == (0, 2)
    with pytest.raises(DomainError):
        excursion_intervals(two_humps, -1.0)


def test_local_time_counts_excursions(two_humps):
    estimate = local_time_estimate(two_humps, 0.5, 0.3, 4.0)
    assert estimate.count == 2
    assert estimate.value == pytest.approx(0.5)
    assert local_time_estimate(two_humps, 0.5, 0.6, 4.0).count == 0
    with pytest.raises(DomainError):
        local_time_estimate(two_humps, 0.5, 0.0, 4.0)


def test_leaf_times():
    tree = code_tree(tent_path(1.0, 0.01))
    assert is_leaf_time(tree, 100, 0.05)
    assert not is_leaf_time(tree, 50, 0.05)
    with pytest.raises(DomainError):
        is_leaf_time(tree, 0, 0.05)
    with pytest.raises(DomainError):
        is_leaf_time(tree, 3, 0.05)


def test_path_validation():
    with pytest.raises(DomainError):
        make_path([0.0, -1.0, 0.0], 0.1)
    with pytest.raises(DomainError):
        make_path([0.0, 1.0, 0.5], 0.1)
    with pytest.raises(DomainError):
        code_tree(make_path([0.0, 0.0, 0.0], 0.1))


def test_ltex_dump(random_tree):
    payload = path_to_ltex(random_tree.path)
    assert payload[:4] == b"LTEX"
    restored = path_from_ltex(payload)
    assert np.array_equal(restored.samples, random_tree.path.samples)
    assert restored.dt == random_tree.path.dt
    with pytest.raises(DomainError):
        path_from_ltex(b"XXXX" + payload[4:])
    with pytest.raises(DomainError):
        path_from_ltex(payload[:-8])


def test_local_times_integrate_to_total_mass():
    """sum over levels of ell^a da recovers zeta on a Brownian tree"""
    walk = sample_walk_excursion(2.0, 1_000_000, 1_000_000, stream(2024, 0, 1))
    tree = code_tree(walk.to_path())
    result = mass_consistency(tree, 0.05, 0.05, stable_v(2.0, 0.05))
    assert result["relative_error"] <= 0.25
