"""
Tests for the random generators: offspring laws, walk excursions and their
heights, subordinators, the decorated spine and grid liminfs.
"""

import math

import numpy as np
import pytest

from app.models.errors import DomainError
from app.tools.mechanism import build_mechanism, gauge_log_g, make_gauge
from app.tools.samplers import (
    OffspringLaw,
    brownian_max_ks,
    brute_force_heights,
    discrete_height,
    laplace_estimate,
    liminf_ratio,
    positive_stable,
    sample_spine,
    sample_subordinator,
    sample_walk_excursion,
    spine_laplace,
    spine_mass_chunk,
    subordinator_increments,
    subordinator_laplace,
    walk_normalization,
)
from app.utils.rng import stream


def test_offspring_law_pmf():
    law = OffspringLaw(1.5)
    assert np.allclose(law.pmf([0, 1, 2]), [1.0 / 1.5, 0.0, 0.25])
    assert law.mean() == pytest.approx(1.0, abs=1e-3)
    assert np.count_nonzero(law.sample(200_000, stream(1, 0)) == 1) == 0

    geometric = OffspringLaw(2.0)
    assert np.allclose(geometric.pmf([0, 1, 2]), [0.5, 0.25, 0.125])
    draws = geometric.sample(100_000, stream(1, 1))
    assert abs(draws.mean() - 1.0) <= 4.0 * math.sqrt(2.0 / draws.size)

    with pytest.raises(DomainError):
        OffspringLaw(1.0)


def test_discrete_height_examples():
    assert discrete_height([1, 1, -1, -1, -1]).tolist() == [0, 1, 2, 2, 1, 0]
    assert discrete_height([1, -1, -1]).tolist() == [0, 1, 1, 0]
    assert discrete_height([-1]).tolist() == [0, 0]
    with pytest.raises(DomainError):
        discrete_height([1, -2])


@pytest.mark.parametrize("gamma", [1.3, 2.0])
def test_discrete_height_matches_brute_force(gamma):
    steps = OffspringLaw(gamma).sample(400, stream(9, 0)) - 1
    assert np.array_equal(discrete_height(steps), brute_force_heights(steps))


def test_walk_normalization():
    b_p, dt, dh = walk_normalization(2.0, 10_000)
    assert (b_p, dt, dh) == pytest.approx((100.0, 1e-4, 0.01))
    with pytest.raises(DomainError):
        walk_normalization(1.5, 0)


def test_walk_excursion_is_reproducible():
    first = sample_walk_excursion(1.5, 1000, 200, stream(1, 0, 1))
    second = sample_walk_excursion(1.5, 1000, 200, stream(1, 0, 1))
    assert np.array_equal(first.steps, second.steps)
    assert 200 <= first.length <= 1600
    assert first.heights[0] == 0 and first.heights[-1] == 0
    assert first.steps.sum() == -1

    path = first.to_path()
    assert path.n == first.length + 1
    assert path.dt == pytest.approx(1e-3)

    with pytest.raises(DomainError):
        sample_walk_excursion(1.5, 1000, 0, stream(1, 0, 1))


def test_walk_maxima_follow_brownian_excursion():
    rng = stream(2, 0, 1)
    walks = [sample_walk_excursion(2.0, 2000, 2000, rng) for _ in range(200)]
    assert brownian_max_ks(walks).pvalue > 1e-3


def test_positive_stable_laplace():
    z = positive_stable(0.5, 100_000, stream(3, 0))
    assert np.all(z > 0.0)
    assert laplace_estimate(z, 1.0, 1.0, math.exp(-1.0), sigmas=4.0).passed
    with pytest.raises(DomainError):
        positive_stable(1.0, 10, stream(3, 0))


@pytest.mark.parametrize("descriptor,samples", [
    ({"kind": "stable", "gamma": 1.5}, 20_000),
    ({"kind": "null", "alpha": 1.0, "beta": 1.0}, 20_000),
    ({"kind": "atoms", "atoms": [[1.0, 2.0]]}, 3000),
])
@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_subordinator_laplace(descriptor, samples, lam):
    mech = build_mechanism(descriptor)
    estimate = subordinator_laplace(mech, 0.5, lam, samples, stream(4, 0, 2), sigmas=4.0)
    assert estimate.passed, estimate


def test_subordinator_rejects(two_atoms, stable15):
    with pytest.raises(DomainError):
        subordinator_increments(two_atoms, 0.5, 10, stream(4, 0))
    with pytest.raises(DomainError):
        subordinator_increments(stable15, -0.5, 10, stream(4, 0))
    assert np.array_equal(subordinator_increments(stable15, 0.0, 3, stream(4, 0)), np.zeros(3))


def test_subordinator_path(stable15):
    path = sample_subordinator(stable15, 6, stream(5, 0, 2))
    assert path.r.size == 8 and path.r[0] == 0.0 and path.r[-1] == 1.0
    assert path.values[0] == 0.0
    assert np.all(np.diff(path.values) >= 0.0)


@pytest.mark.parametrize("gamma,scale,r_max", [(1.5, 4096, 0.5), (2.0, 10_000, 1.0)])
def test_spine_is_dominated_and_monotone(gamma, scale, r_max):
    mech = build_mechanism({"kind": "stable", "gamma": gamma})
    spine = sample_spine(mech, r_max, stream(6, 0, 3), scale)
    assert spine.domination_violations() == 0
    assert spine.is_monotone()
    assert np.all(np.diff(spine.lifetime_sum) >= 0.0)
    assert spine.jump_positions[0] == 0.0


def test_spine_rejects_non_stable(two_atoms):
    with pytest.raises(DomainError):
        sample_spine(two_atoms, 1.0, stream(6, 0), 1000)


def test_spine_chunks_are_reproducible(brownian):
    a = spine_mass_chunk(brownian, [0.1, 0.5], 10_000, 7, 3, 50)
    b = spine_mass_chunk(brownian, [0.1, 0.5], 10_000, 7, 3, 50)
    assert np.array_equal(a, b)
    assert np.all(a[:, 1] >= a[:, 0])


def test_spine_laplace_matches_kernel(brownian):
    estimates = spine_laplace(brownian, [0.1, 0.5], [1.0, 5.0], 40_000, 2000, seed=8, sigmas=4.0)
    assert len(estimates) == 4
    assert all(e.passed for e in estimates), [e.z_score for e in estimates]


def test_liminf_ratio(brownian):
    gauge = make_gauge(brownian)
    log_r = np.linspace(-12.0, -5.0, 30)
    values = 2.0 * np.exp(gauge_log_g(gauge, log_r))
    result = liminf_ratio(values, log_r, gauge, (math.exp(-11.0), math.exp(-6.0)))
    assert result.min_ratio == pytest.approx(2.0, rel=1e-9)
    assert math.exp(-11.0) <= result.argmin_r <= math.exp(-6.0)

    with pytest.raises(DomainError):
        liminf_ratio(values[::-1], log_r, gauge, (math.exp(-11.0), math.exp(-6.0)))
    with pytest.raises(DomainError):
        liminf_ratio(values, log_r, gauge, (math.exp(-3.0), 0.9))
