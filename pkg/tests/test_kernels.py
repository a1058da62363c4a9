"""
Tests for the CSBP kernels against the Brownian closed forms
kappa_a(l, 0) = sqrt(l) tanh(a sqrt(l)) and L_r(l) = sech^2(r sqrt(l)).
"""

import math

import pytest

from app.models.errors import DomainError
from app.tools.kernels import (
    brownian_kappa,
    brownian_laplace,
    claim_one_check,
    density_bound_check,
    integral_identity_residual,
    kappa_fixed_point_errors,
    kappa_solve,
    laplace_grid,
    mean_local_time,
    minus_log_monotone,
    random_kappa_pairs,
    script_L,
)
from app.tools.mechanism import psi_inverse, stable_mechanism
from app.tools.samplers import STREAM_TAGS
from app.utils.rng import stream


@pytest.mark.parametrize("a,lam", [(0.1, 0.5), (1.0, 2.0), (3.0, 50.0)])
def test_kappa_matches_brownian_oracle(brownian, a, lam):
    solution = kappa_solve(brownian, a, lam, 0.0)
    assert solution.value == pytest.approx(brownian_kappa(a, lam), rel=1e-8)
    assert solution.equilibrium == pytest.approx(math.sqrt(lam), rel=1e-12)


@pytest.mark.parametrize("gamma", [1.2, 1.5, 2.0])
def test_kappa_equilibrium_is_a_fixed_point(gamma):
    pairs = random_kappa_pairs(stream(2024, 0, STREAM_TAGS["kappa"]), 20)
    assert len(pairs) == 20
    assert all(1e-2 <= a <= 10.0 and 1e-2 <= lam <= 1e3 for a, lam in pairs)
    errors = kappa_fixed_point_errors(stable_mechanism(gamma), pairs)
    assert errors.max() <= 1e-8


def test_kappa_from_above_decreases_to_equilibrium(stable15):
    star = float(psi_inverse(stable15, 2.0))
    near = kappa_solve(stable15, 0.5, 2.0, 3.0 * star)
    far = kappa_solve(stable15, 5.0, 2.0, 3.0 * star)
    assert 3.0 * star > near.value > far.value >= star


def test_kappa_edge_cases(brownian):
    assert kappa_solve(brownian, 0.0, 2.0, 0.7).value == 0.7
    with pytest.raises(DomainError):
        kappa_solve(brownian, -1.0, 2.0, 0.0)
    with pytest.raises(DomainError):
        kappa_solve(brownian, 1.0, float("nan"), 0.0)


@pytest.mark.parametrize("r", [0.01, 0.1, 1.0])
@pytest.mark.parametrize("lam", [0.5, 1.0, 10.0])
def test_laplace_routes_match_oracle(brownian, r, lam):
    result = script_L(brownian, r, lam)
    expected = brownian_laplace(r, lam)
    assert result.value == pytest.approx(expected, rel=1e-8)
    assert result.integral_value == pytest.approx(expected, rel=1e-8)
    assert 0.0 < result.value <= 1.0


@pytest.mark.parametrize("gamma", [1.2, 1.5])
@pytest.mark.parametrize("r", [0.01, 0.1, 1.0])
@pytest.mark.parametrize("lam", [0.5, 1.0, 10.0])
def test_laplace_routes_agree(gamma, r, lam):
    mech = stable_mechanism(gamma)
    result = script_L(mech, r, lam)
    assert result.discrepancy <= 1e-6
    assert result.agree
    assert integral_identity_residual(mech, r, lam) <= 1e-6


def test_laplace_rejects_bad_arguments(brownian):
    with pytest.raises(DomainError):
        script_L(brownian, 0.0, 1.0)
    with pytest.raises(DomainError):
        script_L(brownian, 1.0, -1.0)


def test_minus_log_is_monotone(stable15):
    radii, lams = [0.01, 0.1, 1.0], [0.5, 1.0, 10.0]
    grid = laplace_grid(stable15, radii, lams, cross_check=False)
    counts = minus_log_monotone(grid, len(radii), len(lams))
    assert counts == {"lambda_decreases": 0, "radius_decreases": 0}


@pytest.mark.parametrize("gamma", [1.5, 2.0])
@pytest.mark.parametrize("r", [1e-4, 1e-5, 1e-6, 1e-7, 1e-8])
def test_density_bound_small_radii(gamma, r):
    result = density_bound_check(stable_mechanism(gamma), r)
    assert result.precondition_ok
    assert result.passed is True
    assert result.lhs_log <= result.rhs_log


def test_density_bound_outside_small_radii(brownian):
    large = density_bound_check(brownian, 0.1)
    assert not large.precondition_ok
    assert large.passed is None


def test_claim_one(brownian):
    pairs = [(0.1, 1.0), (1.0, 1.0), (0.5, 4.0), (1.0, 10.0)]
    result = claim_one_check(brownian, pairs)
    assert result["pairs"] == 4
    assert result["hypothesis_held"] >= 1
    assert result["violations"] == 0


def test_mean_local_time(two_atoms, brownian):
    assert mean_local_time(brownian, 3.0) == 1.0
    assert mean_local_time(two_atoms, 2.0) == pytest.approx(math.exp(-1.0))
    with pytest.raises(DomainError):
        mean_local_time(brownian, -1.0)
