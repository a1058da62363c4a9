"""
Tests for branching mechanisms: evaluation, inverses, v and u, the gauge,
exponent estimates and the counterexample family.
"""

import math

import numpy as np
import pytest

from app.models.errors import DomainError
from app.models.mechanism import MechanismDescriptor
from app.tools.mechanism import (
    build_counterexample,
    build_mechanism,
    control_constant_profile,
    convexity_sandwich,
    describe,
    doubling_report,
    dyadic_log_scales,
    estimate_exponents,
    extinction_holds,
    gauge_log_g,
    j_bounds_check,
    levy_moment,
    make_gauge,
    phi_inverse,
    psi_family_eval,
    psi_inverse,
    roundtrip_errors,
    solve_u,
    solve_v,
    stable_control_constant,
    stable_gauge_log_g,
    stable_mechanism,
    stable_u,
    stable_v,
)


def _direct_psi(lam):
    r = np.array([1.0, 0.1])
    a = np.array([2.0, 5.0])
    x = np.outer(lam, r)
    psi = 0.5 * lam + 0.25 * lam ** 2 + (a * (np.expm1(-x) + x)).sum(axis=1)
    prime = 0.5 + 0.5 * lam + (a * r * -np.expm1(-x)).sum(axis=1)
    return psi, prime


def test_stable_family(brownian):
    family = psi_family_eval(brownian, [0.0, 1.0, 2.0])
    assert np.allclose(family.psi, [0.0, 1.0, 4.0])
    assert np.allclose(family.psi_prime, [0.0, 2.0, 4.0])
    assert np.allclose(family.psi_tilde, [0.0, 1.0, 2.0])
    assert not family.saturated.any()


def test_atom_family_matches_direct_sum(two_atoms):
    lam = np.array([0.3, 2.0, 50.0])
    family = psi_family_eval(two_atoms, lam)
    psi, prime = _direct_psi(lam)
    assert np.allclose(family.psi, psi, rtol=1e-10, atol=0.0)
    assert np.allclose(family.psi_prime, prime, rtol=1e-10, atol=0.0)
    assert family.psi_tilde[0] == pytest.approx(psi[0] / 0.3, rel=1e-10)
    assert psi_family_eval(two_atoms, 0.0).psi_tilde == pytest.approx(0.5)


def test_negative_lambda_rejected(brownian):
    with pytest.raises(DomainError):
        psi_family_eval(brownian, -1.0)


def test_build_mechanism_descriptors():
    stable = build_mechanism({"kind": "stable", "gamma": 1.5})
    assert stable.gamma == 1.5 and stable.label == "stable(1.5)"

    atoms = build_mechanism(MechanismDescriptor(kind="atoms", atoms=[[0.1, 5.0], [1.0, 2.0]], alpha=0.5))
    log_r, _ = atoms.atom_arrays()
    assert np.allclose(np.exp(log_r), [1.0, 0.1])

    counter = build_mechanism({"kind": "counterexample", "gamma": 1.5, "n_max": 12, "label": "c"})
    assert counter.label == "c" and counter.has_atoms


@pytest.mark.parametrize("descriptor", [
    {},
    {"kind": "stable", "gamma": 2.5},
    {"kind": "stable"},
    {"kind": "atoms", "atoms": [[1.0, -1.0]]},
    {"kind": "null"},
    {"kind": "stable", "gamma": 1.5, "unknown": 1},
    {"kind": "counterexample", "gamma": 1.5, "n_max": 3},
])
def test_build_mechanism_rejects(descriptor):
    with pytest.raises(DomainError):
        build_mechanism(descriptor)


def test_psi_inverse(stable15, two_atoms):
    assert psi_inverse(stable15, 8.0) == pytest.approx(4.0, rel=1e-12)
    assert psi_inverse(stable15, 0.0) == 0.0

    errors = roundtrip_errors(two_atoms, np.logspace(-3, 6, 25))
    assert np.max(errors["psi"]) <= 1e-8
    with pytest.raises(DomainError):
        psi_inverse(two_atoms, -1.0)


def test_phi_inverse(brownian):
    """phi(l) = 2 sqrt(l) for psi(l) = l^2"""
    assert phi_inverse(brownian, 4.0) == pytest.approx(4.0, rel=1e-10)
    assert phi_inverse(brownian, 0.0) == 0.0
    with pytest.raises(DomainError):
        phi_inverse(brownian, -1.0)


@pytest.mark.parametrize("gamma", [1.2, 1.5, 2.0])
@pytest.mark.parametrize("y", [1e-3, 1.0, 1e3, 1e9])
def test_psi_inverse_matches_closed_form(gamma, y):
    assert psi_inverse(stable_mechanism(gamma), y) == pytest.approx(y ** (1.0 / gamma), rel=1e-8)


@pytest.mark.parametrize("gamma", [1.2, 1.5, 2.0])
@pytest.mark.parametrize("a", [0.1, 1.0, 10.0])
def test_v_matches_closed_form(gamma, a):
    assert solve_v(stable_mechanism(gamma), a) == pytest.approx(stable_v(gamma, a), rel=1e-8)


@pytest.mark.parametrize("gamma", [1.2, 1.5, 2.0])
@pytest.mark.parametrize("t,lam", [(0.1, 1.0), (1.0, 5.0), (3.0, 0.2)])
def test_u_matches_closed_form(gamma, t, lam):
    assert solve_u(stable_mechanism(gamma), t, lam) == pytest.approx(stable_u(gamma, t, lam), rel=1e-8)


def test_v_is_decreasing(two_atoms):
    values = [solve_v(two_atoms, a) for a in (0.1, 0.5, 2.0)]
    assert values[0] > values[1] > values[2] > 0.0


def test_extinction():
    """psi(l) = l has no extinction; adding a Brownian part restores it"""
    linear = build_mechanism({"kind": "null", "alpha": 1.0})
    assert not extinction_holds(linear)
    with pytest.raises(DomainError):
        solve_v(linear, 1.0)
    assert extinction_holds(build_mechanism({"kind": "null", "alpha": 1.0, "beta": 1.0}))


def test_gauge_matches_closed_form(stable15):
    gauge = make_gauge(stable15)
    assert gauge.log_r0 == pytest.approx(-math.e)
    log_r = np.array([-5.0, -50.0, -1e6])
    assert np.allclose(gauge_log_g(gauge, log_r), stable_gauge_log_g(1.5, log_r), rtol=1e-12, atol=0.0)
    with pytest.raises(DomainError):
        gauge_log_g(gauge, -1.0)


def test_gauge_domain_follows_drift(two_atoms):
    """r0 = min(1/alpha, e^-e)"""
    assert make_gauge(two_atoms).log_r0 == pytest.approx(-math.e)
    drifted = build_mechanism({"kind": "null", "alpha": 100.0, "beta": 1.0})
    assert make_gauge(drifted).log_r0 == pytest.approx(-math.log(100.0))


def test_stable_doubling_ratio_near_limit(brownian):
    """g(2r)/g(r) tends to 2^{gamma/(gamma-1)} = 4"""
    report = doubling_report(make_gauge(brownian), dyadic_log_scales(-13.8, 50))
    assert 0.875 * 4.0 <= report.max_ratio <= 1.125 * 4.0
    assert len(report.log_ratios) == 50


def test_stable_exponents(stable15):
    report = estimate_exponents(stable15, n_points=2000)
    assert report.gamma_hat == pytest.approx(1.5, abs=1e-9)
    assert report.eta_hat == pytest.approx(1.5, abs=1e-9)
    assert abs(report.delta_hat - 1.5) <= 0.05
    assert report.local_slope_floor == pytest.approx(1.5, abs=1e-6)


def test_counterexample_exponents():
    """Long stretches of slope one pull the local slope down while gamma_hat stays near gamma"""
    mech = build_counterexample(1.5, 40)
    report = estimate_exponents(mech, n_points=4000)
    assert report.local_slope_floor <= 1.45
    assert abs(report.gamma_hat - 1.5) <= 0.1
    assert math.isfinite(levy_moment(mech))
    assert describe(mech)["atoms"] == 38


def test_brownian_counterexample_exponents():
    """The r_n = e^{-n^2} family: gamma_hat tends to 2 only like 2 - log n / n"""
    mech = build_counterexample(2.0, 25)
    report = estimate_exponents(mech, n_points=4000)
    assert report.gamma_hat >= 1.8
    assert report.local_slope_floor <= 1.45
    assert math.isfinite(levy_moment(mech))


def test_counterexample_doubling_fails():
    gauge = make_gauge(build_counterexample(1.5, 40))
    log_r = np.linspace(-70.0, -5.0, 4000)
    log_r = log_r[log_r + math.log(2.0) < gauge.log_r0]
    assert doubling_report(gauge, log_r).max_ratio > 10.0


@pytest.mark.parametrize("gamma,n_max", [(1.5, 40), (2.0, 25)])
def test_counterexample_convexity_sandwich(gamma, n_max):
    lam = np.exp(np.linspace(math.log(1e-3), math.log(1e6), 60))
    assert sum(convexity_sandwich(build_counterexample(gamma, n_max), lam).values()) == 0


def test_convexity_and_j_bounds(stable15, two_atoms):
    lam = np.logspace(-3, 6, 40)
    assert sum(convexity_sandwich(stable15, lam).values()) == 0
    assert sum(convexity_sandwich(two_atoms, lam).values()) == 0

    drift_free = build_mechanism({"kind": "atoms", "atoms": [[1.0, 2.0], [0.1, 5.0]]})
    bounds = j_bounds_check(drift_free, lam)
    assert bounds["lower_violations"] == 0 and bounds["upper_violations"] == 0
    with pytest.raises(DomainError):
        j_bounds_check(two_atoms, lam)


def test_control_constant(brownian):
    """v(r) / (r phi^-1(1/r)) = 4 for psi(l) = l^2"""
    profile = control_constant_profile(brownian, np.array([1e-4, 1e-2]))
    assert stable_control_constant(2.0) == pytest.approx(4.0)
    assert np.allclose(profile, 4.0, rtol=1e-6)


def test_public_names_are_exported():
    from app.tools import mechanism as module

    exported = set(module.__all__)
    assert {"convexity_sandwich", "j_bounds_check", "levy_moment", "control_constant_profile"} <= exported
    assert all(hasattr(module, name) for name in exported)
