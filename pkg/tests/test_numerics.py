"""
Tests for the numerical utilities: compensated sums, log-domain helpers,
quadrature, root finding, random streams and config overrides.
"""

import math

import numpy as np
import pytest

from app.models.errors import ConvergenceError, QuadratureError
from app.utils.data_transform import apply_override, format_label, parse_override, to_builtin
from app.utils.file_ops import content_hash, describe_file, sanitize_filename, write_bytes
from app.utils.numerics import (
    adaptive_quad,
    bracketed_root,
    expand_bracket,
    integrate_log_tail,
    log_excess_exponential,
    log_sum_exp,
    neumaier_sum,
    stable_mean,
)
from app.utils.rng import chunk_bounds, stream


def test_neumaier_sum_recovers_cancelled_term():
    assert neumaier_sum(np.array([1e16, 1.0, -1e16])) == 1.0


def test_log_sum_exp():
    assert log_sum_exp(np.array([0.0, 0.0])) == pytest.approx(math.log(2.0))
    assert log_sum_exp(np.array([1000.0, 1000.0])) == pytest.approx(1000.0 + math.log(2.0))
    assert log_sum_exp(np.array([-np.inf, -np.inf])) == -np.inf


def test_log_excess_exponential_across_branches():
    """Series, direct and large-x branches all match e^{-x} - 1 + x"""
    x = np.array([1e-3, 5e-3, 0.5, 3.0, 25.0])
    expected = np.log(np.expm1(-x) + x)
    assert np.allclose(log_excess_exponential(np.log(x)), expected, rtol=1e-8, atol=0.0)

    assert log_excess_exponential(np.array([40.0]))[0] == pytest.approx(40.0, rel=1e-12)


def test_stable_mean():
    mean, se = stable_mean(np.array([1.0, 2.0, 3.0]))
    assert mean == pytest.approx(2.0)
    assert se == pytest.approx(math.sqrt(1.0 / 3.0))

    mean, se = stable_mean(np.array([]))
    assert math.isnan(mean) and math.isnan(se)


def test_adaptive_quad():
    value, err = adaptive_quad(np.sin, 0.0, math.pi)
    assert value == pytest.approx(2.0, rel=1e-10)
    assert err < 1e-8

    value, _ = adaptive_quad(np.sin, math.pi, 0.0)
    assert value == pytest.approx(-2.0, rel=1e-10)
    assert adaptive_quad(np.sin, 1.0, 1.0) == (0.0, 0.0)


def test_adaptive_quad_budget_keeps_partial_value():
    with pytest.raises(QuadratureError) as info:
        adaptive_quad(lambda x: np.where(x < 0.3, 0.0, 1.0), 0.0, 1.0, max_intervals=5)
    assert "partial_value" in info.value.details


def test_integrate_log_tail_geometric_and_divergent():
    """int_0^inf e^{-t} dt closes; a flat integrand is flagged divergent"""
    closed = integrate_log_tail(lambda t: -t, 0.0)
    assert closed.finite
    assert closed.value == pytest.approx(1.0, rel=1e-9)

    flat = integrate_log_tail(lambda t: np.zeros_like(t), 0.0)
    assert not flat.finite


def test_root_finding():
    assert bracketed_root(lambda x: x * x - 2.0, 0.0, 2.0) == pytest.approx(math.sqrt(2.0), rel=1e-12)

    with pytest.raises(ConvergenceError):
        bracketed_root(lambda x: x * x + 1.0, 0.0, 1.0)

    lo, hi, f_lo, f_hi = expand_bracket(lambda x: x - 10.0, 0.0, 1.0)
    assert lo <= 10.0 <= hi
    assert f_lo * f_hi <= 0.0


def test_streams_are_keyed():
    """Same key, same draws; any change of key, different draws"""
    a = stream(7, 3, 1).random(5)
    b = stream(7, 3, 1).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, stream(7, 3, 2).random(5))
    assert not np.array_equal(a, stream(7, 4, 1).random(5))
    assert not np.array_equal(a, stream(8, 3, 1).random(5))

    with pytest.raises(ValueError):
        stream(-1, 0)


def test_chunk_bounds():
    chunks = chunk_bounds(10, 4)
    assert [list(c) for c in chunks] == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9]]
    assert chunk_bounds(0, 4) == []
    with pytest.raises(ValueError):
        chunk_bounds(10, 0)


def test_parse_and_apply_override():
    assert parse_override("scales.walk_scale=4096") == (("scales", "walk_scale"), 4096)
    assert parse_override("tolerances.rtol=1e-6") == (("tolerances", "rtol"), 1e-6)
    assert parse_override("seeds=[1, 2]") == (("seeds",), [1, 2])
    assert parse_override("output.write_paths=false") == (("output", "write_paths"), False)
    with pytest.raises(ValueError):
        parse_override("no-equals-sign")

    document = {"scales": {"n_trees": 3}}
    apply_override(document, ("scales", "walk_scale"), 64)
    apply_override(document, ("output", "directory"), "out")
    assert document == {"scales": {"n_trees": 3, "walk_scale": 64}, "output": {"directory": "out"}}


def test_to_builtin():
    value = {"a": np.float64(1.5), "b": np.array([1, 2]), "c": (float("inf"), float("nan"))}
    assert to_builtin(value) == {"a": 1.5, "b": [1, 2], "c": ["inf", "nan"]}
    assert format_label("  stable(1.5)\n ") == "stable(1.5)"
    assert format_label("") == "unnamed mechanism"


def test_file_helpers(tmp_path):
    assert sanitize_filename("mech-report_stable(1.5)") == "mech-report_stable_1.5"
    path = write_bytes(str(tmp_path / "sub" / "a.bin"), b"payload")
    entry = describe_file(path, str(tmp_path))
    assert entry == {"path": "sub/a.bin", "size": 7, "xxh3_64": content_hash(b"payload")}
