"""
Shared fixtures for the lab test suite.
"""

import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from app.tools.mechanism import atom_mechanism, stable_mechanism  # noqa: E402
from app.tools.realtree import code_tree, make_path  # noqa: E402
from app.utils.rng import stream  # noqa: E402


@pytest.fixture
def brownian():
    """psi(l) = l^2"""
    return stable_mechanism(2.0)


@pytest.fixture
def stable15():
    return stable_mechanism(1.5)


@pytest.fixture
def two_atoms():
    """alpha = 0.5, beta = 0.25, atoms 2 delta_1 + 5 delta_0.1"""
    return atom_mechanism(np.log([1.0, 0.1]), np.log([2.0, 5.0]), alpha=0.5, beta=0.25, label="two-atoms")


@pytest.fixture
def random_tree():
    """Coded tree of a rough positive path on 2001 samples"""
    rng = stream(11, 0)
    inner = np.abs(np.cumsum(rng.standard_normal(1999))) * 0.05 + 0.01
    return code_tree(make_path(np.concatenate([[0.0], inner, [0.0]]), 0.001))
