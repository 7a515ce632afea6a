import os
import sys

import numpy as np
import pytest

ROOT = os.path.join(os.path.dirname(__file__), "..")

# Add src and app to path
sys.path.insert(0, os.path.join(ROOT, "src"))
sys.path.insert(0, os.path.join(ROOT, "app"))

from instances import gen_counterexamples, gen_gaussian_null  # noqa: E402
from numerics import orthonormal_basis  # noqa: E402


@pytest.fixture
def gaussian_4096x16():
    """The Gaussian certification fixture (seed 7)."""
    return gen_gaussian_null(4096, 16, 7)


@pytest.fixture
def e1_span_basis():
    """Orthonormal basis of a span containing e₁ (n = 16, d = 3)."""
    return orthonormal_basis(gen_counterexamples("rip-not-spread", 16, 3, 0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
