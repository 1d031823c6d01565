import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poincare_lab.measures import GridMeasure, gaussian, laplace, uniform
from poincare_lab.spectral import (
    DisconnectedSupport,
    estimate_cp,
    extremal_gradient_variance,
    gradient_variance_lower_bound,
    muckenhoupt_bracket,
    rayleigh_lower_bound,
)


@pytest.fixture(scope="module")
def std_normal():
    return gaussian(0, 1, window_sigmas=8, n_grid=4097)


def test_gaussian_gap(std_normal):
    assert estimate_cp(std_normal).c_p == pytest.approx(1, abs=1e-3)


def test_uniform_gap():
    assert estimate_cp(uniform()).c_p == pytest.approx(1 / math.pi ** 2, rel=1e-3)


def test_laplace_gap():
    assert estimate_cp(laplace(1.0)).c_p == pytest.approx(4, rel=0.02)


@pytest.mark.parametrize("mu,c", [(gaussian(), 1.0), (uniform(), 1 / math.pi ** 2), (laplace(), 4.0)],
                         ids=["gaussian", "uniform", "laplace"])
def test_muckenhoupt_bracket_contains_constant(mu, c):
    assert muckenhoupt_bracket(mu).contains(c, rel_tol=0.02)


def test_rayleigh_quotients(std_normal):
    x = std_normal.nodes
    assert rayleigh_lower_bound(std_normal, x) == pytest.approx(1, abs=1e-4)
    assert rayleigh_lower_bound(std_normal, x ** 2) == pytest.approx(0.5, abs=1e-3)


def test_eigenfunction_attains_constant(std_normal):
    res = estimate_cp(std_normal, refine=False)
    assert rayleigh_lower_bound(std_normal, res.eigenfunction) == pytest.approx(res.c_p, rel=1e-8)


def test_gradient_variance_values(std_normal):
    assert extremal_gradient_variance(estimate_cp(std_normal), std_normal) <= 0.01
    assert gradient_variance_lower_bound(4, 2) == pytest.approx(1 / 3)


def test_disconnected_support_rejected():
    values = np.ones(200)
    values[80:120] = 0.0
    with pytest.raises(DisconnectedSupport):
        estimate_cp(GridMeasure(0, 1, values))


@settings(max_examples=10, deadline=None)
@given(v=st.floats(0.2, 5))
def test_gaussian_constant_is_its_variance(v):
    assert estimate_cp(gaussian(0, v), refine=False).c_p == pytest.approx(v, rel=1e-3)


@settings(max_examples=10, deadline=None)
@given(a=st.floats(-3, 3), w=st.floats(0.1, 5))
def test_uniform_scales_quadratically(a, w):
    assert estimate_cp(uniform(a, a + w), refine=False).c_p == pytest.approx(
        (w / math.pi) ** 2, rel=1e-3)
