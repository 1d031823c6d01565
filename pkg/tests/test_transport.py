import math

import pytest

from poincare_lab.measures import gaussian, laplace, uniform
from poincare_lab.spectral import estimate_cp
from poincare_lab.transport import gap_lower_bound_check, midpoint_levels, w2_quantile


def test_identity_distance():
    mu = uniform()
    assert w2_quantile(mu, mu) < 1e-8


@pytest.mark.parametrize("m", [0.5, -2.0, 3.0])
def test_translation(m):
    assert w2_quantile(gaussian(), gaussian(m, 1)) == pytest.approx(abs(m), abs=1e-4)


def test_scale_difference():
    assert w2_quantile(gaussian(), gaussian(0, 4)) == pytest.approx(1, abs=1e-3)


def test_node_floor():
    with pytest.raises(ValueError):
        w2_quantile(gaussian(), gaussian(), m_nodes=100)


def test_levels_are_midpoints():
    lv = midpoint_levels(4)
    assert list(lv) == [0.125, 0.375, 0.625, 0.875]


def test_gaussian_equality_case():
    gap, w2_sq, holds = gap_lower_bound_check(gaussian())
    assert abs(gap) < 1e-6 and w2_sq < 1e-6 and holds


def test_uniform_gap():
    gap, w2_sq, holds = gap_lower_bound_check(uniform())
    assert gap == pytest.approx(1 / math.pi ** 2 - 1 / 12, abs=1e-4)
    assert holds and w2_sq <= gap


def test_laplace_gap():
    mu = laplace()
    gap, w2_sq, holds = gap_lower_bound_check(mu, c_p=estimate_cp(mu, refine=False).c_p)
    assert gap == pytest.approx(2, rel=0.05)
    assert holds
