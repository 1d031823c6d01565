import math

import numpy as np
import pytest

from poincare_lab.convolve import (
    clt_trace,
    convolve_pair,
    gaussian_smooth,
    regularized_sum,
    standardized_atoms,
    standardized_sum,
)
from poincare_lab.measures import (
    DiscreteAtoms,
    GaussianMixtureSpec,
    gaussian,
    materialize,
    standardize,
    sup_distance,
    uniform,
)
from poincare_lab.spectral import estimate_cp
from poincare_lab.transport import matched_gaussian, w2_quantile

BERNOULLI = DiscreteAtoms(((-0.5, 0.5), (0.5, 0.5)))


def test_gaussian_closure():
    conv = convolve_pair(gaussian(), gaussian())
    assert conv.variance() == pytest.approx(2, abs=1e-4)
    assert estimate_cp(conv).c_p == pytest.approx(2, abs=1e-3)


def test_triangular_variance():
    assert convolve_pair(uniform(), uniform()).variance() == pytest.approx(1 / 6, abs=1e-4)


def test_approximate_identity():
    mu = gaussian(0, 1)
    assert sup_distance(gaussian_smooth(mu, 1e-6), mu) < 1e-3


def test_smoothed_atoms_two_bumps():
    nu = gaussian_smooth(materialize(BERNOULLI, delta2=0.01), 0.24)
    assert nu.variance() == pytest.approx(0.5, abs=1e-4)
    exact = materialize(GaussianMixtureSpec(((0.5, -0.5, 0.25), (0.5, 0.5, 0.25))), n_grid=8192)
    assert sup_distance(nu, exact) < 1e-4


def test_heavy_smoothing_is_near_gaussian():
    mu = uniform()
    nu = gaussian_smooth(mu, 4 * mu.variance())
    assert w2_quantile(nu, matched_gaussian(nu)) < 0.01


def test_semigroup():
    mu = uniform()
    twice = gaussian_smooth(gaussian_smooth(mu, 0.05), 0.05)
    once = gaussian_smooth(mu, 0.1)
    assert sup_distance(twice, once) < 1e-6


def test_gaussian_fixed_point():
    assert sup_distance(standardized_sum(gaussian(), 7), gaussian()) < 1e-3


def test_standardized_sum_moments():
    base = uniform(0, 1)
    nu = standardized_sum(base, 5)
    assert abs(nu.mean()) < 1e-6
    assert nu.variance() == pytest.approx(base.variance(), rel=1e-3)


def test_triangular_constant_decreases():
    base = standardize(uniform())
    c1 = estimate_cp(standardized_sum(base, 1), refine=False).c_p
    c2 = estimate_cp(standardized_sum(base, 2), refine=False).c_p
    assert c2 < c1


def test_binomial_mixture():
    delta2 = 0.1
    base = materialize(BERNOULLI, delta2=delta2)
    nu = standardized_sum(base, 4)
    # the exact law: Binomial(4, 1/2) atoms shifted and scaled, each a Gaussian bump
    comps = tuple((math.comb(4, k) / 16, (k - 2) / 2, delta2) for k in range(5))
    exact = materialize(GaussianMixtureSpec(comps), n_grid=8192)
    assert sup_distance(nu, exact) < 1e-3
    assert sup_distance(nu, materialize(standardized_atoms(BERNOULLI, 4), delta2=delta2)) < 1e-3


def test_example1_trace_monotone():
    c = clt_trace(standardize(uniform()), [1, 2, 4, 8]).c_p_column()
    assert np.all(np.diff(c) <= 1e-6)


def test_example2_trace():
    trace = clt_trace(BERNOULLI, [1, 2, 4, 8], delta2=0.5)
    c = trace.c_p_column()
    assert np.all(c <= c[0] + 1e-3)
    assert np.all(c <= 0.5 * math.exp(8))
    rows = trace.rows()
    assert list(rows[0]) == ["n", "c_p", "sigma2", "w2_sq", "bound_example2", "bound_smoothing"]


def test_gaussian_trace_constant():
    c = clt_trace(gaussian(0, 1.5), [1, 2, 4, 8]).c_p_column()
    assert np.allclose(c, 1.5, rtol=1e-3)


def test_regularized_sum_rejects_bare_atoms():
    with pytest.raises(ValueError):
        regularized_sum(BERNOULLI, 2, 0.0)


def test_trace_validates_order():
    with pytest.raises(ValueError):
        clt_trace(uniform(), [4, 2])
