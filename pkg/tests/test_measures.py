import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poincare_lab.measures import (
    DiscreteAtoms,
    GaussianMixtureSpec,
    GridMeasure,
    MeasureError,
    affine_pushforward,
    from_config,
    gaussian,
    materialize,
    standardize,
    summarize,
    sup_distance,
    uniform,
)


def test_single_gaussian_moments():
    mu = materialize(GaussianMixtureSpec(((1.0, 0.0, 1.0),)), window_sigmas=8, n_grid=4097)
    assert abs(mu.mean()) < 1e-6
    assert abs(mu.variance() - 1) < 1e-4


def test_smoothed_atoms_variance_adds():
    atoms = DiscreteAtoms(((-0.5, 0.5), (0.5, 0.5)))
    mu = materialize(atoms, delta2=0.25)
    assert abs(mu.mean()) < 1e-8
    assert mu.variance() == pytest.approx(0.5, abs=1e-4)


def test_mixture_variance_within_plus_between():
    mu = materialize(GaussianMixtureSpec(((0.5, -1, 1), (0.5, 1, 1))))
    assert mu.variance() == pytest.approx(2.0, abs=1e-4)


def test_fisher_information():
    s = summarize(gaussian())
    assert s.variance == pytest.approx(1, abs=1e-4)
    assert s.fisher_information == pytest.approx(1, abs=1e-2)
    assert summarize(gaussian(0, 4)).fisher_information == pytest.approx(0.25, abs=1e-2)


def test_uniform_fisher_is_infinite():
    s = summarize(uniform())
    assert s.variance == pytest.approx(1 / 12, abs=1e-4)
    assert math.isinf(s.fisher_information)


def test_pushforward_identity_and_scaling():
    mu = gaussian()
    same = affine_pushforward(mu, 1.0, 0.0)
    assert np.allclose(same.values, mu.values, atol=1e-10, rtol=0)
    assert affine_pushforward(mu, 2.0, 0.0).variance() == pytest.approx(4, abs=1e-3)


def test_pushforward_reflection_of_uniform():
    mu = uniform()
    assert sup_distance(affine_pushforward(mu, -1.0, 1.0), mu) < 1e-6


@pytest.mark.parametrize("mu", [gaussian(3, 4), uniform()], ids=["normal", "uniform"])
def test_standardize(mu):
    z = standardize(mu)
    assert abs(z.mean()) < 1e-8
    assert z.variance() == pytest.approx(1, abs=1e-8)


def test_standardize_idempotent():
    z = standardize(gaussian(3, 4))
    assert sup_distance(standardize(z), z) < 1e-8


def test_rejects_bad_inputs():
    with pytest.raises(MeasureError):
        GridMeasure(0.0, 1.0, -np.ones(64))
    with pytest.raises(MeasureError):
        GridMeasure(0.0, 1.0, np.array([1.0, np.nan] * 32))
    with pytest.raises(MeasureError):
        materialize(DiscreteAtoms(((0.0, 1.0),)))


def test_config_tagged_union():
    assert isinstance(from_config({"atoms": [[0, 0.5], [1, 0.5]]}), DiscreteAtoms)
    assert from_config({"uniform": [0, 2]}).variance() == pytest.approx(1 / 3, abs=1e-4)
    assert from_config({"laplace": {"scale": 1}}).variance() == pytest.approx(2, rel=1e-3)
    assert from_config({"exponential": {"rate": 2}}).mean() == pytest.approx(0.5, rel=1e-3)
    with pytest.raises(MeasureError):
        from_config({"cauchy": {}})


@settings(max_examples=25, deadline=None)
@given(m=st.floats(-5, 5), v=st.floats(0.1, 10))
def test_gaussian_moments_property(m, v):
    mu = gaussian(m, v)
    assert mu.mean() == pytest.approx(m, abs=1e-6 * max(1, math.sqrt(v)))
    assert mu.variance() == pytest.approx(v, rel=1e-4)
    assert mu.mass() == pytest.approx(1, abs=1e-12)
