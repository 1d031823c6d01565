import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poincare_lab import shearer
from poincare_lab.bounds import SubsetFamily
from poincare_lab.shearer import FiniteProductSpace, GroupMeasure, JointMeasure

SINGLETONS2 = SubsetFamily.singletons(2)
HALF = np.array([0.5, 0.5])


def binary_space(n, p=0.5):
    return FiniteProductSpace(tuple(np.array([1 - p, p]) for _ in range(n)))


def test_entropy_equal_measures():
    space = binary_space(2)
    lhs, rhs, holds = shearer.entropy_shearer_check(JointMeasure(space, space.product()), SINGLETONS2)
    assert lhs == 0 and rhs == 0 and holds


def test_entropy_correlated_pair():
    space = binary_space(2)
    p = JointMeasure(space, np.array([[0.5, 0.0], [0.0, 0.5]]))
    lhs, rhs, holds = shearer.entropy_shearer_check(p, SINGLETONS2)
    assert lhs == pytest.approx(0, abs=1e-15)
    assert rhs == pytest.approx(math.log(2))
    assert holds


def test_projection_parity_and_coordinate():
    space = binary_space(2)
    parity = np.array([[0.0, 1.0], [1.0, 0.0]])
    lhs, rhs, holds = shearer.variance_projection_check(space, parity, SINGLETONS2)
    assert lhs == pytest.approx(0, abs=1e-15) and rhs == pytest.approx(0.25) and holds
    coord = np.array([[0.0, 0.0], [1.0, 1.0]])
    lhs, rhs, holds = shearer.variance_projection_check(space, coord, SINGLETONS2)
    assert lhs == pytest.approx(rhs) and holds


def test_sum_projection_identity_equality():
    space = FiniteProductSpace((HALF,) * 3, ((0.0, 1.0),) * 3)
    out = shearer.sum_projection_check(space, lambda u: u, SubsetFamily.all_of_size(3, 2))
    assert out["iid_lhs"] == pytest.approx(out["iid_rhs"])


def test_sum_projection_indicator_enumeration():
    space = FiniteProductSpace((HALF,) * 3, ((0.0, 1.0),) * 3)
    f = lambda u: (np.round(u) == 3).astype(float)
    out = shearer.sum_projection_check(space, f, SubsetFamily.all_of_size(3, 2))
    # Var(1{U3=3}) = 7/64; E[f | U2] = 1{U2=2}/2 so Var = (1/4)(1/4)(3/4) = 3/64
    assert out["var"] == pytest.approx(7 / 64)
    assert out["iid_lhs"] == pytest.approx(3 / 64)
    assert out["iid_lhs"] <= 2 / 3 * out["var"] and out["iid_holds"] and out["holds"]


def test_sum_projection_mapping_input():
    space = FiniteProductSpace((HALF,) * 2, ((0.0, 1.0),) * 2)
    with pytest.raises(ValueError):
        shearer.sum_projection_check(space, {0: 1.0, 1: 2.0}, SINGLETONS2)


def test_variance_drop_orthogonal_equality():
    space = binary_space(2)
    psi = {(1,): np.array([1.0, -1.0]), (2,): np.array([2.0, -2.0])}
    lhs, rhs, holds = shearer.variance_drop_check(space, psi, SINGLETONS2)
    assert lhs == pytest.approx(rhs) and holds


def test_variance_drop_aligned_equality():
    space = binary_space(2)
    psi_full = np.array([[1.0, -1.0], [-1.0, 1.0]])
    fam = SubsetFamily(2, ((1, 2),))
    lhs, rhs, _ = shearer.variance_drop_check(space, {(1, 2): psi_full}, fam)
    assert lhs == pytest.approx(rhs)


def test_variance_drop_warns_on_uncentered():
    space = binary_space(2)
    with pytest.warns(UserWarning):
        shearer.variance_drop_check(space, {(1,): np.array([1.0, 1.0]), (2,): np.zeros(2)},
                                    SINGLETONS2)


def test_linearization_matches_projection_sum():
    rng = np.random.default_rng(5)
    space = FiniteProductSpace((np.array([0.2, 0.3, 0.5]), np.array([0.6, 0.4]), HALF))
    f = rng.normal(size=space.alphabet_sizes)
    f /= np.abs(f).max()
    assert shearer.linearization_check(space, f, SubsetFamily.all_of_size(3, 2)).holds


def test_relative_entropy_support():
    with pytest.raises(shearer.SupportError):
        shearer.relative_entropy(np.array([0.5, 0.5]), np.array([1.0, 0.0]))


def test_two_point_constants():
    assert shearer.hypercube_poincare(GroupMeasure(1, HALF)) == pytest.approx(0.25, abs=1e-14)
    for p in (0.1, 0.3, 0.77):
        mu = GroupMeasure(1, np.array([1 - p, p]))
        assert shearer.hypercube_poincare(mu) == pytest.approx(p * (1 - p), rel=1e-12)
    assert shearer.hypercube_poincare(GroupMeasure(2, np.full(4, 0.25))) == pytest.approx(0.25)


def test_group_convolution_is_bernoulli_mixing():
    p, q = 0.2, 0.35
    conv = shearer.group_convolve([GroupMeasure(1, np.array([1 - p, p])),
                                   GroupMeasure(1, np.array([1 - q, q]))])
    r = p * (1 - q) + q * (1 - p)
    assert conv.weights[1] == pytest.approx(r)
    lhs, rhs, holds = shearer.group_subset_check(
        [GroupMeasure(1, np.array([1 - p, p])), GroupMeasure(1, np.array([1 - q, q]))], SINGLETONS2)
    assert lhs == pytest.approx(r * (1 - r)) and rhs == pytest.approx(p * (1 - p) + q * (1 - q))
    assert holds


def test_uniform_is_fixed_point():
    mus = [GroupMeasure(2, np.full(4, 0.25))] * 3
    lhs, rhs, holds = shearer.group_subset_check(mus, SubsetFamily.all_of_size(3, 2))
    assert lhs == pytest.approx(0.25) and rhs == pytest.approx(0.75 / 2) and holds


def test_walsh_hadamard_involution():
    a = np.arange(8.0)
    assert np.allclose(shearer.walsh_hadamard(shearer.walsh_hadamard(a)) / 8, a)


def test_instance_rng_reproducible():
    a = shearer.instance_rng(7, 123).random(3)
    b = shearer.instance_rng(7, 123).random(3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, shearer.instance_rng(7, 124).random(3))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_random_projection_instances(seed):
    rng = np.random.default_rng(seed)
    space = shearer.random_space(rng, 4, 3)
    fam = shearer.random_family(rng, space.n)
    f = rng.normal(size=space.alphabet_sizes)
    assert shearer.variance_projection_check(space, f, fam).holds
    w = rng.dirichlet(np.ones(math.prod(space.alphabet_sizes))).reshape(space.alphabet_sizes)
    assert shearer.entropy_shearer_check(JointMeasure(space, w), fam).holds
