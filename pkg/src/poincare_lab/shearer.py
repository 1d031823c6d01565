"""Exact checks of Shearer-type inequalities on finite product spaces.

All expectations are finite sums, so verdicts are exact up to floating point.
Subset families use 1-based indices; tensor axes are 0-based.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import reduce
from typing import Callable, Mapping, Sequence, Union

import numpy as np
from scipy.linalg import eigh
from scipy.special import xlogy

from .bounds import SubsetFamily

SLACK = 1e-12
MAX_CELLS = 10 ** 6


class SupportError(ValueError):
    """A measure charges a cell the reference measure does not."""


@dataclass(frozen=True)
class CheckResult:
    lhs: float
    rhs: float
    holds: bool

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.holds))


def _verdict(lhs: float, rhs: float, slack: float = SLACK) -> CheckResult:
    return CheckResult(float(lhs), float(rhs), bool(lhs <= rhs + slack))


@dataclass(frozen=True, eq=False)
class FiniteProductSpace:
    """Independent factors with finite alphabets; ``values`` embed them in the reals."""

    factor_weights: tuple
    values: tuple = None

    def __post_init__(self):
        weights = tuple(np.asarray(w, dtype=float) for w in self.factor_weights)
        for w in weights:
            if w.ndim != 1 or w.size < 2:
                raise ValueError("each factor needs an alphabet of size at least 2")
            if np.any(w < 0) or abs(w.sum() - 1) > 1e-14:
                raise ValueError("factor weights must be probability vectors")
        if math.prod(w.size for w in weights) > MAX_CELLS:
            raise ValueError("product space too large for exact summation")
        object.__setattr__(self, "factor_weights", weights)
        if self.values is None:
            vals = tuple(np.arange(w.size, dtype=float) for w in weights)
        else:
            vals = tuple(np.asarray(v, dtype=float) for v in self.values)
            if [v.shape for v in vals] != [w.shape for w in weights]:
                raise ValueError("alphabet values must match factor sizes")
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return len(self.factor_weights)

    @property
    def alphabet_sizes(self) -> tuple:
        return tuple(w.size for w in self.factor_weights)

    def product(self, axes: Sequence[int] | None = None) -> np.ndarray:
        """Product weights over the given axes (all by default)."""
        axes = range(self.n) if axes is None else axes
        ws = [self.factor_weights[i] for i in axes]
        return reduce(np.multiply.outer, ws) if ws else np.array(1.0)


@dataclass(frozen=True, eq=False)
class JointMeasure:
    space: FiniteProductSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != self.space.alphabet_sizes:
            raise ValueError("joint weights must have the product alphabet shape")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("joint weights must be a probability tensor")
        if np.any((w > 0) & (self.space.product() == 0)):
            raise SupportError("joint measure charges a null cell of the product")
        object.__setattr__(self, "weights", w)


def _axes(subset: Sequence[int]) -> tuple:
    return tuple(i - 1 for i in subset)


def _others(n: int, keep: tuple) -> tuple:
    return tuple(i for i in range(n) if i not in keep)


def _marginal(t: np.ndarray, keep: tuple) -> np.ndarray:
    return t.sum(axis=_others(t.ndim, keep))


def relative_entropy(p: np.ndarray, q: np.ndarray) -> float:
    """``D(p || q)`` in nats, with ``0 log 0 = 0``."""
    if np.any((p > 0) & (q == 0)):
        raise SupportError("p is not absolutely continuous with respect to q")
    ratio = np.divide(p, q, out=np.ones_like(p), where=q > 0)
    return float(np.sum(xlogy(p, ratio)))


def _check_family(space_n: int, family: SubsetFamily):
    if family.n != space_n:
        raise ValueError("family and space disagree on n")


def entropy_shearer_check(p: JointMeasure, family: SubsetFamily) -> CheckResult:
    """``sum_S D(P_S || Q_S) <= r D(P || Q)`` with ``Q`` the product reference."""
    space = p.space
    _check_family(space.n, family)
    lhs = 0.0
    for s in family.subsets:
        keep = _axes(s)
        lhs += relative_entropy(_marginal(p.weights, keep), space.product(keep))
    rhs = family.r * relative_entropy(p.weights, space.product())
    return _verdict(lhs, rhs)


def conditional_expectation(space: FiniteProductSpace, f: np.ndarray, keep: tuple) -> np.ndarray:
    """``E[f(X) | X_keep]`` under the product measure, as a tensor on the kept axes."""
    others = _others(space.n, keep)
    q = space.product(others)
    # move kept axes to the front so the integrated axes line up with q
    g = np.moveaxis(f, keep, tuple(range(len(keep))))
    return np.tensordot(g, q, axes=q.ndim) if others else g


def variance_projection_check(space: FiniteProductSpace, f: np.ndarray,
                              family: SubsetFamily) -> CheckResult:
    """``sum_S Var(E[f | X_S]) <= r Var(f)`` under the product measure."""
    f = np.asarray(f, dtype=float)
    if f.shape != space.alphabet_sizes:
        raise ValueError("f must be a tensor over the product alphabet")
    _check_family(space.n, family)
    q = space.product()
    mean = float(np.sum(q * f))
    total = float(np.sum(q * (f - mean) ** 2))
    lhs = 0.0
    for s in family.subsets:
        keep = _axes(s)
        g = conditional_expectation(space, f, keep)
        lhs += float(np.sum(space.product(keep) * (g - mean) ** 2))
    return _verdict(lhs, family.r * total)


def _partial_sums(space: FiniteProductSpace, keep: tuple) -> np.ndarray:
    """Tensor over the full alphabet holding ``sum_{i in keep} x_i``."""
    shape = space.alphabet_sizes
    out = np.zeros(shape)
    for i in keep:
        view = [1] * space.n
        view[i] = shape[i]
        out = out + space.values[i].reshape(view)
    return out


def _conditional_on_values(labels: np.ndarray, f: np.ndarray, q: np.ndarray,
                           mean: float, decimals: int = 10) -> float:
    """``Var(E[f | L])`` where ``L`` is a real label tensor."""
    keys = np.round(labels.ravel(), decimals)
    _, inv = np.unique(keys, return_inverse=True)
    mass = np.bincount(inv, weights=q.ravel())
    moment = np.bincount(inv, weights=(q * f).ravel())
    cond = np.divide(moment, mass, out=np.zeros_like(mass), where=mass > 0)
    return float(np.sum(mass * (cond - mean) ** 2))


def sum_projection_check(space: FiniteProductSpace,
                         f: Union[Callable, Mapping],
                         family: SubsetFamily) -> dict:
    """Projection inequality for a function of the total sum, conditioning on partial sums.

    ``f`` maps achievable sums to reals (a vectorized callable or a mapping).
    When the factors are identical and the family is every ``m``-subset, the
    result also carries the ``Var(E[f | U_[m]]) <= (m/n) Var(f)`` comparison.
    """
    _check_family(space.n, family)
    total = _partial_sums(space, tuple(range(space.n)))
    if callable(f):
        fu = np.asarray(f(total), dtype=float)
    else:
        lookup = {round(float(k), 10): float(v) for k, v in f.items()}
        try:
            fu = np.vectorize(lambda u: lookup[round(float(u), 10)])(total)
        except KeyError as exc:
            raise ValueError(f"f is undefined at achievable sum {exc}") from exc
    if fu.shape != space.alphabet_sizes:
        raise ValueError("f must produce one value per cell")
    q = space.product()
    mean = float(np.sum(q * fu))
    var = float(np.sum(q * (fu - mean) ** 2))
    per_subset = [
        _conditional_on_values(_partial_sums(space, _axes(s)), fu, q, mean)
        for s in family.subsets
    ]
    check = _verdict(sum(per_subset), family.r * var)
    out = {"lhs": check.lhs, "rhs": check.rhs, "holds": check.holds, "var": var}
    sizes = {len(s) for s in family.subsets}
    iid = all(np.array_equal(space.factor_weights[0], w) and np.array_equal(space.values[0], v)
              for w, v in zip(space.factor_weights, space.values))
    if iid and len(sizes) == 1 and len(family.subsets) == math.comb(space.n, sizes.pop()):
        m = len(family.subsets[0])
        first = _conditional_on_values(_partial_sums(space, tuple(range(m))), fu, q, mean)
        out["m"] = m
        out["iid_lhs"] = first
        out["iid_rhs"] = m / space.n * var
        out["iid_holds"] = bool(first <= m / space.n * var + SLACK)
    return out


def _centered(space: FiniteProductSpace, keep: tuple, psi: np.ndarray) -> np.ndarray:
    q = space.product(keep)
    m = float(np.sum(q * psi))
    if abs(m) > 1e-12:
        warnings.warn(f"psi on {tuple(i + 1 for i in keep)} has mean {m:.3g}; centering it",
                      stacklevel=3)
    return psi - m


def _lift(space: FiniteProductSpace, keep: tuple, psi: np.ndarray) -> np.ndarray:
    """Extend a tensor on the kept axes to the full product alphabet."""
    shape = [1] * space.n
    for ax, size in zip(keep, psi.shape):
        shape[ax] = size
    order = np.argsort(keep)
    psi = np.transpose(psi, order)
    return np.broadcast_to(psi.reshape(shape), space.alphabet_sizes)


def _psi_terms(space, psi, family):
    terms = []
    for s in family.subsets:
        keep = _axes(s)
        t = np.asarray(psi[s] if s in psi else psi[tuple(s)], dtype=float)
        if t.shape != tuple(space.alphabet_sizes[i] for i in keep):
            raise ValueError(f"psi for {s} has the wrong shape")
        terms.append((keep, _centered(space, keep, t)))
    return terms


def variance_drop_check(space: FiniteProductSpace, psi: Mapping,
                        family: SubsetFamily) -> CheckResult:
    """``E|sum_S psi_S(X_S)|^2 <= r sum_S E|psi_S(X_S)|^2`` for centered ``psi_S``."""
    _check_family(space.n, family)
    q = space.product()
    terms = _psi_terms(space, psi, family)
    f = sum(_lift(space, keep, t) for keep, t in terms)
    lhs = float(np.sum(q * f * f))
    rhs = family.r * sum(float(np.sum(space.product(keep) * t * t)) for keep, t in terms)
    return _verdict(lhs, rhs)


def variance_drop_chain(space: FiniteProductSpace, psi: Mapping,
                        family: SubsetFamily) -> list[float]:
    """The successive quantities in the Cauchy-Schwarz derivation of the variance drop.

    Entry 0 is ``E f^2`` computed directly and entry 1 the same value written
    as ``(sum_S E[f psi_S])^2 / E f^2``; the remaining entries are
    nondecreasing and end at ``r sum_S E psi_S^2``.
    """
    q = space.product()
    terms = _psi_terms(space, psi, family)
    lifted = [_lift(space, keep, t) for keep, t in terms]
    f = sum(lifted)
    ef2 = float(np.sum(q * f * f))
    cross = sum(float(np.sum(q * f * g)) for g in lifted)
    proj = [float(np.sum(space.product(keep) * conditional_expectation(space, f, keep) ** 2))
            for keep, _ in terms]
    norms = [float(np.sum(space.product(keep) * t * t)) for keep, t in terms]
    step2 = sum(math.sqrt(a * b) for a, b in zip(proj, norms)) ** 2 / ef2
    step3 = sum(proj) / ef2 * sum(norms)
    return [ef2, cross ** 2 / ef2, step2, step3, family.r * sum(norms)]


def linearized_entropy_sum(space: FiniteProductSpace, f: np.ndarray,
                           family: SubsetFamily, eps: float) -> float:
    """``(2/eps^2) sum_S D(P_S || Q_S)`` for ``dP = (1 + eps f) dQ``, ``f`` centered."""
    total = 0.0
    for s in family.subsets:
        keep = _axes(s)
        g = eps * conditional_expectation(space, f, keep)
        total += float(np.sum(space.product(keep) * (1 + g) * np.log1p(g)))
    return 2.0 * total / eps ** 2


def projection_sum(space: FiniteProductSpace, f: np.ndarray, family: SubsetFamily) -> float:
    q = space.product()
    mean = float(np.sum(q * f))
    return sum(float(np.sum(space.product(_axes(s)) *
                            (conditional_expectation(space, f, _axes(s)) - mean) ** 2))
               for s in family.subsets)


def linearization_check(space: FiniteProductSpace, f: np.ndarray, family: SubsetFamily,
                        eps=(1e-2, 1e-3), tol: float = 1e-4) -> CheckResult:
    """Richardson-extrapolated entropy expansion against the projection sum.

    The expansion error is first order in ``eps`` (a third-moment term), so
    two step sizes cancel it. ``tol`` is relative once the target exceeds one.
    """
    q = space.product()
    f = np.asarray(f, dtype=float)
    f = f - float(np.sum(q * f))
    e1, e2 = eps
    l1 = linearized_entropy_sum(space, f, family, e1)
    l2 = linearized_entropy_sum(space, f, family, e2)
    extrapolated = (e1 * l2 - e2 * l1) / (e1 - e2)
    target = projection_sum(space, f, family)
    err = abs(extrapolated - target)
    return CheckResult(float(extrapolated), float(target), bool(err <= tol * max(1.0, target)))


# -- hypercube group ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GroupMeasure:
    """Probability vector on the group ``Z_2^k``; element ``x`` is a ``k``-bit integer."""

    k: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if not 1 <= self.k <= 12:
            raise ValueError("k must lie in 1..12")
        if w.shape != (2 ** self.k,):
            raise ValueError("weights must have length 2**k")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("weights must be a probability vector")
        object.__setattr__(self, "weights", w)

    def translate(self, t: int) -> "GroupMeasure":
        idx = np.arange(2 ** self.k)
        return GroupMeasure(self.k, self.weights[idx ^ t])


def walsh_hadamard(a: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform."""
    a = np.array(a, dtype=float)
    h = 1
    while h < a.size:
        a = a.reshape(-1, 2, h)
        a = np.stack((a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]), axis=1).reshape(-1)
        h *= 2
    return a


def group_convolve(measures: Sequence[GroupMeasure]) -> GroupMeasure:
    """Law of the XOR sum of independent group elements."""
    k = measures[0].k
    if any(m.k != k for m in measures):
        raise ValueError("measures live on different groups")
    spectrum = reduce(np.multiply, (walsh_hadamard(m.weights) for m in measures))
    w = walsh_hadamard(spectrum) / 2 ** k
    w = np.clip(w, 0.0, None)
    return GroupMeasure(k, w / w.sum())


def hypercube_dirichlet(mu: GroupMeasure) -> np.ndarray:
    """Matrix of ``f -> E_mu sum_i (f(x) - f(x + e_i))^2``.

    Each edge ``{x, x + e_i}`` is counted from both endpoints, so it carries
    weight ``mu(x) + mu(x + e_i)``.
    """
    size = 2 ** mu.k
    idx = np.arange(size)
    L = np.zeros((size, size))
    for i in range(mu.k):
        nb = idx ^ (1 << i)
        w = mu.weights + mu.weights[nb]
        L[idx, idx] += w
        L[idx, nb] -= w
    return L


def hypercube_poincare(mu: GroupMeasure) -> float:
    """Best constant in ``Var_mu(f) <= C E_mu|grad f|^2`` with single-bit differences."""
    if np.any(mu.weights <= 0):
        raise SupportError("a zero-weight point makes the constant infinite")
    L = hypercube_dirichlet(mu)
    vals, vecs = eigh(L, np.diag(mu.weights))
    # drop the constant mode by overlap rather than by position
    const = np.abs(mu.weights @ vecs)
    order = np.argsort(const)[:-1]
    lam = float(vals[order].min())
    return 1.0 / lam


def group_subset_check(measures: Sequence[GroupMeasure], family: SubsetFamily,
                       slack: float = 1e-10) -> CheckResult:
    """``C_p(mu_[n]) <= (1/t) sum_S C_p(mu_S)`` for convolutions on ``Z_2^k``."""
    n = len(measures)
    _check_family(n, family)
    t = family.t
    if t < 1:
        raise ValueError("every index must be covered by the family")
    lhs = hypercube_poincare(group_convolve(measures))
    rhs = sum(hypercube_poincare(group_convolve([measures[i - 1] for i in s]))
              for s in family.subsets) / t
    return _verdict(lhs, rhs, slack)


# -- randomized instances ----------------------------------------------------

def instance_rng(master_seed: int, index: int) -> np.random.Generator:
    """Generator for instance ``index``; reproducible without running the others."""
    return np.random.default_rng([int(master_seed), int(index)])


def random_space(rng: np.random.Generator, max_n: int = 4, max_alphabet: int = 3,
                 iid: bool = False, real_values: bool = False) -> FiniteProductSpace:
    n = int(rng.integers(1, max_n + 1))
    sizes = [int(rng.integers(2, max_alphabet + 1))] * n if iid else \
        [int(rng.integers(2, max_alphabet + 1)) for _ in range(n)]
    if iid:
        w = rng.dirichlet(np.ones(sizes[0]))
        weights = [w] * n
        vals = [np.round(rng.normal(size=sizes[0]), 3)] * n if real_values else None
    else:
        weights = [rng.dirichlet(np.ones(s)) for s in sizes]
        vals = [np.round(rng.normal(size=s), 3) for s in sizes] if real_values else None
    weights = [w / w.sum() for w in weights]
    return FiniteProductSpace(tuple(weights), None if vals is None else tuple(vals))


def random_family(rng: np.random.Generator, n: int, require_cover: bool = False) -> SubsetFamily:
    subsets = [tuple(i + 1 for i in range(n) if mask >> i & 1) for mask in range(1, 2 ** n)]
    while True:
        take = rng.random(len(subsets)) < rng.uniform(0.2, 0.9)
        if not take.any():
            take[rng.integers(len(subsets))] = True
        fam = SubsetFamily(n, tuple(s for s, keep in zip(subsets, take) if keep))
        if not require_cover or fam.t >= 1:
            return fam
