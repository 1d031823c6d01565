"""Closed-form bounds on Poincaré constants of convolutions and CLT sums.

Every calculator returns a :class:`BoundReport` recording its inputs, so
reports can be serialized and compared against measured constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np


class BoundError(ValueError):
    pass


@dataclass(frozen=True)
class SubsetFamily:
    """Distinct nonempty subsets of ``{1, ..., n}``."""

    n: int
    subsets: tuple

    def __post_init__(self):
        if self.n < 1:
            raise BoundError("n must be at least 1")
        subsets = tuple(tuple(sorted(set(int(i) for i in s))) for s in self.subsets)
        for s in subsets:
            if not s:
                raise BoundError("subsets must be nonempty")
            if s[0] < 1 or s[-1] > self.n:
                raise BoundError(f"subset {s} is not contained in 1..{self.n}")
        if len(set(subsets)) != len(subsets):
            raise BoundError("subsets must be distinct")
        object.__setattr__(self, "subsets", subsets)

    def cover_counts(self) -> np.ndarray:
        counts = np.zeros(self.n, dtype=int)
        for s in self.subsets:
            counts[np.asarray(s) - 1] += 1
        return counts

    @property
    def r(self) -> int:
        """Largest number of subsets containing a single index."""
        return int(self.cover_counts().max())

    @property
    def t(self) -> int:
        """Smallest number of subsets containing a single index."""
        return int(self.cover_counts().min())

    @classmethod
    def singletons(cls, n: int) -> "SubsetFamily":
        return cls(n, tuple((i,) for i in range(1, n + 1)))

    @classmethod
    def all_of_size(cls, n: int, m: int) -> "SubsetFamily":
        from itertools import combinations

        return cls(n, tuple(combinations(range(1, n + 1), m)))


@dataclass(frozen=True)
class BoundReport:
    name: str
    value: float
    inputs: dict = field(default_factory=dict)
    satisfied: Optional[bool] = None
    tolerance: float = 0.0

    def compare(self, measured: float, rel_tol: float = 0.0, abs_tol: float = 0.0) -> "BoundReport":
        """Record whether ``measured <= value`` within the given slack."""
        tol = abs_tol + rel_tol * abs(self.value)
        inputs = dict(self.inputs, measured=float(measured))
        return BoundReport(self.name, self.value, inputs, bool(measured <= self.value + tol), tol)

    def to_dict(self) -> dict:
        out = {"name": self.name, "value": self.value, "inputs": dict(self.inputs),
               "tolerance": self.tolerance}
        if self.satisfied is not None:
            out["satisfied"] = self.satisfied
        return out


def _positive(**kwargs):
    for k, v in kwargs.items():
        if not (v > 0 and math.isfinite(v)):
            raise BoundError(f"{k} must be finite and positive, got {v}")


def subadditivity_bound(c_mu: float, c_nu: float) -> BoundReport:
    _positive(c_mu=c_mu, c_nu=c_nu)
    return BoundReport("subadditivity", c_mu + c_nu, {"c_mu": c_mu, "c_nu": c_nu})


def shearer_subset_bound(family: SubsetFamily, c_values: Mapping) -> BoundReport:
    """``(1/t) * sum_S C_p(mu_S)`` over the family."""
    keys = {tuple(sorted(k)) for k in c_values}
    if keys != set(family.subsets) or len(c_values) != len(family.subsets):
        raise BoundError("c_values must be keyed exactly by the family's subsets")
    t = family.t
    if t == 0:
        raise BoundError("some index is covered by no subset; the bound is vacuous")
    values = [float(v) for v in c_values.values()]
    _positive(**{f"c[{i}]": v for i, v in enumerate(values)})
    return BoundReport("shearer_subset", sum(values) / t,
                       {"t": t, "r": family.r, "n": family.n, "sum": sum(values)})


def _deficit_ratio(c_conv: float, sigma2: float) -> float:
    u = c_conv - sigma2
    return u * u / (u * u + c_conv * sigma2)


def _check_gap(c_conv: float, sigma2: float):
    # tiny negative gaps are eigensolver noise, not a violated hypothesis
    if c_conv < sigma2 * (1 - 1e-9):
        raise BoundError(f"candidate constant {c_conv} is below the variance {sigma2}")


def stability_bound(c_mu: float, c_nu: float, c_conv: float, sigma2: float) -> BoundReport:
    _positive(c_mu=c_mu, c_nu=c_nu, c_conv=c_conv, sigma2=sigma2)
    _check_gap(c_conv, sigma2)
    c_conv_eff = max(c_conv, sigma2)
    total = c_mu + c_nu
    penalty = c_mu * c_nu / total * _deficit_ratio(c_conv_eff, sigma2)
    return BoundReport("stability", total - penalty,
                       {"c_mu": c_mu, "c_nu": c_nu, "c_conv": c_conv, "sigma2": sigma2,
                        "penalty": penalty})


def stability_implied_bound(c_mu: float, c_nu: float, sigma2: float,
                            tol: float = 1e-10) -> BoundReport:
    """Largest ``c`` in ``[sigma2, c_mu + c_nu]`` with ``c <= stability_bound(c)``.

    The right-hand side decreases in ``c`` on this interval (the deficit ratio
    increases), so ``c - rhs(c)`` has a single sign change and bisection finds
    it; every constant consistent with the stability estimate lies below.
    """
    _positive(c_mu=c_mu, c_nu=c_nu, sigma2=sigma2)
    total = c_mu + c_nu
    if sigma2 > total * (1 + 1e-12):
        raise BoundError("sigma2 exceeds c_mu + c_nu")
    weight = c_mu * c_nu / total

    def excess(c):
        return c - (total - weight * _deficit_ratio(c, sigma2))

    lo, hi = min(sigma2, total), total
    if excess(hi) <= 0:
        root = hi
    else:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if excess(mid) <= 0:
                lo = mid
            else:
                hi = mid
        root = lo
    return BoundReport("stability_implied", root,
                       {"c_mu": c_mu, "c_nu": c_nu, "sigma2": sigma2}, tolerance=tol)


def iid_stability_bound(c1: float, c2_candidate: float, sigma2: float) -> BoundReport:
    _positive(c1=c1, c2_candidate=c2_candidate, sigma2=sigma2)
    _check_gap(c2_candidate, sigma2)
    penalty = c1 / 4 * _deficit_ratio(max(c2_candidate, sigma2), sigma2)
    return BoundReport("iid_stability", c1 - penalty,
                       {"c1": c1, "c2": c2_candidate, "sigma2": sigma2, "penalty": penalty})


def johnson_stability_bound(c1: float, c2_candidate: float, fisher_j: float) -> BoundReport:
    """Fisher-information form of the i.i.d. estimate, unit-variance setting only."""
    _positive(c1=c1, c2_candidate=c2_candidate)
    if not fisher_j >= 1:
        raise BoundError("Fisher information below 1 contradicts Cramér-Rao at unit variance")
    if math.isinf(fisher_j):
        penalty = 0.0
    else:
        penalty = c1 / 9 * (c2_candidate - 1) ** 2 / (c2_candidate ** 2 * (1 + fisher_j * c1))
    return BoundReport("johnson_stability", c1 - penalty,
                       {"c1": c1, "c2": c2_candidate, "fisher_j": fisher_j, "penalty": penalty})


def rate_geometric(c1: float, n: int) -> BoundReport:
    """Bound on ``C_p(nu_{2^n})``: ``3/2 + (3/4)**n * (c1 - 3/2)``."""
    if c1 < 1:
        raise BoundError("isotropic measures have C_p >= 1")
    if n < 0:
        raise BoundError("n must be nonnegative")
    return BoundReport("rate_geometric", 1.5 + 0.75 ** n * (c1 - 1.5), {"c1": c1, "n": n})


def rate_recurrence(n_max: int) -> list[float]:
    """``a_0 = 2`` and ``a_{k+1} = -2 + sqrt(9 + 6 (a_k - 1))``.

    ``a_{k+1}`` is the positive root of ``a + (a - 1)**2 / 6 = a_k``.
    """
    if n_max < 0:
        raise BoundError("n_max must be nonnegative")
    a = [2.0]
    for _ in range(n_max):
        a.append(-2.0 + math.sqrt(9.0 + 6.0 * (a[-1] - 1.0)))
    return a


def rate_explicit(n: int) -> BoundReport:
    """``1 + 7 / (n + 7)``, valid when ``C_p(nu_1) <= 2``."""
    if n < 0:
        raise BoundError("n must be nonnegative")
    return BoundReport("rate_explicit", 1.0 + 7.0 / (n + 7), {"n": n})


def w2_clt_bound(d: int, delta2: float, c_delta: float, n: int) -> BoundReport:
    _positive(delta2=delta2, c_delta=c_delta)
    if d < 1 or n < 1:
        raise BoundError("d and n must be at least 1")
    denom = delta2 + math.sqrt(n) - 1
    if not denom > 0:
        raise BoundError("nonpositive denominator")
    return BoundReport("w2_clt", d * 2 * (delta2 + c_delta) / denom,
                       {"d": d, "delta2": delta2, "c_delta": c_delta, "n": n})


def zhai_bound(d: int, radius: float, n: int) -> BoundReport:
    _positive(radius=radius)
    if d < 1 or n < 1:
        raise BoundError("d and n must be at least 1")
    return BoundReport("zhai", 25 * d * radius ** 2 * (1 + math.log(n)) ** 2 / n,
                       {"d": d, "radius": radius, "n": n})


def zhai_crossover(d: int, radius: float, delta2: float, c_delta: float,
                   n_max: int = 10 ** 7, chunk: int = 1 << 20) -> dict:
    """Scan ``n = 1..n_max`` for where the bounded-support bound beats the W2 bound.

    Returns the first ``n`` with ``zhai < w2_clt`` and every sign change seen.
    """
    crossings = []
    prev = None
    for start in range(1, n_max + 1, chunk):
        n = np.arange(start, min(start + chunk, n_max + 1), dtype=float)
        zhai = 25 * d * radius ** 2 * (1 + np.log(n)) ** 2 / n
        w2 = d * 2 * (delta2 + c_delta) / (delta2 + np.sqrt(n) - 1)
        below = zhai < w2
        flips = np.flatnonzero(below[1:] != below[:-1]) + 1
        if prev is not None and below[0] != prev:
            crossings.append(int(n[0]))
        crossings.extend(int(n[i]) for i in flips)
        prev = bool(below[-1])
    first = None
    if crossings:
        first = crossings[0]
    return {"first_n": first, "crossings": crossings, "n_max": n_max,
            "d": d, "radius": radius, "delta2": delta2, "c_delta": c_delta}


def concentration_profile(t: float, c_p: float, k_abs: float) -> BoundReport:
    """Deviation bound ``exp(-min(t^2/(K C), t/sqrt(K C)))`` for product measures."""
    if t < 0:
        raise BoundError("t must be nonnegative")
    _positive(c_p=c_p, k_abs=k_abs)
    kc = k_abs * c_p
    return BoundReport("concentration", math.exp(-min(t * t / kc, t / math.sqrt(kc))),
                       {"t": t, "c_p": c_p, "k_abs": k_abs})


def smoothing_constant_bound(delta2: float) -> BoundReport:
    _positive(delta2=delta2)
    return BoundReport("smoothing_constant", delta2 * math.exp(4.0 / delta2), {"delta2": delta2})


def doubling_deficit(c_next: float) -> float:
    """Exact lower bound on ``C_p(nu_1) - C_p(nu_2)`` at unit variance."""
    u = c_next - 1.0
    return c_next * u * u / (3 * u * u + 4 * c_next)


def doubling_deficit_piecewise(c_next: float) -> float:
    """Polynomial minorant of :func:`doubling_deficit` used for the explicit rates."""
    linear = (c_next - 1.0) / 3.0 - 1.0 / 6.0
    if 1.0 <= c_next < 2.0:
        return max((c_next - 1.0) ** 2 / 6.0, linear)
    return linear


REGISTRY = {
    "subadditivity": subadditivity_bound,
    "stability": stability_bound,
    "stability_implied": stability_implied_bound,
    "iid_stability": iid_stability_bound,
    "johnson_stability": johnson_stability_bound,
    "rate_geometric": rate_geometric,
    "rate_explicit": rate_explicit,
    "w2_clt": w2_clt_bound,
    "zhai": zhai_bound,
    "concentration": concentration_profile,
    "smoothing_constant": smoothing_constant_bound,
}
