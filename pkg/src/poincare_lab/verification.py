"""Randomized and zoo-wide verification suites.

Each randomized instance draws from its own generator seeded by
``(master_seed, index)``, so any failing instance can be replayed alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
import numpy as np

from . import bounds, shearer
from .bounds import SubsetFamily
from .convolve import convolve_pair, gaussian_smooth, self_convolve, standardized_sum
from .measures import GridMeasure, gaussian, standardize
from .spectral import estimate_cp, muckenhoupt_bracket
from .transport import gap_lower_bound_check, w2_quantile


@dataclass
class Verdict:
    task: str
    inequality: str
    lhs: float
    rhs: float
    holds: bool

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return {"task": self.task, "inequality": self.inequality, "lhs": self.lhs,
                "rhs": self.rhs, "margin": self.margin, "holds": self.holds}


@dataclass
class SuiteResult:
    name: str
    instances: int = 0
    violations: int = 0
    worst_margin: float = math.inf
    worst_index: int = -1
    failures: list = field(default_factory=list)

    def record(self, index: int, lhs: float, rhs: float, holds: bool):
        self.instances += 1
        margin = rhs - lhs
        if margin < self.worst_margin:
            self.worst_margin, self.worst_index = margin, index
        if not holds:
            self.violations += 1
            self.failures.append(index)

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.instances > 0

    def to_dict(self) -> dict:
        return {"suite": self.name, "instances": self.instances, "violations": self.violations,
                "worst_margin": self.worst_margin, "worst_index": self.worst_index}


def _sparse_joint(rng, space: shearer.FiniteProductSpace) -> shearer.JointMeasure:
    shape = space.alphabet_sizes
    w = rng.dirichlet(np.full(math.prod(shape), rng.choice([0.2, 1.0, 5.0]))).reshape(shape)
    if rng.random() < 0.3:
        w = w * (rng.random(shape) > 0.3)
        if w.sum() == 0:
            w.flat[0] = 1.0
    return shearer.JointMeasure(space, w / w.sum())


def _random_psi(rng, space, family):
    psi = {}
    for s in family.subsets:
        axes = tuple(i - 1 for i in s)
        t = rng.normal(size=tuple(space.alphabet_sizes[i] for i in axes))
        psi[s] = t - float(np.sum(space.product(axes) * t))
    return psi


def _family_for_sums(rng, space: shearer.FiniteProductSpace) -> SubsetFamily:
    n = space.n
    iid = all(np.array_equal(space.factor_weights[0], w) for w in space.factor_weights)
    if iid and rng.random() < 0.5:
        return SubsetFamily.all_of_size(n, int(rng.integers(1, n + 1)))
    return shearer.random_family(rng, n)


def shearer_suites(seed: int, instances: int = 10_000, max_n: int = 4,
                   max_alphabet: int = 3) -> dict[str, SuiteResult]:
    """Entropy, projection, sum-projection and variance-drop sweeps plus linearization."""
    out = {name: SuiteResult(name) for name in
           ("entropy_shearer", "variance_projection", "sum_projection",
            "sum_projection_iid", "variance_drop", "variance_drop_chain", "linearization")}
    for k in range(instances):
        rng = shearer.instance_rng(seed, k)
        space = shearer.random_space(rng, max_n, max_alphabet)
        fam = shearer.random_family(rng, space.n)

        res = shearer.entropy_shearer_check(_sparse_joint(rng, space), fam)
        out["entropy_shearer"].record(k, *res)

        f = rng.normal(size=space.alphabet_sizes)
        out["variance_projection"].record(k, *shearer.variance_projection_check(space, f, fam))

        sum_space = shearer.random_space(rng, max_n, max_alphabet,
                                         iid=bool(rng.random() < 0.5), real_values=True)
        sum_fam = _family_for_sums(rng, sum_space)
        table = {}

        def g(u, rng=rng, table=table):
            keys = np.round(u, 10)
            for key in np.unique(keys):
                table.setdefault(float(key), float(rng.normal()))
            return np.vectorize(table.__getitem__)(keys)

        sres = shearer.sum_projection_check(sum_space, g, sum_fam)
        out["sum_projection"].record(k, sres["lhs"], sres["rhs"], sres["holds"])
        if "iid_lhs" in sres:
            out["sum_projection_iid"].record(k, sres["iid_lhs"], sres["iid_rhs"], sres["iid_holds"])

        psi = _random_psi(rng, space, fam)
        out["variance_drop"].record(k, *shearer.variance_drop_check(space, psi, fam))
        if k % 10 == 0:
            chain = shearer.variance_drop_chain(space, psi, fam)
            steps_ok = abs(chain[0] - chain[1]) <= 1e-10 * max(1.0, chain[0]) and all(
                a <= b * (1 + 1e-12) + 1e-12 for a, b in zip(chain[1:], chain[2:]))
            out["variance_drop_chain"].record(k, chain[0], chain[-1], steps_ok)
            h = f / np.abs(f).max()
            out["linearization"].record(k, *shearer.linearization_check(space, h, fam))
    return out


def hypercube_suite(seed: int, instances: int = 1000, max_k: int = 3,
                    max_n: int = 4) -> SuiteResult:
    result = SuiteResult("group_subset")
    for j in range(instances):
        rng = shearer.instance_rng(seed, j)
        k = int(rng.integers(1, max_k + 1))
        n = int(rng.integers(1, max_n + 1))
        measures = [shearer.GroupMeasure(k, rng.dirichlet(np.ones(2 ** k))) for _ in range(n)]
        fam = shearer.random_family(rng, n, require_cover=True)
        result.record(j, *shearer.group_subset_check(measures, fam))
    return result


# -- continuous zoo checks ---------------------------------------------------

class ConstantCache:
    """Memo of spectral constants keyed by object identity of immutable measures."""

    def __init__(self):
        self._store = {}

    def __call__(self, mu: GridMeasure) -> float:
        key = id(mu)
        if key not in self._store:
            self._store[key] = (mu, estimate_cp(mu, refine=False).c_p)
        return self._store[key][1]


def zoo_pair_verdicts(zoo: dict[str, GridMeasure], pairs=None,
                      cache: ConstantCache | None = None, rel_tol: float = 1e-3) -> list[Verdict]:
    """Subadditivity and stability checks for every (unordered) pair of zoo measures."""
    cache = cache or ConstantCache()
    names = list(zoo)
    pairs = pairs or list(combinations_with_replacement(names, 2))
    verdicts = []
    for a, b in pairs:
        mu, nu = zoo[a], zoo[b]
        conv = convolve_pair(mu, nu)
        c_mu, c_nu, c_conv = cache(mu), cache(nu), cache(conv)
        sigma2 = conv.variance()
        tag = f"{a}*{b}"
        sub = bounds.subadditivity_bound(c_mu, c_nu)
        verdicts.append(Verdict(tag, "subadditivity", c_conv, sub.value,
                                c_conv <= sub.value * (1 + rel_tol)))
        stab = bounds.stability_bound(c_mu, c_nu, c_conv, sigma2)
        verdicts.append(Verdict(tag, "stability", c_conv, stab.value,
                                c_conv <= stab.value * (1 + rel_tol)))
        env = bounds.stability_implied_bound(c_mu, c_nu, sigma2)
        verdicts.append(Verdict(tag, "stability_envelope", c_conv, env.value,
                                c_conv <= env.value * (1 + rel_tol)))
    return verdicts


def gap_verdicts(zoo: dict[str, GridMeasure], cache: ConstantCache | None = None) -> list[Verdict]:
    cache = cache or ConstantCache()
    out = []
    for name, mu in zoo.items():
        gap, w2_sq, holds = gap_lower_bound_check(mu, c_p=cache(mu))
        out.append(Verdict(name, "variance_gap_w2", w2_sq, gap, holds))
    return out


def muckenhoupt_verdicts(zoo: dict[str, GridMeasure], cache: ConstantCache | None = None,
                         rel_tol: float = 0.02) -> list[Verdict]:
    cache = cache or ConstantCache()
    out = []
    for name, mu in zoo.items():
        br = muckenhoupt_bracket(mu)
        c = cache(mu)
        out.append(Verdict(name, "muckenhoupt_lower", br.lower, c, br.lower <= c * (1 + rel_tol)))
        out.append(Verdict(name, "muckenhoupt_upper", c, br.upper, c <= br.upper * (1 + rel_tol)))
    return out


def w2_clt_verdicts(base: GridMeasure, n_values=(1, 4, 16, 64), delta2: float = 1.0,
                    abs_tol: float = 1e-3, task: str = "w2clt") -> list[Verdict]:
    """Quantile W2 of standardized sums against the smoothed W2 CLT bound."""
    base = standardize(base)
    c_delta = estimate_cp(gaussian_smooth(base, delta2), refine=False).c_p
    gamma = gaussian(0.0, 1.0, n_grid=8192)
    out = []
    for n in n_values:
        nu = standardized_sum(base, n)
        w2_sq = w2_quantile(nu, gamma) ** 2
        bound = bounds.w2_clt_bound(1, delta2, c_delta, n).value
        out.append(Verdict(f"{task}[n={n}]", "w2_clt", w2_sq, bound, w2_sq - abs_tol <= bound))
    return out


def subset_bound_verdict(mu: GridMeasure, family: SubsetFamily, rel_tol: float = 1e-3,
                         task: str = "subset_bound") -> Verdict:
    """Constant of the full i.i.d. sum against the family bound built from partial sums."""
    sums = {}
    for s in family.subsets:
        if len(s) not in sums:
            sums[len(s)] = estimate_cp(self_convolve(mu, len(s)), refine=False).c_p
    bound = bounds.shearer_subset_bound(family, {s: sums[len(s)] for s in family.subsets})
    c_full = estimate_cp(self_convolve(mu, family.n), refine=False).c_p
    return Verdict(task, "shearer_subset", c_full, bound.value,
                   c_full <= bound.value * (1 + rel_tol))
