"""Probability measures on the line and their basic calculus.

A :class:`GridMeasure` stores density samples on a uniform grid over an
explicit support window ``[lo, hi]``; the density is taken to vanish outside
the window. All integrals use the trapezoidal rule on the grid nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.interpolate import PchipInterpolator

MIN_GRID = 16
DEFAULT_N_GRID = 4096
DEFAULT_WINDOW_SIGMAS = 10.0

# Fisher quadrature: nodes below DENSITY_FLOOR are skipped, integrals above
# FISHER_OVERFLOW are reported as +inf.
DENSITY_FLOOR = 1e-300
FISHER_OVERFLOW = 1e12
# A density still above this fraction of its peak at a window endpoint jumps
# to zero there, so its Fisher information is infinite.
EDGE_JUMP_FRACTION = 1e-8

NORMALIZATION_TOL = 1e-9


class MeasureError(ValueError):
    """Invalid measure construction or an operation outside its domain."""


def trapezoid_weights(n: int, step: float) -> np.ndarray:
    w = np.full(n, step)
    w[0] = w[-1] = 0.5 * step
    return w


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Density sampled at ``n_grid`` uniform nodes on ``[lo, hi]``.

    The constructor validates and renormalizes, so every instance integrates
    to one under the trapezoidal rule.
    """

    lo: float
    hi: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < MIN_GRID:
            raise MeasureError(f"need a 1-D array with at least {MIN_GRID} samples")
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.hi > self.lo):
            raise MeasureError(f"invalid window [{self.lo}, {self.hi}]")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise MeasureError("density samples must be finite and nonnegative")
        step = (self.hi - self.lo) / (values.size - 1)
        mass = float(trapezoid_weights(values.size, step) @ values)
        if not mass > 0:
            raise MeasureError("density has zero mass")
        values = values / mass
        values.setflags(write=False)
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "values", values)

    @property
    def n_grid(self) -> int:
        return self.values.size

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.n_grid - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_grid)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature masses ``w_i * p_i`` at the nodes."""
        return trapezoid_weights(self.n_grid, self.step) * self.values

    def mass(self) -> float:
        return float(self.weights.sum())

    def expect(self, f: np.ndarray) -> float:
        return float(self.weights @ np.asarray(f, dtype=float))

    def mean(self) -> float:
        return self.expect(self.nodes)

    def variance(self) -> float:
        x = self.nodes - self.mean()
        return self.expect(x * x)

    def cdf(self) -> np.ndarray:
        """Trapezoidal CDF at the nodes, pinned to [0, 1]."""
        p = self.values
        F = np.concatenate(([0.0], np.cumsum(0.5 * self.step * (p[1:] + p[:-1]))))
        return np.clip(F / F[-1], 0.0, 1.0)

    def density_at(self, x) -> np.ndarray:
        """Linear interpolation of the samples, zero outside the window."""
        return np.interp(np.asarray(x, dtype=float), self.nodes, self.values,
                         left=0.0, right=0.0)

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "n_grid": self.n_grid}


@dataclass(frozen=True)
class GaussianMixtureSpec:
    """Finite Gaussian mixture; ``components`` holds ``(weight, mean, variance)``."""

    components: tuple

    def __post_init__(self):
        comps = tuple((float(w), float(m), float(v)) for w, m, v in self.components)
        if not comps:
            raise MeasureError("mixture needs at least one component")
        if any(not (0 < w <= 1) for w, _, _ in comps):
            raise MeasureError("mixture weights must lie in (0, 1]")
        if any(not v > 0 for _, _, v in comps):
            raise MeasureError("mixture variances must be positive")
        if abs(sum(w for w, _, _ in comps) - 1.0) > 1e-12:
            raise MeasureError("mixture weights must sum to 1")
        object.__setattr__(self, "components", comps)

    def mean(self) -> float:
        return sum(w * m for w, m, _ in self.components)

    def variance(self) -> float:
        mu = self.mean()
        return sum(w * (v + (m - mu) ** 2) for w, m, v in self.components)

    def density(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for w, m, v in self.components:
            out += w * np.exp(-0.5 * (x - m) ** 2 / v) / math.sqrt(2 * math.pi * v)
        return out


@dataclass(frozen=True)
class DiscreteAtoms:
    """Finitely supported law; ``atoms`` holds ``(location, weight)`` pairs."""

    atoms: tuple

    def __post_init__(self):
        atoms = tuple(sorted((float(x), float(w)) for x, w in self.atoms))
        if not atoms:
            raise MeasureError("need at least one atom")
        if any(not (0 < w <= 1) for _, w in atoms):
            raise MeasureError("atom weights must lie in (0, 1]")
        if abs(sum(w for _, w in atoms) - 1.0) > 1e-12:
            raise MeasureError("atom weights must sum to 1")
        locs = [x for x, _ in atoms]
        if len(set(locs)) != len(locs):
            raise MeasureError("atom locations must be distinct")
        object.__setattr__(self, "atoms", atoms)

    @property
    def locations(self) -> np.ndarray:
        return np.array([x for x, _ in self.atoms])

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    def mean(self) -> float:
        return float(self.locations @ self.probabilities)

    def variance(self) -> float:
        x = self.locations - self.mean()
        return float((x * x) @ self.probabilities)

    def smoothed(self, delta2: float) -> GaussianMixtureSpec:
        if not delta2 > 0:
            raise MeasureError("smoothing variance must be positive")
        return GaussianMixtureSpec(tuple((w, x, delta2) for x, w in self.atoms))


@dataclass(frozen=True)
class MeasureSummary:
    mean: float
    variance: float
    fisher_information: float
    fisher_floor_hit: bool = False

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "fisher_information": self.fisher_information,
            "fisher_floor_hit": self.fisher_floor_hit,
        }


MeasureSpec = Union[GaussianMixtureSpec, DiscreteAtoms]


def materialize(spec: MeasureSpec, window_sigmas: float = DEFAULT_WINDOW_SIGMAS,
                n_grid: int = DEFAULT_N_GRID, delta2: float = 0.0) -> GridMeasure:
    """Sample a mixture (or atoms smoothed by ``N(0, delta2)``) on a grid.

    The window is ``mean +/- window_sigmas * stddev`` of the sampled law.
    """
    if not window_sigmas > 0:
        raise MeasureError("window_sigmas must be positive")
    if n_grid < MIN_GRID:
        raise MeasureError(f"n_grid must be at least {MIN_GRID}")
    if delta2 < 0:
        raise MeasureError("smoothing variance must be nonnegative")
    if isinstance(spec, DiscreteAtoms):
        if delta2 == 0:
            raise MeasureError("atoms need positive smoothing to have a density")
        spec = spec.smoothed(delta2)
    elif delta2 > 0:
        spec = GaussianMixtureSpec(tuple((w, m, v + delta2) for w, m, v in spec.components))
    mu, sd = spec.mean(), math.sqrt(spec.variance())
    lo, hi = mu - window_sigmas * sd, mu + window_sigmas * sd
    return GridMeasure(lo, hi, spec.density(np.linspace(lo, hi, n_grid)))


def gaussian(mean: float = 0.0, variance: float = 1.0,
             window_sigmas: float = DEFAULT_WINDOW_SIGMAS,
             n_grid: int = DEFAULT_N_GRID) -> GridMeasure:
    return materialize(GaussianMixtureSpec(((1.0, mean, variance),)), window_sigmas, n_grid)


def uniform(a: float = 0.0, b: float = 1.0, n_grid: int = DEFAULT_N_GRID) -> GridMeasure:
    if not b > a:
        raise MeasureError("uniform needs a < b")
    return GridMeasure(a, b, np.ones(n_grid))


def laplace(scale: float = 1.0, half_width: float = 80.0,
            n_grid: int = 4 * DEFAULT_N_GRID) -> GridMeasure:
    """Two-sided exponential ``exp(-|x|/scale) / (2 scale)`` on ``+/- half_width``."""
    if not scale > 0:
        raise MeasureError("scale must be positive")
    x = np.linspace(-half_width, half_width, n_grid)
    return GridMeasure(-half_width, half_width, np.exp(-np.abs(x) / scale) / (2 * scale))


def exponential(rate: float = 1.0, width: float = 80.0,
                n_grid: int = 4 * DEFAULT_N_GRID) -> GridMeasure:
    if not rate > 0:
        raise MeasureError("rate must be positive")
    hi = width / rate
    x = np.linspace(0.0, hi, n_grid)
    return GridMeasure(0.0, hi, rate * np.exp(-rate * x))


def summarize(mu: GridMeasure) -> MeasureSummary:
    mean = mu.mean()
    var = mu.variance()
    return MeasureSummary(mean, var, *_fisher_information(mu))


def _fisher_information(mu: GridMeasure) -> tuple[float, bool]:
    p = mu.values
    peak = p.max()
    if p[0] > EDGE_JUMP_FRACTION * peak or p[-1] > EDGE_JUMP_FRACTION * peak:
        return math.inf, False
    dp = np.gradient(p, mu.step)
    keep = p > DENSITY_FLOOR
    integrand = np.zeros_like(p)
    integrand[keep] = dp[keep] ** 2 / p[keep]
    value = float(trapezoid_weights(p.size, mu.step) @ integrand)
    if not np.isfinite(value) or value > FISHER_OVERFLOW:
        return math.inf, not bool(keep.all())
    return value, not bool(keep.all())


def resample(mu: GridMeasure, lo: float, hi: float, n_grid: int) -> GridMeasure:
    """Monotone cubic resampling onto ``n_grid`` nodes over ``[lo, hi]``.

    The density is zero outside the original window.
    """
    x = np.linspace(lo, hi, n_grid)
    out = np.zeros(n_grid)
    inside = (x >= mu.lo) & (x <= mu.hi)
    out[inside] = PchipInterpolator(mu.nodes, mu.values, extrapolate=False)(
        np.clip(x[inside], mu.lo, mu.hi))
    return GridMeasure(lo, hi, np.clip(np.nan_to_num(out), 0.0, None))


def refine(mu: GridMeasure, max_step: float) -> GridMeasure:
    """Resample over the same window with step no larger than ``max_step``."""
    if mu.step <= max_step:
        return mu
    n = int(math.ceil((mu.hi - mu.lo) / max_step)) + 1
    return resample(mu, mu.lo, mu.hi, n)


def affine_pushforward(mu: GridMeasure, alpha: float, beta: float) -> GridMeasure:
    """Law of ``alpha * X + beta`` for ``X ~ mu``.

    The image of a uniform grid under an affine map is again uniform, so the
    nodes map onto the new grid exactly and no interpolation error arises.
    """
    if alpha == 0 or not np.isfinite(alpha):
        raise MeasureError("alpha must be finite and nonzero")
    a, b = alpha * mu.lo + beta, alpha * mu.hi + beta
    values = mu.values / abs(alpha)
    if alpha < 0:
        a, b = b, a
        values = values[::-1]
    return GridMeasure(a, b, values)


def standardize(mu: GridMeasure) -> GridMeasure:
    var = mu.variance()
    if not var > 0:
        raise MeasureError("cannot standardize a degenerate measure")
    sd = math.sqrt(var)
    return affine_pushforward(mu, 1.0 / sd, -mu.mean() / sd)


def sup_distance(mu: GridMeasure, nu: GridMeasure, n_points: int = 20001) -> float:
    """Sup-norm distance between two densities on the union of their windows."""
    x = np.linspace(min(mu.lo, nu.lo), max(mu.hi, nu.hi), n_points)
    return float(np.max(np.abs(mu.density_at(x) - nu.density_at(x))))


def from_config(spec: dict, n_grid: int = DEFAULT_N_GRID,
                window_sigmas: float = DEFAULT_WINDOW_SIGMAS) -> Union[GridMeasure, DiscreteAtoms]:
    """Build a measure from its JSON tagged-union description.

    ``{"atoms": ..., "smoothing_variance": 0}`` yields bare :class:`DiscreteAtoms`,
    which only CLT traces with positive regularization can consume.
    """
    keys = set(spec) - {"name"}
    if keys == {"gaussian_mixture"}:
        comps = tuple(_triple(c) for c in spec["gaussian_mixture"])
        return materialize(GaussianMixtureSpec(comps), window_sigmas, n_grid)
    if keys <= {"atoms", "smoothing_variance"} and "atoms" in keys:
        atoms = DiscreteAtoms(tuple(_pair(a) for a in spec["atoms"]))
        delta2 = float(spec.get("smoothing_variance", 0.0))
        if delta2 == 0:
            return atoms
        return materialize(atoms, window_sigmas, n_grid, delta2=delta2)
    if keys == {"uniform"}:
        a, b = spec["uniform"]
        return uniform(float(a), float(b), n_grid)
    if keys == {"laplace"}:
        return laplace(float(spec["laplace"].get("scale", 1.0)))
    if keys == {"exponential"}:
        return exponential(float(spec["exponential"].get("rate", 1.0)))
    raise MeasureError(f"unrecognized measure specification: {sorted(keys)}")


def _triple(c) -> tuple[float, float, float]:
    if isinstance(c, dict):
        return float(c["weight"]), float(c["mean"]), float(c["variance"])
    w, m, v = c
    return float(w), float(m), float(v)


def _pair(a: Sequence) -> tuple[float, float]:
    if isinstance(a, dict):
        return float(a["location"]), float(a["weight"])
    x, w = a
    return float(x), float(w)
