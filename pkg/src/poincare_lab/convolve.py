"""Convolutions of grid measures and standardized CLT sums."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.signal import fftconvolve

from .measures import (
    DiscreteAtoms,
    GridMeasure,
    MeasureError,
    affine_pushforward,
    materialize,
    refine,
    resample,
    trapezoid_weights,
)
from .spectral import estimate_cp
from .transport import DEFAULT_NODES, matched_gaussian, w2_quantile

# Output tails below this fraction of the peak are cut. FFT round-off puts a
# noise floor near 1e-16 of the peak, and a noisy far tail would poison the
# spectral estimate (tail mass times inverse density is scale free).
CONV_TRIM = 1e-13
MAX_NODES = 2 ** 23
MAX_CLIPPED_MASS = 1e-9


class ConvolutionError(RuntimeError):
    pass


def _trim(lo: float, step: float, values: np.ndarray) -> GridMeasure:
    alive = np.flatnonzero(values > CONV_TRIM * values.max())
    i, j = alive[0], alive[-1]
    if j - i + 1 < 16:
        pad = (16 - (j - i + 1)) // 2 + 1
        i, j = max(i - pad, 0), min(j + pad, values.size - 1)
    return GridMeasure(lo + i * step, lo + j * step, values[i:j + 1])


def _on_lattice(mu: GridMeasure, step: float) -> np.ndarray:
    """Samples of ``mu`` at ``lo + k * step`` covering its window, zero beyond ``hi``."""
    if math.isclose(mu.step, step, rel_tol=1e-12):
        return mu.values
    n = int(math.ceil((mu.hi - mu.lo) / step - 1e-9)) + 1
    if n > MAX_NODES:
        raise ConvolutionError(f"resampling would need {n} nodes")
    return resample(mu, mu.lo, mu.lo + (n - 1) * step, n).values


def convolve_pair(mu: GridMeasure, nu: GridMeasure) -> GridMeasure:
    """Density of ``X + Y`` for independent ``X ~ mu`` and ``Y ~ nu``.

    The coarser measure is resampled onto the finer step. The discrete
    convolution uses trapezoidal end weights, so jump discontinuities at the
    window edges (uniform densities) are integrated to second order.
    """
    step = min(mu.step, nu.step)
    a = _on_lattice(mu, step)
    b = _on_lattice(nu, step)
    if a.size + b.size > MAX_NODES:
        raise ConvolutionError("convolution exceeds the memory guard")
    a = a * trapezoid_weights(a.size, 1.0)
    b = b * trapezoid_weights(b.size, 1.0)
    out = step * fftconvolve(a, b)
    negative = out < 0
    if negative.any():
        clipped = -step * out[negative].sum()
        if clipped > MAX_CLIPPED_MASS:
            raise ConvolutionError(f"clipped mass {clipped:.3g} exceeds tolerance")
        out[negative] = 0.0
    return _trim(mu.lo + nu.lo, step, out)


def gaussian_smooth(mu: GridMeasure, delta2: float) -> GridMeasure:
    """Convolve with ``N(0, delta2)`` sampled exactly on the lattice of ``mu``.

    The lattice is refined until the kernel spans at least two steps per
    standard deviation, which keeps the added variance equal to ``delta2``.
    """
    if not delta2 > 0:
        raise MeasureError("delta2 must be positive")
    sd = math.sqrt(delta2)
    mu = refine(mu, sd / 2)
    h = mu.step
    half = int(math.ceil(10 * sd / h))
    x = h * np.arange(-half, half + 1)
    kernel = GridMeasure(x[0], x[-1], np.exp(-0.5 * x * x / delta2))
    return convolve_pair(mu, kernel)


def self_convolve(base: GridMeasure, n: int) -> GridMeasure:
    """``n``-fold convolution power by binary powering."""
    if n < 1:
        raise ValueError("n must be at least 1")
    result = None
    power = base
    while True:
        if n & 1:
            result = power if result is None else convolve_pair(result, power)
        n >>= 1
        if not n:
            return result
        power = convolve_pair(power, power)


def standardized_sum(base: GridMeasure, n: int) -> GridMeasure:
    """Law of ``n**-0.5 * sum(X_i - E X)`` for ``n`` i.i.d. draws from ``base``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not base.variance() > 0:
        raise MeasureError("base must have positive variance")
    total = self_convolve(base, n)
    root = math.sqrt(n)
    return affine_pushforward(total, 1.0 / root, -total.mean() / root)


def atoms_convolve(a: DiscreteAtoms, b: DiscreteAtoms, decimals: int = 12) -> DiscreteAtoms:
    locs = np.add.outer(a.locations, b.locations).ravel()
    probs = np.multiply.outer(a.probabilities, b.probabilities).ravel()
    keys = np.round(locs, decimals)
    uniq, inv = np.unique(keys, return_inverse=True)
    merged = np.bincount(inv, weights=probs)
    return DiscreteAtoms(tuple(zip(uniq.tolist(), (merged / merged.sum()).tolist())))


def standardized_atoms(base: DiscreteAtoms, n: int) -> DiscreteAtoms:
    """Exact standardized sum of ``n`` i.i.d. atomic variables."""
    if n < 1:
        raise ValueError("n must be at least 1")
    result, power, k = None, base, n
    while True:
        if k & 1:
            result = power if result is None else atoms_convolve(result, power)
        k >>= 1
        if not k:
            break
        power = atoms_convolve(power, power)
    root = math.sqrt(n)
    m = result.mean()
    return DiscreteAtoms(tuple(((x - m) / root, w) for x, w in result.atoms))


@dataclass(frozen=True)
class CltEntry:
    n: int
    measure: GridMeasure = field(repr=False)
    c_p: float
    sigma2: float
    w2_to_gaussian: float


@dataclass(frozen=True)
class CltTrace:
    base: Union[GridMeasure, DiscreteAtoms] = field(repr=False)
    delta2: float
    entries: tuple

    def c_p_column(self) -> np.ndarray:
        return np.array([e.c_p for e in self.entries])

    def rows(self) -> list[dict]:
        """CSV rows: ``n, c_p, sigma2, w2_sq, bound_example2, bound_smoothing``.

        Without regularization the comparison bound is the previous constant;
        with it, the constant at ``n = 1``. The smoothing cap only applies
        when ``delta2 > 0``.
        """
        from .bounds import smoothing_constant_bound

        rows = []
        cap = smoothing_constant_bound(self.delta2).value if self.delta2 > 0 else None
        for i, e in enumerate(self.entries):
            if self.delta2 > 0:
                ref = self.entries[0].c_p if self.entries[0].n == 1 else None
            else:
                ref = self.entries[i - 1].c_p if i > 0 else None
            rows.append({
                "n": e.n,
                "c_p": e.c_p,
                "sigma2": e.sigma2,
                "w2_sq": e.w2_to_gaussian ** 2,
                "bound_example2": ref,
                "bound_smoothing": cap,
            })
        return rows


def regularized_sum(base: Union[GridMeasure, DiscreteAtoms], n: int, delta2: float,
                    n_grid: int = 4096, window_sigmas: float = 10.0) -> GridMeasure:
    """``nu_n`` smoothed by ``N(0, delta2 / n)`` after standardization.

    Atomic bases are summed exactly and smoothed in closed form.
    """
    if isinstance(base, DiscreteAtoms):
        if not delta2 > 0:
            raise MeasureError("atomic bases need positive regularization")
        atoms = standardized_atoms(base, n)
        return materialize(atoms, window_sigmas, n_grid, delta2=delta2 / n)
    nu = standardized_sum(base, n)
    return gaussian_smooth(nu, delta2 / n) if delta2 > 0 else nu


def clt_trace(base: Union[GridMeasure, DiscreteAtoms], n_list: Sequence[int],
              delta2: float = 0.0, w2_nodes: int = DEFAULT_NODES,
              n_grid: int = 4096, window_sigmas: float = 10.0) -> CltTrace:
    n_list = [int(n) for n in n_list]
    if any(n < 1 for n in n_list) or n_list != sorted(n_list):
        raise ValueError("n_list must be ascending positive integers")
    if delta2 < 0:
        raise ValueError("delta2 must be nonnegative")
    entries = []
    for n in n_list:
        nu = regularized_sum(base, n, delta2, n_grid, window_sigmas)
        res = estimate_cp(nu, refine=False)
        w2 = w2_quantile(nu, matched_gaussian(nu), w2_nodes)
        entries.append(CltEntry(n, nu, res.c_p, nu.variance(), w2))
    return CltTrace(base, float(delta2), tuple(entries))
