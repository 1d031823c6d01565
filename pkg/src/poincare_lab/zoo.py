"""Built-in test measures with known (or bracketed) Poincaré constants."""

from __future__ import annotations

from .measures import (
    DiscreteAtoms,
    GaussianMixtureSpec,
    GridMeasure,
    exponential,
    gaussian,
    laplace,
    materialize,
    uniform,
)

ZOO_NAMES = ("gaussian_std", "uniform01", "laplace1", "exponential1",
             "bernoulli_smooth_0.25", "bernoulli_smooth_0.5", "gaussian_mixture_sym")

SYMMETRIC_BERNOULLI = DiscreteAtoms(((-0.5, 0.5), (0.5, 0.5)))


def zoo(n_grid: int = 4096) -> dict[str, GridMeasure]:
    """Named measures, in a fixed order.

    Laplace and exponential use a +/-80 window: their spectral gap is the
    bottom of a continuous spectrum, and the truncated Neumann problem only
    approaches it like ``(pi / width)**2``.
    """
    return {
        "gaussian_std": gaussian(0.0, 1.0, n_grid=n_grid),
        "uniform01": uniform(0.0, 1.0, n_grid),
        "laplace1": laplace(1.0),
        "exponential1": exponential(1.0),
        "bernoulli_smooth_0.25": materialize(SYMMETRIC_BERNOULLI, n_grid=n_grid, delta2=0.25),
        "bernoulli_smooth_0.5": materialize(SYMMETRIC_BERNOULLI, n_grid=n_grid, delta2=0.5),
        "gaussian_mixture_sym": materialize(
            GaussianMixtureSpec(((0.5, -1.0, 1.0), (0.5, 1.0, 1.0))), n_grid=n_grid),
    }
