from math import isnan, log, inf
from typing import Callable, Tuple

import numpy as np
from scipy.special import logsumexp

from src.errors import EmptyRegionError
from src.probkit.rng_stream import RngStream, Interval


def reflect(x: float, bounds: Interval) -> float:
    """Folds x back into bounds by mirroring at the ends (as many times as needed)."""
    lo, hi = bounds.lo, bounds.hi
    if lo == -inf and hi == inf:
        return x
    if hi == inf:
        return x if x >= lo else 2 * lo - x
    if lo == -inf:
        return x if x <= hi else 2 * hi - x
    width = hi - lo
    if width == 0:
        return lo
    y = (x - lo) % (2 * width)
    if y > width:
        y = 2 * width - y
    return lo + y


def _finite_or_minus_inf(value) -> float:
    value = float(value)
    return -inf if isnan(value) else value


def mh_step(
    current: float,
    log_density: Callable[[float], float],
    proposal_sd: float,
    bounds: Interval,
    rng: RngStream,
) -> Tuple[float, bool]:
    """One random walk Metropolis step with the proposal reflected at the bounds.

    Reflection keeps the proposal symmetric, so the acceptance ratio is the density ratio.
    NaN densities at the proposal count as -inf.

    Returns:
        Tuple[float, bool]: (new value, whether the proposal was accepted)
    """
    if not proposal_sd > 0:
        raise ValueError(f"proposal sd must be positive, got {proposal_sd}")
    current_ld = float(log_density(current))
    if isnan(current_ld):
        raise ValueError(f"log density is NaN at the current value {current}")

    proposal = reflect(current + proposal_sd * rng.gen.standard_normal(), bounds)
    proposal_ld = _finite_or_minus_inf(log_density(proposal))

    log_u = log(1.0 - rng.gen.random())
    if log_u < proposal_ld - current_ld:
        return proposal, True
    return current, False


def grid_sample(
    log_density: Callable,
    grid: Interval,
    n_points: int,
    rng: RngStream,
    vectorized: bool = False,
) -> float:
    """Samples one point of a uniform grid over the interval, weighted by the density.

    If vectorized, log_density receives the whole grid as an array.
    """
    if n_points < 2:
        raise ValueError(f"grid needs at least 2 points, got {n_points}")
    points = np.linspace(grid.lo, grid.hi, n_points)
    if vectorized:
        values = np.asarray(log_density(points), dtype=float)
    else:
        values = np.array([log_density(p) for p in points], dtype=float)
    values = np.where(np.isnan(values), -inf, values)
    if not np.any(values > -inf):
        raise EmptyRegionError(
            f"density is zero on every grid point of [{grid.lo:.6g}, {grid.hi:.6g}]"
        )

    weights = np.exp(values - logsumexp(values))
    weights /= weights.sum()
    return float(points[rng.gen.choice(n_points, p=weights)])
