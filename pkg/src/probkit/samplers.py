from math import exp, log, sqrt, isfinite
import sys

import numpy as np
from scipy.special import ndtr, ndtri, gammainc, gammaincinv

from src.default_constants import (
    TRUNC_NORMAL_TAIL_SD,
    MAX_REJECTIONS,
    REJECTION_MIN_MASS,
    MIN_TRUNCATION_MASS,
)
from src.errors import DecompositionError, TruncationMassError
from src.probkit.rng_stream import RngStream

LOG_MAX_FLOAT = log(sys.float_info.max)


def cholesky(matrix: np.ndarray, what: str = "covariance") -> np.ndarray:
    """Lower Cholesky factor, or DecompositionError if the matrix is not positive definite."""
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as err:
        raise DecompositionError(f"{what} matrix is not positive definite ({err})") from err


def sample_mvn(mean, cov, rng: RngStream) -> np.ndarray:
    """One draw from N(mean, cov)."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape != (mean.size, mean.size):
        raise ValueError(f"covariance shape {cov.shape} does not match mean of size {mean.size}")
    factor = cholesky(cov)
    return mean + factor @ rng.gen.standard_normal(mean.size)


def sample_mvn_precision(linear, precision, rng: RngStream):
    """One draw from N(P^-1 b, P^-1) given the precision P and linear term b.

    This is the shape every conjugate Gaussian full conditional comes in. Returns (draw, mean).
    """
    linear = np.atleast_1d(np.asarray(linear, dtype=float))
    precision = np.atleast_2d(np.asarray(precision, dtype=float))
    factor = cholesky(precision, "precision")
    # P = L L^T, mean = L^-T L^-1 b, noise = L^-T z
    half = np.linalg.solve(factor, linear)
    mean = np.linalg.solve(factor.T, half)
    noise = np.linalg.solve(factor.T, rng.gen.standard_normal(linear.size))
    return mean + noise, mean


def truncated_normal_mass(mean: float, var: float, lo: float, hi: float) -> float:
    sd = sqrt(var)
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    if a > 0:
        return float(ndtr(-a) - ndtr(-b))
    return float(ndtr(b) - ndtr(a))


def sample_trunc_normal(mean: float, var: float, lo: float, hi: float, rng: RngStream) -> float:
    """One draw from N(mean, var) restricted to [lo, hi]; either end may be infinite."""
    if not var > 0:
        raise ValueError(f"variance must be positive, got {var}")
    if not lo < hi:
        raise ValueError(f"empty truncation interval [{lo}, {hi}]")

    sd = sqrt(var)
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    mass = truncated_normal_mass(mean, var, lo, hi)
    if not mass >= MIN_TRUNCATION_MASS:
        raise TruncationMassError(
            f"N({mean:.6g}, {var:.6g}) has mass {mass:.3g} on [{lo}, {hi}]; "
            "the constraint is incompatible with the conditional"
        )

    far_tail = a > TRUNC_NORMAL_TAIL_SD or b < -TRUNC_NORMAL_TAIL_SD
    if not far_tail and mass >= REJECTION_MIN_MASS:
        for _ in range(MAX_REJECTIONS):
            z = rng.gen.standard_normal()
            if a <= z <= b:
                return mean + sd * z

    # inverse cdf, evaluated in whichever tail keeps precision
    u = rng.gen.random()
    if a > 0:
        upper, lower = ndtr(-a), ndtr(-b)
        z = -ndtri(lower + u * (upper - lower))
    else:
        lower, upper = ndtr(a), ndtr(b)
        z = ndtri(lower + u * (upper - lower))
    return float(min(max(mean + sd * z, lo), hi))


def _log_gamma_draw(shape: float, rng: RngStream) -> float:
    """log of a Gamma(shape, 1) draw, stable for tiny shapes."""
    if shape >= 1:
        return log(rng.gen.standard_gamma(shape))
    # G = G' U^(1/shape) with G' ~ Gamma(shape + 1)
    u = 1.0 - rng.gen.random()
    return log(rng.gen.standard_gamma(shape + 1.0)) + log(u) / shape


def sample_invgamma(shape: float, rate: float, rng: RngStream) -> float:
    """One draw from IG(shape, rate); clipped to the largest float instead of overflowing."""
    log_x = log(rate) - _log_gamma_draw(shape, rng)
    return exp(min(log_x, LOG_MAX_FLOAT))


def sample_trunc_invgamma(shape: float, rate: float, lo: float, rng: RngStream) -> float:
    """One draw from IG(shape, rate) restricted to [lo, inf)."""
    if not (shape > 0 and rate > 0):
        raise ValueError(f"inverse gamma needs positive shape and rate, got ({shape}, {rate})")
    if not (isfinite(lo) and lo >= 0):
        raise ValueError(f"lower truncation point must be finite and nonnegative, got {lo}")
    if lo == 0:
        return sample_invgamma(shape, rate, rng)

    # X >= lo  <=>  1/X = G/rate <= 1/lo
    mass = float(gammainc(shape, rate / lo))
    if not mass >= MIN_TRUNCATION_MASS:
        raise TruncationMassError(
            f"IG({shape:.6g}, {rate:.6g}) has upper tail mass {mass:.3g} beyond {lo:.6g}; "
            "loosen the sigma_y^2 floor"
        )
    if mass >= REJECTION_MIN_MASS:
        for _ in range(MAX_REJECTIONS):
            x = sample_invgamma(shape, rate, rng)
            if x >= lo:
                return x

    u = 1.0 - rng.gen.random()
    g = float(gammaincinv(shape, u * mass))
    if g <= 0:
        return lo
    return max(rate / g, lo)


def sample_dirichlet(alphas, rng: RngStream) -> np.ndarray:
    alphas = np.asarray(alphas, dtype=float)
    if np.any(~(alphas > 0)):
        raise ValueError(f"dirichlet concentrations must be positive, got {alphas}")
    draw = rng.gen.dirichlet(alphas)
    return draw / draw.sum()
