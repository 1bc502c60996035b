from typing import Callable, Optional

import numpy as np

from src.probkit.rng_stream import RngStream
from src.probkit.samplers import cholesky
from src.psmodel.dataset import Dataset
from src.psmodel.params import JointParams

# (n, rng) -> n x p covariate matrix
CovariateGenerator = Callable[[int, RngStream], np.ndarray]


def standard_normal_covariates(p: int) -> CovariateGenerator:
    return lambda n, rng: rng.gen.standard_normal((n, p))


def assign_treatment(n: int, rng: RngStream) -> np.ndarray:
    """Randomized design, T ~ Bernoulli(0.5) independently."""
    return (rng.gen.random(n) < 0.5).astype(int)


def simulate(
    params: JointParams,
    n: int,
    x_gen: Optional[CovariateGenerator],
    rng: RngStream,
) -> Dataset:
    """Draws n rows from the joint model, truth columns included."""
    if n < 1:
        raise ValueError(f"sample size must be positive, got {n}")
    p = params.n_covariates
    if p and x_gen is None:
        raise ValueError(f"params use {p} covariates but no covariate generator was given")

    x = np.asarray(x_gen(n, rng), dtype=float).reshape(n, -1) if x_gen is not None else np.empty((n, 0))
    if p and x.shape[1] != p:
        raise ValueError(f"covariate generator returned {x.shape[1]} columns, params use {p}")

    t = assign_treatment(n, rng)
    x_alpha = x @ params.alpha_vector() if p else np.zeros(n)
    x_gamma = x @ params.gamma_vector() if p else np.zeros(n)

    factor = cholesky(params.strata_cov())
    u = params.strata_mean() + x_alpha[:, None] + rng.gen.standard_normal((n, 2)) @ factor.T

    beta = np.where(t[:, None] == 1, np.array(params.beta1), np.array(params.beta0))
    lam = np.where(t == 1, params.lambda1, params.lambda0)
    y = lam + np.sum(beta * u, axis=1) + x_gamma + params.sigma_y * rng.gen.standard_normal(n)
    s = np.where(t == 1, u[:, 1], u[:, 0])
    return Dataset(y, t, s, x if x.shape[1] else None, s0=u[:, 0], s1=u[:, 1])
