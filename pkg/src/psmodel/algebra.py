"""Exact algebra between the joint model parameters and the identifiable marginal ones.

For arm t with other arm o = 1 - t the observed (Y, S) | T = t is bivariate normal with

    E[S] = phi_t, Var[S] = sigma_st^2,
    E[Y] = mu'_yt = lambda_t + beta_t^T (phi0, phi1),
    Var[Y] = zeta_t = sigma_y^2 + beta_t^T Sigma_s beta_t,
    Cov[Y, S] = psi_t sigma_st, psi_t = sigma_st beta_tt + rho sigma_so beta_to.

Every identity below follows from zeta_t - psi_t^2 = sigma_y^2 + (1 - rho^2) sigma_so^2 beta_to^2.
"""

from math import sqrt
from typing import Optional, Tuple

import numpy as np

from src.default_constants import IDENTITY_RTOL
from src.errors import InfeasibleError
from src.math_functions import gaussian_logpdf
from src.psmodel.dataset import Dataset
from src.psmodel.params import JointParams, MarginalParams, PrincipalStratum


def marginalize(params: JointParams, at_x: Optional[np.ndarray] = None) -> MarginalParams:
    """Marginal parameters of the observed data. With at_x the covariate effects are folded
    into the means and the result carries no covariate coefficients."""
    sigma = np.array([params.sigma_s0, params.sigma_s1])
    cov = params.strata_cov()
    phi = params.strata_mean()
    gamma, alpha = params.gamma, params.alpha
    y_shift = 0.0
    if at_x is not None and params.n_covariates:
        at_x = np.asarray(at_x, dtype=float)
        phi = phi + params.alpha_vector() @ at_x
        y_shift = params.gamma_vector() @ at_x
        gamma, alpha = (), ()

    mu, zeta, psi = [], [], []
    for t in (0, 1):
        beta = params.beta(t)
        o = 1 - t
        mu.append(params.lam(t) + y_shift + beta @ phi)
        zeta.append(params.sigma_y2 + beta @ cov @ beta)
        psi.append(sigma[t] * beta[t] + params.rho * sigma[o] * beta[o])
    return MarginalParams(mu, phi, zeta, psi, sigma, gamma, alpha)


def feasible_sigma_y2_max(marg: MarginalParams) -> float:
    return min(marg.var_y_given_s(0), marg.var_y_given_s(1))


def violation_magnitude(marg: MarginalParams, t: int, rho: float, sigma_y2: float) -> float:
    """|beta_{t,1-t}| implied by sigma_y^2."""
    o = 1 - t
    excess = marg.var_y_given_s(t) - sigma_y2
    scale = abs(marg.var_y_given_s(t)) * IDENTITY_RTOL
    if excess < -scale:
        raise InfeasibleError(
            f"sigma_y2 = {sigma_y2:.10g} exceeds Var(Y|S, T={t}) = {marg.var_y_given_s(t):.10g}"
        )
    return sqrt(max(excess, 0.0) / ((1 - rho**2) * marg.sigma_s[o] ** 2))


def solve_joint(
    marg: MarginalParams,
    rho: float,
    sigma_y2: float,
    signs: Tuple[int, int] = (1, 1),
) -> JointParams:
    """The joint parameters that reproduce marg for a given rho, sigma_y^2 and signs of
    (beta01, beta10)."""
    if not abs(rho) < 1:
        raise InfeasibleError(f"|rho| must be below 1, got {rho}")
    if not sigma_y2 >= 0:
        raise InfeasibleError(f"sigma_y2 must be nonnegative, got {sigma_y2}")
    if any(s not in (-1, 1) for s in signs):
        raise ValueError(f"signs must be +1 or -1, got {signs}")

    betas = {}
    lambdas = {}
    for t in (0, 1):
        o = 1 - t
        off = signs[t] * violation_magnitude(marg, t, rho, sigma_y2)
        own = (marg.psi[t] - rho * marg.sigma_s[o] * off) / marg.sigma_s[t]
        beta = np.empty(2)
        beta[t], beta[o] = own, off
        betas[t] = beta
        lambdas[t] = marg.mu_y_prime[t] - beta @ np.array(marg.phi)

    return JointParams(
        beta0=tuple(betas[0]),
        beta1=tuple(betas[1]),
        lambda0=lambdas[0],
        lambda1=lambdas[1],
        # sigma_y2 = 0 is a limit point of the identified set; keep the record valid
        sigma_y2=max(sigma_y2, np.finfo(float).tiny),
        phi0=marg.phi[0],
        phi1=marg.phi[1],
        sigma_s0=marg.sigma_s[0],
        sigma_s1=marg.sigma_s[1],
        rho=rho,
        gamma=marg.gamma,
        alpha=marg.alpha,
    )


def pce_true(params: JointParams, u: PrincipalStratum) -> float:
    """E[Y(1) - Y(0) | U = u]."""
    b0, b1 = params.beta0, params.beta1
    return (b1[0] - b0[0]) * u.s0 + (b1[1] - b0[1]) * u.s1 + params.lambda1 - params.lambda0


def pce_from_marginal(
    marg: MarginalParams, rho: float, beta01: float, beta10: float, u: PrincipalStratum
) -> float:
    """The same effect written through the identifiable parameters and the violation pair."""
    s0, s1 = marg.sigma_s
    slope0 = beta10 - marg.psi[0] / s0 + (s1 / s0) * rho * beta01
    slope1 = marg.psi[1] / s1 - (s0 / s1) * rho * beta10 - beta01
    return (
        slope0 * (u.s0 - marg.phi[0])
        + slope1 * (u.s1 - marg.phi[1])
        + marg.mu_y_prime[1]
        - marg.mu_y_prime[0]
    )


def observed_moments_by_row(params: JointParams, data: Dataset):
    """Per row mean of S, mean of Y given S, and Var(Y | S) under the observed data model."""
    n = data.n
    t = data.t
    if params.n_covariates and data.p != params.n_covariates:
        raise ValueError(f"params use {params.n_covariates} covariates, data has {data.p}")
    if params.n_covariates:
        x_alpha = data.x @ params.alpha_vector()
        x_gamma = data.x @ params.gamma_vector()
    else:
        x_alpha = np.zeros(n)
        x_gamma = np.zeros(n)

    marg = marginalize(params)
    phi = np.array(marg.phi)
    sigma = np.array(marg.sigma_s)
    psi = np.array(marg.psi)
    v = np.array([marg.var_y_given_s(0), marg.var_y_given_s(1)])

    mean_s = phi[t] + x_alpha
    mean_y = np.array(marg.mu_y_prime)[t] + x_gamma + np.where(
        t == 1, params.beta1[0] + params.beta1[1], params.beta0[0] + params.beta0[1]
    ) * x_alpha
    cond_mean_y = mean_y + psi[t] / sigma[t] * (data.s - mean_s)
    return mean_s, sigma[t] ** 2, cond_mean_y, v[t]


def observed_loglik(params: JointParams, data: Dataset) -> float:
    """Log likelihood of the observed (Y, S) given T and X."""
    mean_s, var_s, cond_mean_y, var_y_given_s = observed_moments_by_row(params, data)
    return float(
        np.sum(gaussian_logpdf(data.s, mean_s, var_s))
        + np.sum(gaussian_logpdf(data.y, cond_mean_y, var_y_given_s))
    )
