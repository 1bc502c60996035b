"""Full conditional updates of the continuous Gibbs sampler.

One iteration runs, in order: impute the missing intermediates, draw theta_y, draw theta_s,
draw sigma_y^2, update sigma_s0^2 and sigma_s1^2, update rho. Linear constraints enter
through theta_y = M theta_reduced; sign constraints through truncated coordinate draws;
the sigma_y^2 floor through a truncated inverse gamma draw.
"""

import logging
from dataclasses import dataclass
from math import exp, inf, sqrt
from typing import Dict, Optional

import numpy as np

from src.default_constants import DOMINANT_FLOOR_FACTOR
from src.probkit.numerical_methods import mh_step
from src.probkit.rng_stream import RngStream, Interval
from src.probkit.samplers import (
    sample_mvn_precision,
    sample_trunc_normal,
    sample_trunc_invgamma,
    sample_invgamma,
)
from src.psmodel.dataset import Dataset, residualize
from src.pir.moments import moments_from_data
from src.gibbs.settings import PriorSpec, ConstraintSet, ChainConfig
from src.gibbs.state import ChainState

log = logging.getLogger(__name__)

UNBOUNDED = Interval(-inf, inf)


def sigma_y2_floor(data: Dataset, constraints: ConstraintSet) -> float:
    """Lower truncation point of sigma_y^2, from plug in moments of the covariate free data."""
    moments = moments_from_data(residualize(data))
    floor = constraints.sigma_y2_floor_frac * min(moments.var_y)
    if constraints.dominant_effect:
        dominant = DOMINANT_FLOOR_FACTOR * min(
            moments.var_y_given_s[t] ** 2 / moments.var_y[t] for t in (0, 1)
        )
        floor = max(floor, dominant)
    log.debug("sigma_y2 floor %.6g (regime %s)", floor, constraints.regime)
    return floor


@dataclass
class ChainContext:
    """Everything a chain needs that does not change between iterations."""

    y: np.ndarray
    t: np.ndarray
    s: np.ndarray
    x: np.ndarray
    prior: PriorSpec
    constraints: ConstraintSet
    config: ChainConfig
    linear_map: np.ndarray
    reduce_index: np.ndarray
    prior_red_precision: np.ndarray
    prior_red_linear: np.ndarray
    sign_constraints: Dict[int, int]
    theta_s_prior_mean: np.ndarray
    theta_s_prior_var: np.ndarray
    sigma_y2_floor: float
    sign_beta_tt: tuple
    rho_bounds: Interval

    @property
    def n(self):
        return len(self.y)

    @property
    def p(self):
        return self.x.shape[1]

    @classmethod
    def build(cls, data: Dataset, prior: PriorSpec, constraints: ConstraintSet, config: ChainConfig):
        p = data.p
        linear_map = constraints.get_linear_map(p)
        # first full coordinate behind each reduced one
        reduce_index = np.array([int(np.flatnonzero(col)[0]) for col in linear_map.T], dtype=int)

        mean, variance = prior.get_theta_y_prior(p)
        precision = np.diag(1.0 / variance)
        red_precision = linear_map.T @ precision @ linear_map
        red_linear = linear_map.T @ (mean / variance)

        moments = moments_from_data(residualize(data))
        s_mean, s_var = prior.get_theta_s_prior(p)
        return cls(
            y=data.y,
            t=data.t,
            s=data.s,
            x=data.x,
            prior=prior,
            constraints=constraints,
            config=config,
            linear_map=linear_map,
            reduce_index=reduce_index,
            prior_red_precision=red_precision,
            prior_red_linear=red_linear,
            sign_constraints=constraints.get_reduced_sign_constraints(moments.sign_beta_tt, p),
            theta_s_prior_mean=s_mean,
            theta_s_prior_var=s_var,
            sigma_y2_floor=sigma_y2_floor(data, constraints),
            sign_beta_tt=moments.sign_beta_tt,
            rho_bounds=Interval(*prior.rho_interval),
        )

    def reduce(self, theta_y: np.ndarray) -> np.ndarray:
        return theta_y[self.reduce_index].copy()


def complete_strata(s_missing: np.ndarray, ctx: ChainContext):
    """(S(0), S(1)) for every row, observed value in its own arm and imputed in the other."""
    s0 = np.where(ctx.t == 0, ctx.s, s_missing)
    s1 = np.where(ctx.t == 1, ctx.s, s_missing)
    return s0, s1


def outcome_design(s0, s1, t, x) -> np.ndarray:
    """Rows d_i = (u_i (1 - t_i), u_i t_i, 1 - t_i, t_i, x_i)."""
    c = 1 - t
    return np.column_stack([s0 * c, s1 * c, s0 * t, s1 * t, c, t, x])


def _covariate_shift(theta, x):
    return x @ theta if x.shape[1] else np.zeros(x.shape[0])


# step a


def imputation_moments(state: ChainState, ctx: ChainContext):
    """Mean and variance of each missing S(1 - T_i) given everything else."""
    t = ctx.t
    o = 1 - t
    beta = state.theta_y[:4].reshape(2, 2)
    b_own = beta[t, t]
    b_off = beta[t, o]
    lam = state.theta_y[4 + t]
    x_gamma = _covariate_shift(state.theta_y[6:], ctx.x)
    x_alpha = _covariate_shift(state.theta_s[2:], ctx.x)
    phi = state.theta_s[:2]
    sd = np.sqrt(state.sigma2_s)
    rho = state.rho

    prior_mean = phi[o] + x_alpha + rho * sd[o] / sd[t] * (ctx.s - phi[t] - x_alpha)
    prior_var = state.sigma2_s[o] * (1 - rho**2)
    precision = b_off**2 / state.sigma_y2 + 1.0 / prior_var
    partial = ctx.y - lam - x_gamma - b_own * ctx.s
    mean = (b_off * partial / state.sigma_y2 + prior_mean / prior_var) / precision
    return mean, 1.0 / precision


def impute_missing(state: ChainState, ctx: ChainContext, rng: RngStream):
    mean, var = imputation_moments(state, ctx)
    state.s_missing = mean + np.sqrt(var) * rng.gen.standard_normal(ctx.n)


# step b


def theta_y_conditional(design: np.ndarray, sigma_y2: float, ctx: ChainContext):
    """Precision and linear term of the reduced theta_y full conditional."""
    reduced_design = design @ ctx.linear_map
    precision = ctx.prior_red_precision + reduced_design.T @ reduced_design / sigma_y2
    linear = ctx.prior_red_linear + reduced_design.T @ ctx.y / sigma_y2
    return precision, linear


def draw_theta_y(design, sigma_y2, current_theta_y, ctx: ChainContext, rng: RngStream) -> np.ndarray:
    precision, linear = theta_y_conditional(design, sigma_y2, ctx)
    if not ctx.sign_constraints:
        reduced, _ = sample_mvn_precision(linear, precision, rng)
        return ctx.linear_map @ reduced

    reduced = ctx.reduce(current_theta_y)
    constrained = sorted(ctx.sign_constraints)
    for k in constrained:
        rest = precision[k] @ reduced - precision[k, k] * reduced[k]
        mean = (linear[k] - rest) / precision[k, k]
        lo, hi = (0.0, inf) if ctx.sign_constraints[k] > 0 else (-inf, 0.0)
        reduced[k] = sample_trunc_normal(mean, 1.0 / precision[k, k], lo, hi, rng)
    free = [k for k in range(len(reduced)) if k not in ctx.sign_constraints]
    if free:
        block = precision[np.ix_(free, free)]
        shifted = linear[free] - precision[np.ix_(free, constrained)] @ reduced[constrained]
        reduced[free], _ = sample_mvn_precision(shifted, block, rng)
    return ctx.linear_map @ reduced


def update_theta_y(state: ChainState, ctx: ChainContext, rng: RngStream):
    s0, s1 = complete_strata(state.s_missing, ctx)
    design = outcome_design(s0, s1, ctx.t, ctx.x)
    state.theta_y = draw_theta_y(design, state.sigma_y2, state.theta_y, ctx, rng)


# step c


def strata_precision(sigma2_s: np.ndarray, rho: float) -> np.ndarray:
    sd0, sd1 = np.sqrt(sigma2_s)
    cov = np.array([[sigma2_s[0], rho * sd0 * sd1], [rho * sd0 * sd1, sigma2_s[1]]])
    return np.linalg.inv(cov)


def theta_s_conditional(state: ChainState, ctx: ChainContext):
    """Precision and linear term of the (phi0, phi1, alpha) full conditional."""
    s0, s1 = complete_strata(state.s_missing, ctx)
    (a, b), (_, c) = strata_precision(state.sigma2_s, state.rho)
    ones, zeros = np.ones(ctx.n), np.zeros(ctx.n)
    e0 = np.column_stack([ones, zeros, ctx.x])
    e1 = np.column_stack([zeros, ones, ctx.x])
    cross = e0.T @ e1
    precision = (
        np.diag(1.0 / ctx.theta_s_prior_var)
        + a * e0.T @ e0
        + b * (cross + cross.T)
        + c * e1.T @ e1
    )
    linear = (
        ctx.theta_s_prior_mean / ctx.theta_s_prior_var
        + e0.T @ (a * s0 + b * s1)
        + e1.T @ (b * s0 + c * s1)
    )
    return precision, linear


def update_theta_s(state: ChainState, ctx: ChainContext, rng: RngStream):
    precision, linear = theta_s_conditional(state, ctx)
    state.theta_s, _ = sample_mvn_precision(linear, precision, rng)


# step d


def draw_sigma_y2(residuals: np.ndarray, ctx: ChainContext, rng: RngStream) -> float:
    shape, rate = ctx.prior.get_ig("sigma_y2")
    return sample_trunc_invgamma(
        len(residuals) / 2 + shape, residuals @ residuals / 2 + rate, ctx.sigma_y2_floor, rng
    )


def update_sigma_y2(state: ChainState, ctx: ChainContext, rng: RngStream):
    s0, s1 = complete_strata(state.s_missing, ctx)
    residuals = ctx.y - outcome_design(s0, s1, ctx.t, ctx.x) @ state.theta_y
    state.sigma_y2 = draw_sigma_y2(residuals, ctx, rng)


# step e


def strata_residual_sums(state: ChainState, ctx: ChainContext):
    s0, s1 = complete_strata(state.s_missing, ctx)
    x_alpha = _covariate_shift(state.theta_s[2:], ctx.x)
    r0 = s0 - state.theta_s[0] - x_alpha
    r1 = s1 - state.theta_s[1] - x_alpha
    return r0 @ r0, r0 @ r1, r1 @ r1


def sigma_s_log_target(t: int, state: ChainState, ctx: ChainContext, sums):
    """Log conditional density of log sigma_st^2 (Jacobian included)."""
    a, b, c = sums
    n = ctx.n
    rho = state.rho
    shape, rate = ctx.prior.get_ig(f"sigma_s{t}")
    other = state.sigma2_s[1 - t]

    def log_target(log_v):
        v = exp(log_v)
        v0, v1 = (v, other) if t == 0 else (other, v)
        quad = (a / v0 - 2 * rho * b / sqrt(v0 * v1) + c / v1) / (1 - rho**2)
        loglik = -0.5 * n * np.log(v0 * v1) - 0.5 * quad
        return loglik - (shape + 1) * log_v - rate / v + log_v

    return log_target


def update_sigma_s(state: ChainState, ctx: ChainContext, rng: RngStream) -> Optional[Dict[str, bool]]:
    sums = strata_residual_sums(state, ctx)
    if ctx.constraints.equal_sigma_s:
        a, b, c = sums
        shape, rate = ctx.prior.get_ig("sigma_s0")
        quad = (a - 2 * state.rho * b + c) / (1 - state.rho**2)
        value = sample_invgamma(ctx.n + shape, quad / 2 + rate, rng)
        state.sigma2_s = np.array([value, value])
        return None

    accepted = {}
    for t in (0, 1):
        log_target = sigma_s_log_target(t, state, ctx, sums)
        new_log_v, ok = mh_step(
            np.log(state.sigma2_s[t]), log_target, ctx.config.sigma_s_proposal_sd, UNBOUNDED, rng
        )
        state.sigma2_s[t] = exp(new_log_v)
        accepted[f"sigma2_s{t}"] = ok
    return accepted


# step f


def rho_log_posterior(state: ChainState, ctx: ChainContext):
    """Log marginal posterior of rho given the observed intermediates only (flat prior)."""
    theta_y, theta_s = state.theta_y, state.theta_s
    x_gamma = _covariate_shift(theta_y[6:], ctx.x)
    x_alpha = _covariate_shift(theta_s[2:], ctx.x)
    beta = theta_y[:4].reshape(2, 2)
    sd = np.sqrt(state.sigma2_s)

    arms = []
    for t in (0, 1):
        mask = ctx.t == t
        o = 1 - t
        mean_s = theta_s[:2][None, :] + x_alpha[mask][:, None]
        y2 = ctx.y[mask] - theta_y[4 + t] - x_gamma[mask] - mean_s @ beta[t]
        s2 = ctx.s[mask] - theta_s[t] - x_alpha[mask]
        arms.append((int(mask.sum()), y2 @ y2, y2 @ s2, s2 @ s2, sd[t], sd[o], beta[t, t], beta[t, o]))

    sigma_y2 = state.sigma_y2

    def log_density(rho):
        total = 0.0
        for n_t, syy, sys, sss, sd_own, sd_other, b_own, b_off in arms:
            psi = sd_own * b_own + rho * sd_other * b_off
            k = psi / sd_own
            v = sigma_y2 + (1 - rho**2) * sd_other**2 * b_off**2
            total -= 0.5 * n_t * np.log(v) + (syy - 2 * k * sys + k * k * sss) / (2 * v)
        return total

    return log_density


def update_rho(state: ChainState, ctx: ChainContext, rng: RngStream) -> Optional[Dict[str, bool]]:
    if ctx.constraints.rho_fixed is not None:
        state.rho = ctx.constraints.rho_fixed
        return None
    state.rho, ok = mh_step(
        state.rho, rho_log_posterior(state, ctx), ctx.config.rho_proposal_sd, ctx.rho_bounds, rng
    )
    return {"rho": ok}


# order of one sweep
GIBBS_STEPS = (
    ("impute_missing", impute_missing),
    ("update_theta_y", update_theta_y),
    ("update_theta_s", update_theta_s),
    ("update_sigma_y2", update_sigma_y2),
    ("update_sigma_s", update_sigma_s),
    ("update_rho", update_rho),
)
