"""Large-sample approximation of the posterior variance of rho, and the empirical rate check.

With the regression parameters known, each arm contributes Fisher information about rho
through its violation coefficient:

    I_t = w_t b^2 s^2 (2 rho^2 b^2 s^2 / V_t^2 + 1 / V_t)

with (w, b, s) = (T_bar, beta10, sigma_s0) for the treated arm and (1 - T_bar, beta01,
sigma_s1) for the control arm, and V_t = sigma_y^2 + (1 - rho^2) b^2 s^2 the conditional
variance of Y given S in that arm. The approximate posterior variance is 1 / (n (I_0 + I_1)).
"""

from dataclasses import dataclass
from math import inf, isinf
from typing import Sequence

import numpy as np

from src.psmodel.params import JointParams

NOT_ESTIMABLE = "not estimable"


@dataclass(frozen=True)
class AsymVarInputs:
    t_bar: float
    beta10: float
    beta01: float
    sigma_s0: float
    sigma_s1: float
    sigma_y2: float
    rho: float
    n: int

    def __post_init__(self):
        if not 0 < self.t_bar < 1:
            raise ValueError(f"treated fraction must lie in (0, 1), got {self.t_bar}")
        if not (self.sigma_s0 > 0 and self.sigma_s1 > 0 and self.sigma_y2 > 0):
            raise ValueError("standard deviations and sigma_y2 must be positive")
        if not -1 < self.rho < 1:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")

    def with_n(self, n: int):
        return AsymVarInputs(
            self.t_bar, self.beta10, self.beta01, self.sigma_s0, self.sigma_s1, self.sigma_y2, self.rho, n
        )


def _arm_information(weight, beta, sigma_other, sigma_y2, rho):
    scale = beta**2 * sigma_other**2
    v = sigma_y2 + (1 - rho**2) * scale
    return weight * scale * (2 * rho**2 * scale / v**2 + 1 / v)


def posterior_var_approx(inputs: AsymVarInputs) -> float:
    """Approximate posterior variance of rho; inf when neither arm violates principal ignorability."""
    information = _arm_information(
        inputs.t_bar, inputs.beta10, inputs.sigma_s0, inputs.sigma_y2, inputs.rho
    ) + _arm_information(1 - inputs.t_bar, inputs.beta01, inputs.sigma_s1, inputs.sigma_y2, inputs.rho)
    if information == 0:
        return inf
    return 1.0 / (inputs.n * information)


def from_joint(params: JointParams, t_bar: float, n: int) -> AsymVarInputs:
    return AsymVarInputs(
        t_bar=t_bar,
        beta10=params.beta10,
        beta01=params.beta01,
        sigma_s0=params.sigma_s0,
        sigma_s1=params.sigma_s1,
        sigma_y2=params.sigma_y2,
        rho=params.rho,
        n=n,
    )


def describe(value: float):
    """Report form of a variance: the number, or 'not estimable' when infinite."""
    return NOT_ESTIMABLE if isinf(value) else value


def rate_fit(n_values: Sequence[int], var_values: Sequence[float]) -> float:
    """Least squares slope of log(variance) on log(n)."""
    n_values = np.asarray(n_values, dtype=float)
    var_values = np.asarray(var_values, dtype=float)
    if len(n_values) != len(var_values):
        raise ValueError("n_values and var_values differ in length")
    if len(n_values) < 3:
        raise ValueError(f"a rate fit needs at least 3 sample sizes, got {len(n_values)}")
    if np.any(np.diff(n_values) <= 0):
        raise ValueError("sample sizes must be increasing")
    if np.any(var_values <= 0) or not np.all(np.isfinite(var_values)):
        raise ValueError("variances must be positive and finite")
    slope, _ = np.polyfit(np.log(n_values), np.log(var_values), 1)
    return float(slope)
