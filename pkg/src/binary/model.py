"""Linear outcome model with a binary intermediate.

Y(t) | U ~ N(lambda_t + beta_t0 S(0) + beta_t1 S(1), sigma_y^2) with the four strata
(S(0), S(1)) in {0, 1}^2 drawn with probabilities p00, p01, p10, p11. Here p11 plays the
part of rho: given the margins P(S(0) = 1) and P(S(1) = 1) it fixes the joint law of U.
"""

from dataclasses import dataclass, asdict, replace
from math import sqrt
from typing import Tuple

import numpy as np
from scipy.special import logsumexp

from src.math_functions import LOG_2PI
from src.probkit.rng_stream import RngStream, Interval
from src.psmodel.algebra import marginalize, solve_joint
from src.psmodel.dataset import Dataset
from src.psmodel.params import JointParams, MarginalParams
from src.psmodel.simulation import assign_treatment

# strata in the order of the probability fields, as (s0, s1)
CELLS = ((0, 0), (0, 1), (1, 0), (1, 1))
PROBABILITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class BinaryParams:
    beta0: Tuple[float, float]
    beta1: Tuple[float, float]
    lambda0: float
    lambda1: float
    sigma_y2: float
    p00: float
    p01: float
    p10: float
    p11: float

    def __post_init__(self):
        object.__setattr__(self, "beta0", tuple(float(b) for b in self.beta0))
        object.__setattr__(self, "beta1", tuple(float(b) for b in self.beta1))
        if not self.sigma_y2 > 0:
            raise ValueError(f"sigma_y2 must be positive, got {self.sigma_y2}")
        probs = self.probabilities()
        if np.any(probs < -PROBABILITY_TOLERANCE) or abs(probs.sum() - 1) > 1e-9:
            raise ValueError(f"strata probabilities must be nonnegative and sum to 1, got {probs}")

    @classmethod
    def from_margins(cls, p1_dot: float, p_dot1: float, p11: float, **outcome):
        """Builds the cell probabilities from P(S(0)=1), P(S(1)=1) and p11."""
        if not feasible_p11(p1_dot, p_dot1).contains(p11, tol=PROBABILITY_TOLERANCE):
            raise ValueError(f"p11={p11} is outside its feasible interval for margins ({p1_dot}, {p_dot1})")
        return cls(
            p00=1 - p1_dot - p_dot1 + p11,
            p01=p_dot1 - p11,
            p10=p1_dot - p11,
            p11=p11,
            **outcome,
        )

    def probabilities(self) -> np.ndarray:
        return np.array([self.p00, self.p01, self.p10, self.p11])

    def cell(self, s0: int, s1: int) -> float:
        return self.probabilities()[2 * s0 + s1]

    @property
    def p1_dot(self) -> float:
        """P(S(0) = 1)."""
        return self.p10 + self.p11

    @property
    def p_dot1(self) -> float:
        """P(S(1) = 1)."""
        return self.p01 + self.p11

    def beta(self, t: int) -> np.ndarray:
        return np.array(self.beta1 if t else self.beta0)

    def lam(self, t: int) -> float:
        return self.lambda1 if t else self.lambda0

    @property
    def beta01(self) -> float:
        return self.beta0[1]

    @property
    def beta10(self) -> float:
        return self.beta1[0]

    @property
    def sigma_y(self) -> float:
        return sqrt(self.sigma_y2)

    def strata_correlation(self) -> float:
        a, b = self.p1_dot, self.p_dot1
        return (self.p11 - a * b) / sqrt(a * (1 - a) * b * (1 - b))

    def as_joint(self) -> JointParams:
        """The same first and second moments written as a Gaussian-family parameter set."""
        a, b = self.p1_dot, self.p_dot1
        return JointParams(
            beta0=self.beta0,
            beta1=self.beta1,
            lambda0=self.lambda0,
            lambda1=self.lambda1,
            sigma_y2=self.sigma_y2,
            phi0=a,
            phi1=b,
            sigma_s0=sqrt(a * (1 - a)),
            sigma_s1=sqrt(b * (1 - b)),
            rho=self.strata_correlation(),
        )

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        values = asdict(self)
        values["beta0"] = list(self.beta0)
        values["beta1"] = list(self.beta1)
        return values

    @classmethod
    def from_dict(cls, values: dict):
        return cls(**values)


SETTING_BINARY = BinaryParams(
    beta0=(1.2, 0.6),
    beta1=(0.8, 1.2),
    lambda0=0.9,
    lambda1=0.5,
    sigma_y2=0.5**2,
    p00=0.1,
    p01=0.3,
    p10=0.2,
    p11=0.4,
)


def feasible_p11(p1_dot: float, p_dot1: float) -> Interval:
    """Values of p11 that keep every cell probability nonnegative."""
    return Interval(max(0.0, p1_dot + p_dot1 - 1.0), min(p1_dot, p_dot1))


def simulate_binary(params: BinaryParams, n: int, rng: RngStream) -> Dataset:
    if n < 1:
        raise ValueError(f"sample size must be positive, got {n}")
    t = assign_treatment(n, rng)
    cells = rng.gen.choice(len(CELLS), size=n, p=np.clip(params.probabilities(), 0.0, None))
    u = np.array(CELLS, dtype=float)[cells]
    beta = np.where(t[:, None] == 1, np.array(params.beta1), np.array(params.beta0))
    lam = np.where(t == 1, params.lambda1, params.lambda0)
    y = lam + np.sum(beta * u, axis=1) + params.sigma_y * rng.gen.standard_normal(n)
    s = np.where(t == 1, u[:, 1], u[:, 0])
    return Dataset(y, t, s, None, s0=u[:, 0], s1=u[:, 1])


def cell_weights(probs: np.ndarray, t, s):
    """P(S(t) = s, S(1-t) = 0) and P(S(t) = s, S(1-t) = 1), broadcast over rows."""
    t = np.asarray(t, dtype=int)
    s = np.asarray(s, dtype=int)
    s0_other0 = np.where(t == 0, s, 0)
    s1_other0 = np.where(t == 0, 0, s)
    s0_other1 = np.where(t == 0, s, 1)
    s1_other1 = np.where(t == 0, 1, s)
    return probs[..., 2 * s0_other0 + s1_other0], probs[..., 2 * s0_other1 + s1_other1]


def log_marginal_pdf_binary(y, s, t, params: BinaryParams):
    """log f_t(y, s): two normal components, the other-arm stratum summed out."""
    y = np.asarray(y, dtype=float)
    t_arr = np.asarray(t, dtype=int)
    s_arr = np.asarray(s, dtype=int)
    beta = np.where(t_arr[..., None] == 1, np.array(params.beta1), np.array(params.beta0))
    b_own = np.take_along_axis(beta, t_arr[..., None], axis=-1)[..., 0]
    b_off = np.take_along_axis(beta, 1 - t_arr[..., None], axis=-1)[..., 0]
    mean = np.where(t_arr == 1, params.lambda1, params.lambda0) + b_own * s_arr
    w0, w1 = cell_weights(params.probabilities(), t_arr, s_arr)
    base = -0.5 * (LOG_2PI + np.log(params.sigma_y2))
    with np.errstate(divide="ignore"):
        terms = np.stack(
            [
                np.log(w0) - (y - mean) ** 2 / (2 * params.sigma_y2),
                np.log(w1) - (y - mean - b_off) ** 2 / (2 * params.sigma_y2),
            ]
        )
    return base + logsumexp(terms, axis=0)


def marginal_pdf_binary(y, s, t, params: BinaryParams):
    return np.exp(log_marginal_pdf_binary(y, s, t, params))


def binary_loglik(params: BinaryParams, data: Dataset) -> float:
    """Log likelihood of the observed (Y, S) given T."""
    return float(np.sum(log_marginal_pdf_binary(data.y, data.s.astype(int), data.t, params)))


def binary_moments(params: BinaryParams) -> MarginalParams:
    """Marginal means, variances and covariances of (Y(t), S(t)) in each arm."""
    return marginalize(params.as_joint())


def rematch_binary(params: BinaryParams, sigma_y2: float, signs=(1, 1)) -> BinaryParams:
    """Another outcome model with the same moments as params, at the given sigma_y^2 and signs.

    The strata law is kept; beta and lambda are re-solved from the moment equations.
    """
    joint = solve_joint(binary_moments(params), params.strata_correlation(), sigma_y2, signs)
    return params.replace(
        beta0=joint.beta0,
        beta1=joint.beta1,
        lambda0=joint.lambda0,
        lambda1=joint.lambda1,
        sigma_y2=joint.sigma_y2,
    )


def sign_separation_check(a: BinaryParams, b: BinaryParams, y_grid, t: int = 0) -> float:
    """Largest |log f_t(y, s | a) - log f_t(y, s | b)| over y_grid and s in {0, 1}.

    Near zero: the two models cannot be told apart on the grid. Large: they can.
    """
    y_grid = np.asarray(y_grid, dtype=float)
    largest = 0.0
    for s in (0, 1):
        diff = log_marginal_pdf_binary(y_grid, s, t, a) - log_marginal_pdf_binary(y_grid, s, t, b)
        largest = max(largest, float(np.max(np.abs(diff))))
    return largest
