from dataclasses import dataclass, field, replace
from math import sqrt
from typing import Tuple

import numpy as np


def _pair(values) -> Tuple[float, float]:
    a, b = values
    return float(a), float(b)


def _vector(values) -> Tuple[float, ...]:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class PrincipalStratum:
    """A principal stratum u = (S(0), S(1))."""

    s0: float
    s1: float

    def as_array(self):
        return np.array([self.s0, self.s1])


@dataclass(frozen=True)
class JointParams:
    """Full parameter set of the joint outcome / strata model.

    beta0 = (beta00, beta01) and beta1 = (beta10, beta11) are the outcome slopes on
    (S(0), S(1)) in the control and treated arm. beta01 and beta10 are the violation
    coefficients.
    """

    beta0: Tuple[float, float]
    beta1: Tuple[float, float]
    lambda0: float
    lambda1: float
    sigma_y2: float
    phi0: float
    phi1: float
    sigma_s0: float
    sigma_s1: float
    rho: float
    gamma: Tuple[float, ...] = ()
    alpha: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "beta0", _pair(self.beta0))
        object.__setattr__(self, "beta1", _pair(self.beta1))
        object.__setattr__(self, "gamma", _vector(self.gamma) if len(self.gamma) else ())
        object.__setattr__(self, "alpha", _vector(self.alpha) if len(self.alpha) else ())
        if not self.sigma_y2 > 0:
            raise ValueError(f"sigma_y2 must be positive, got {self.sigma_y2}")
        if not (self.sigma_s0 > 0 and self.sigma_s1 > 0):
            raise ValueError(f"strata sds must be positive, got ({self.sigma_s0}, {self.sigma_s1})")
        if not abs(self.rho) < 1:
            raise ValueError(f"|rho| must be below 1, got {self.rho}")
        if len(self.gamma) != len(self.alpha) and len(self.gamma) and len(self.alpha):
            raise ValueError("gamma and alpha must have the same number of covariates")

    @property
    def n_covariates(self):
        return max(len(self.gamma), len(self.alpha))

    @property
    def sigma_y(self):
        return sqrt(self.sigma_y2)

    @property
    def beta01(self):
        return self.beta0[1]

    @property
    def beta10(self):
        return self.beta1[0]

    def beta(self, t: int) -> np.ndarray:
        return np.array(self.beta1 if t else self.beta0)

    def lam(self, t: int) -> float:
        return self.lambda1 if t else self.lambda0

    def phi(self, t: int) -> float:
        return self.phi1 if t else self.phi0

    def sigma_s(self, t: int) -> float:
        return self.sigma_s1 if t else self.sigma_s0

    def gamma_vector(self) -> np.ndarray:
        return np.array(self.gamma if self.gamma else [0.0] * self.n_covariates)

    def alpha_vector(self) -> np.ndarray:
        return np.array(self.alpha if self.alpha else [0.0] * self.n_covariates)

    def strata_mean(self) -> np.ndarray:
        return np.array([self.phi0, self.phi1])

    def strata_cov(self) -> np.ndarray:
        off = self.rho * self.sigma_s0 * self.sigma_s1
        return np.array([[self.sigma_s0**2, off], [off, self.sigma_s1**2]])

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return {
            "beta0": list(self.beta0),
            "beta1": list(self.beta1),
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "sigma_y2": self.sigma_y2,
            "phi0": self.phi0,
            "phi1": self.phi1,
            "sigma_s0": self.sigma_s0,
            "sigma_s1": self.sigma_s1,
            "rho": self.rho,
            "gamma": list(self.gamma),
            "alpha": list(self.alpha),
        }

    @classmethod
    def from_dict(cls, values: dict):
        return cls(**values)


@dataclass(frozen=True)
class MarginalParams:
    """The identifiable parameters of the observed (Y, S) | T distribution, indexed by arm."""

    mu_y_prime: Tuple[float, float]
    phi: Tuple[float, float]
    zeta: Tuple[float, float]
    psi: Tuple[float, float]
    sigma_s: Tuple[float, float]
    # covariate coefficients, carried through unchanged
    gamma: Tuple[float, ...] = field(default=())
    alpha: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        for name in ("mu_y_prime", "phi", "zeta", "psi", "sigma_s"):
            object.__setattr__(self, name, _pair(getattr(self, name)))
        object.__setattr__(self, "gamma", _vector(self.gamma) if len(self.gamma) else ())
        object.__setattr__(self, "alpha", _vector(self.alpha) if len(self.alpha) else ())
        for t in (0, 1):
            if not (self.zeta[t] > 0 and self.sigma_s[t] > 0):
                raise ValueError(f"arm {t}: zeta and sigma_s must be positive")
            if not self.var_y_given_s(t) >= 0:
                raise ValueError(f"arm {t}: zeta - psi^2 is negative")

    def var_y_given_s(self, t: int) -> float:
        """Var{Y(t) | S(t)} = zeta_t - psi_t^2."""
        return self.zeta[t] - self.psi[t] ** 2

    def cov_ys(self, t: int) -> float:
        return self.psi[t] * self.sigma_s[t]

    def to_dict(self):
        return {
            "mu_y_prime": list(self.mu_y_prime),
            "phi": list(self.phi),
            "zeta": list(self.zeta),
            "psi": list(self.psi),
            "sigma_s": list(self.sigma_s),
            "gamma": list(self.gamma),
            "alpha": list(self.alpha),
        }
