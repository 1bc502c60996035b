from typing import Optional, Tuple

import numpy as np

from src.default_constants import (
    DEFAULT_PRIOR_MEAN,
    DEFAULT_PRIOR_VARIANCE,
    DEFAULT_IG_SHAPE,
    DEFAULT_IG_RATE,
    DEFAULT_RHO_LOWER,
    DEFAULT_RHO_UPPER,
    DEFAULT_SIGMA_Y2_FLOOR_FRAC,
    DEFAULT_N_ITER,
    DEFAULT_BURN_IN,
    DEFAULT_THIN,
    DEFAULT_SEED,
    DEFAULT_RHO_PROPOSAL_SD,
    DEFAULT_SIGMA_S_PROPOSAL_SD,
    DEFAULT_BINARY_N_ITER,
    DEFAULT_BINARY_BURN_IN,
    DEFAULT_BINARY_THIN,
    DEFAULT_P11_GRID_POINTS,
)
from src.errors import ConfigError

# coordinates of theta_y before the covariate coefficients
THETA_Y_NAMES = ("beta00", "beta01", "beta10", "beta11", "lambda0", "lambda1")
BETA00, BETA01, BETA10, BETA11, LAMBDA0, LAMBDA1 = range(6)


def theta_y_names(p: int):
    return list(THETA_Y_NAMES) + [f"gamma{j + 1}" for j in range(p)]


def theta_s_names(p: int):
    return ["phi0", "phi1"] + [f"alpha{j + 1}" for j in range(p)]


def _update_from_dict(settings, values: dict, what: str):
    """Copies known keys onto settings, rejecting the unknown ones."""
    for key, value in values.items():
        if key not in vars(settings):
            raise ConfigError(f"unknown {what} key '{key}'")
        setattr(settings, key, value)
    return settings


class PriorSpec:
    """Prior hyperparameters of the joint model."""

    # normal priors, name -> (mean, variance) applied to every coordinate of the block
    NORMAL_BLOCKS = ("beta0", "beta1", "lambda0", "lambda1", "gamma", "alpha", "phi0", "phi1")
    # inverse gamma priors, name -> (shape, rate)
    IG_BLOCKS = ("sigma_y2", "sigma_s0", "sigma_s1")

    def __init__(self):
        self.normal = {name: (DEFAULT_PRIOR_MEAN, DEFAULT_PRIOR_VARIANCE) for name in self.NORMAL_BLOCKS}
        self.inverse_gamma = {name: (DEFAULT_IG_SHAPE, DEFAULT_IG_RATE) for name in self.IG_BLOCKS}
        self.rho_interval = (DEFAULT_RHO_LOWER, DEFAULT_RHO_UPPER)

    def copy(self):
        """Returns a copy if itself"""
        new = PriorSpec()
        new.normal = self.normal.copy()
        new.inverse_gamma = self.inverse_gamma.copy()
        new.rho_interval = self.rho_interval
        return new

    def set_normal(self, name: str, mean: float, variance: float):
        assert name in self.NORMAL_BLOCKS
        self.normal[name] = (float(mean), float(variance))

    def get_normal(self, name: str) -> Tuple[float, float]:
        return self.normal[name]

    def get_ig(self, name: str) -> Tuple[float, float]:
        return self.inverse_gamma[name]

    def get_theta_y_prior(self, p: int):
        """Prior mean and variance vectors over (beta00, beta01, beta10, beta11, lambda0, lambda1, gamma)."""
        blocks = [("beta0", 2), ("beta1", 2), ("lambda0", 1), ("lambda1", 1), ("gamma", p)]
        return self._stack(blocks)

    def get_theta_s_prior(self, p: int):
        """Prior mean and variance vectors over (phi0, phi1, alpha)."""
        return self._stack([("phi0", 1), ("phi1", 1), ("alpha", p)])

    def _stack(self, blocks):
        means, variances = [], []
        for name, size in blocks:
            mean, variance = self.normal[name]
            means += [mean] * size
            variances += [variance] * size
        return np.array(means), np.array(variances)

    def validate(self):
        for name, (_, variance) in self.normal.items():
            if not variance > 0:
                raise ConfigError(f"prior variance of {name} must be positive")
        for name, (shape, rate) in self.inverse_gamma.items():
            if not (shape > 0 and rate > 0):
                raise ConfigError(f"inverse gamma prior of {name} needs positive shape and rate")
        lo, hi = self.rho_interval
        if not -1 < lo < hi < 1:
            raise ConfigError(f"rho prior interval must lie inside (-1, 1), got {self.rho_interval}")
        return self

    def to_dict(self):
        return {
            "normal": {k: list(v) for k, v in self.normal.items()},
            "inverse_gamma": {k: list(v) for k, v in self.inverse_gamma.items()},
            "rho_interval": list(self.rho_interval),
        }

    @classmethod
    def from_dict(cls, values: dict):
        prior = cls()
        for key, value in values.items():
            if key == "normal":
                for name, pair in value.items():
                    if name not in cls.NORMAL_BLOCKS:
                        raise ConfigError(f"unknown prior block 'normal.{name}'")
                    prior.normal[name] = tuple(pair)
            elif key == "inverse_gamma":
                for name, pair in value.items():
                    if name not in cls.IG_BLOCKS:
                        raise ConfigError(f"unknown prior block 'inverse_gamma.{name}'")
                    prior.inverse_gamma[name] = tuple(pair)
            elif key == "rho_interval":
                prior.rho_interval = tuple(value)
            else:
                raise ConfigError(f"unknown prior key '{key}'")
        return prior.validate()


class ConstraintSet:
    """Identifying restrictions imposed on a chain."""

    class Regime:
        None_ = "none"
        Dominant = "dominant"
        SameSignArm1 = "same_sign_arm1"
        SameSign = "same_sign"
        ZeroBeta01 = "zero_beta01"
        TwoConstraints = "two_constraints"
        Pi = "pi"
        ZeroBeta01EqualLambda = "zero_beta01_equal_lambda"
        SignPositive = "sign_positive"

    # regime name -> flags it switches on
    REGIME_FLAGS = {
        Regime.None_: (),
        Regime.Dominant: ("dominant_effect",),
        Regime.SameSignArm1: ("same_sign_arm1",),
        Regime.SameSign: ("same_sign_arm0", "same_sign_arm1"),
        Regime.ZeroBeta01: ("zero_beta01",),
        Regime.TwoConstraints: ("zero_beta01", "shared_baseline"),
        Regime.Pi: ("pi",),
        Regime.ZeroBeta01EqualLambda: ("zero_beta01", "equal_lambda"),
        Regime.SignPositive: ("sign_positive",),
    }

    FLAGS = (
        "pi",
        "zero_beta01",
        "shared_baseline",
        "equal_lambda",
        "same_sign_arm0",
        "same_sign_arm1",
        "sign_positive",
        "dominant_effect",
        "equal_sigma_s",
    )

    def __init__(self):
        self.pi = False
        self.zero_beta01 = False
        # beta00 = beta10, implies zero_beta01
        self.shared_baseline = False
        # lambda0 = lambda1 (no direct effect)
        self.equal_lambda = False
        # beta_t0 and beta_t1 share the estimated sign of beta_tt
        self.same_sign_arm0 = False
        self.same_sign_arm1 = False
        # beta01 > 0 and beta10 > 0
        self.sign_positive = False
        self.dominant_effect = False
        self.equal_sigma_s = False
        self.sigma_y2_floor_frac = DEFAULT_SIGMA_Y2_FLOOR_FRAC
        self.rho_fixed: Optional[float] = None
        self.regime = self.Regime.None_

    def copy(self):
        """Returns a copy if itself"""
        new = ConstraintSet()
        for flag in self.FLAGS:
            setattr(new, flag, getattr(self, flag))
        new.sigma_y2_floor_frac = self.sigma_y2_floor_frac
        new.rho_fixed = self.rho_fixed
        new.regime = self.regime
        return new

    @classmethod
    def from_regime(cls, regime: str, rho_fixed: Optional[float] = None):
        """Builds the constraint set of a named regime; names can be joined with '+'."""
        constraints = cls()
        for part in regime.split("+"):
            if part not in cls.REGIME_FLAGS:
                raise ConfigError(
                    f"unknown regime '{part}', expected one of {sorted(cls.REGIME_FLAGS)}"
                )
            for flag in cls.REGIME_FLAGS[part]:
                setattr(constraints, flag, True)
        constraints.regime = regime
        constraints.rho_fixed = rho_fixed
        return constraints.validate()

    def get_zeroed(self):
        """theta_y coordinates fixed at zero."""
        zeroed = set()
        if self.pi:
            zeroed |= {BETA01, BETA10}
        if self.zero_beta01 or self.shared_baseline:
            zeroed.add(BETA01)
        return zeroed

    def get_merged(self):
        """Pairs of theta_y coordinates forced equal."""
        merged = []
        if self.shared_baseline:
            merged.append((BETA00, BETA10))
        if self.equal_lambda:
            merged.append((LAMBDA0, LAMBDA1))
        return merged

    def get_linear_map(self, p: int) -> np.ndarray:
        """Matrix M with theta_y = M theta_reduced, encoding zero and equality constraints."""
        d = len(THETA_Y_NAMES) + p
        zeroed = self.get_zeroed()
        group = list(range(d))
        for a, b in self.get_merged():
            group[b] = group[a]
        columns = sorted({group[j] for j in range(d) if j not in zeroed})
        index = {g: k for k, g in enumerate(columns)}
        linear_map = np.zeros((d, len(columns)))
        for j in range(d):
            if j not in zeroed:
                linear_map[j, index[group[j]]] = 1.0
        return linear_map

    def get_sign_constraints(self, sign_beta_tt: Tuple[int, int]):
        """theta_y coordinate -> required sign."""
        signs = {}

        def require(j, s):
            if signs.get(j, s) != s:
                raise ConfigError(f"conflicting sign constraints on {THETA_Y_NAMES[j]}")
            signs[j] = s

        if self.same_sign_arm0:
            require(BETA00, sign_beta_tt[0])
            require(BETA01, sign_beta_tt[0])
        if self.same_sign_arm1:
            require(BETA10, sign_beta_tt[1])
            require(BETA11, sign_beta_tt[1])
        if self.sign_positive:
            require(BETA01, 1)
            require(BETA10, 1)
        for j in self.get_zeroed():
            signs.pop(j, None)
        return signs

    def get_reduced_sign_constraints(self, sign_beta_tt, p: int):
        """Sign constraints moved onto the reduced coordinates of get_linear_map."""
        linear_map = self.get_linear_map(p)
        reduced = {}
        for j, s in self.get_sign_constraints(sign_beta_tt).items():
            k = int(np.flatnonzero(linear_map[j])[0])
            if reduced.get(k, s) != s:
                raise ConfigError(f"conflicting sign constraints on merged coordinate {THETA_Y_NAMES[j]}")
            reduced[k] = s
        return reduced

    def get_sigma_s_equal(self) -> bool:
        return self.equal_sigma_s

    def validate(self):
        if self.pi and self.shared_baseline:
            raise ConfigError("pi and shared_baseline together force beta00 = 0; pick one")
        if self.sigma_y2_floor_frac < 0:
            raise ConfigError("sigma_y2_floor_frac must be nonnegative")
        if self.rho_fixed is not None and not abs(self.rho_fixed) < 1:
            raise ConfigError(f"fixed rho must lie in (-1, 1), got {self.rho_fixed}")
        return self

    def to_dict(self):
        values = {flag: getattr(self, flag) for flag in self.FLAGS}
        values.update(
            regime=self.regime, sigma_y2_floor_frac=self.sigma_y2_floor_frac, rho_fixed=self.rho_fixed
        )
        return values

    @classmethod
    def from_dict(cls, values: dict):
        return _update_from_dict(cls(), values, "constraint").validate()


class ChainConfig:
    """Run settings of one chain."""

    def __init__(self):
        self.n_iter = DEFAULT_N_ITER
        self.burn_in = DEFAULT_BURN_IN
        self.thin = DEFAULT_THIN
        self.seed = DEFAULT_SEED
        self.stream_id = 0
        self.rho_proposal_sd = DEFAULT_RHO_PROPOSAL_SD
        self.sigma_s_proposal_sd = DEFAULT_SIGMA_S_PROPOSAL_SD
        self.p11_grid_points = DEFAULT_P11_GRID_POINTS

    @classmethod
    def binary_defaults(cls):
        config = cls()
        config.n_iter = DEFAULT_BINARY_N_ITER
        config.burn_in = DEFAULT_BINARY_BURN_IN
        config.thin = DEFAULT_BINARY_THIN
        return config

    def copy(self):
        """Returns a copy if itself"""
        new = ChainConfig()
        new.__dict__.update(self.__dict__)
        return new

    def with_stream(self, stream_id: int):
        new = self.copy()
        new.stream_id = int(stream_id)
        return new

    def get_n_retained(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin

    def is_retained(self, iteration: int) -> bool:
        """iteration counts from 1."""
        return iteration > self.burn_in and (iteration - self.burn_in) % self.thin == 0

    def validate(self):
        if not 0 <= self.burn_in < self.n_iter:
            raise ConfigError(f"need 0 <= burn_in < n_iter, got {self.burn_in} and {self.n_iter}")
        if self.thin < 1:
            raise ConfigError(f"thin must be at least 1, got {self.thin}")
        if self.get_n_retained() < 1:
            raise ConfigError("the chain keeps no draws; lengthen it or thin less")
        if self.seed < 0 or self.stream_id < 0:
            raise ConfigError("seed and stream id must be nonnegative")
        if not (self.rho_proposal_sd > 0 and self.sigma_s_proposal_sd > 0):
            raise ConfigError("proposal sds must be positive")
        if self.p11_grid_points < 2:
            raise ConfigError("the p11 grid needs at least 2 points")
        return self

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, values: dict, base: Optional["ChainConfig"] = None):
        config = (base or cls()).copy()
        return _update_from_dict(config, values, "chain").validate()
