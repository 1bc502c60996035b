from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, Union

from src.default_constants import (
    DEFAULT_N_REPLICATES,
    DEFAULT_SEED,
    DEFAULT_RHO_LOWER,
    DEFAULT_RHO_UPPER,
    TABLE1_SAMPLE_SIZE,
    TABLE1_RHO,
    TABLE1_REGIMES,
    RHO_IDENT_REGIMES,
    RHO_IDENT_SAMPLE_SIZES,
    PI_SAMPLE_SIZE,
    PI_REGIMES,
    PI_REPLICATES,
    RATE_STUDY_SAMPLE_SIZES,
    RATE_STUDY_REPLICATES,
    BINARY_SIGN_SAMPLE_SIZE,
    BINARY_P11_SAMPLE_SIZE,
    BINARY_REGIMES,
    CHAIN_STREAM_OFFSET,
)
from src.errors import ConfigError
from src.binary.model import BinaryParams, SETTING_BINARY
from src.gibbs.settings import ChainConfig, ConstraintSet, PriorSpec
from src.psmodel.params import JointParams, PrincipalStratum
from src.psmodel.presets import SETTING_5, SETTING_5_STRATA, SETTING_PI, SETTING_RHO_IDENT


class ScenarioId:
    Table1 = "table1"
    RhoIdent = "rho_ident"
    Pi = "pi"
    BinarySign = "binary_sign"
    BinaryP11 = "binary_p11"
    RateStudy = "rate_study"
    Custom = "custom"

    ALL = (Table1, RhoIdent, Pi, BinarySign, BinaryP11, RateStudy, Custom)


@dataclass(frozen=True)
class ScenarioSpec:
    """What to simulate, how to fit it and how often."""

    scenario_id: str
    truth: Union[JointParams, BinaryParams]
    sample_sizes: Tuple[int, ...]
    n_replicates: int
    regimes: Tuple[str, ...]
    strata: Tuple[PrincipalStratum, ...] = ()
    # ChainConfig keys overriding the defaults
    chain: dict = field(default_factory=dict)
    base_seed: int = DEFAULT_SEED
    # fixes rho (p11 for binary truths) in every fit
    rho_fixed: Optional[float] = None
    rho_interval: Tuple[float, float] = (DEFAULT_RHO_LOWER, DEFAULT_RHO_UPPER)

    @property
    def is_binary(self) -> bool:
        return isinstance(self.truth, BinaryParams)

    def validate(self):
        if self.scenario_id not in ScenarioId.ALL:
            raise ConfigError(f"unknown scenario '{self.scenario_id}', expected one of {list(ScenarioId.ALL)}")
        if self.n_replicates < 1:
            raise ConfigError("a scenario needs at least one replicate")
        if not self.regimes:
            raise ConfigError("a scenario needs at least one regime")
        if not self.sample_sizes or min(self.sample_sizes) < 10:
            raise ConfigError(f"sample sizes must be at least 10, got {self.sample_sizes}")
        for regime in self.regimes:
            ConstraintSet.from_regime(regime)
        self.chain_config(0)
        self.prior().validate()
        return self

    def replace(self, **changes):
        return replace(self, **changes)

    def prior(self) -> PriorSpec:
        prior = PriorSpec()
        prior.rho_interval = tuple(self.rho_interval)
        return prior

    def constraints(self, regime: str) -> ConstraintSet:
        return ConstraintSet.from_regime(regime, rho_fixed=self.rho_fixed)

    def chain_config(self, stream_id: int) -> ChainConfig:
        base = ChainConfig.binary_defaults() if self.is_binary else ChainConfig()
        config = ChainConfig.from_dict(self.chain, base)
        config.seed = self.base_seed
        return config.with_stream(stream_id)

    def data_stream(self, size_index: int, replicate: int) -> int:
        """Stream id of a simulated dataset; one stream per (sample size, replicate)."""
        return size_index * self.n_replicates + replicate

    def chain_stream(self, size_index: int, replicate: int, regime_index: int) -> int:
        data_stream = self.data_stream(size_index, replicate)
        return CHAIN_STREAM_OFFSET + data_stream * len(self.regimes) + regime_index

    def to_dict(self):
        return {
            "scenario_id": self.scenario_id,
            "truth": self.truth.to_dict(),
            "binary": self.is_binary,
            "sample_sizes": list(self.sample_sizes),
            "n_replicates": self.n_replicates,
            "regimes": list(self.regimes),
            "strata": [[u.s0, u.s1] for u in self.strata],
            "chain": dict(self.chain),
            "base_seed": self.base_seed,
            "rho_fixed": self.rho_fixed,
            "rho_interval": list(self.rho_interval),
        }

    @classmethod
    def from_dict(cls, values: dict):
        values = dict(values)
        known = set(cls.__dataclass_fields__) | {"binary"}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys {sorted(unknown)}")
        binary = values.pop("binary", False)
        truth = values.get("truth")
        if isinstance(truth, dict):
            try:
                values["truth"] = BinaryParams.from_dict(truth) if binary else JointParams.from_dict(truth)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"invalid scenario truth: {e}") from e
        values["strata"] = tuple(PrincipalStratum(*u) for u in values.get("strata", ()))
        for key in ("sample_sizes", "regimes", "rho_interval"):
            if key in values:
                values[key] = tuple(values[key])
        return cls(**values).validate()


def default_spec(scenario_id: str) -> ScenarioSpec:
    """The preset of a named scenario at desk scale."""
    if scenario_id == ScenarioId.Table1:
        spec = ScenarioSpec(
            scenario_id,
            truth=SETTING_5,
            sample_sizes=(TABLE1_SAMPLE_SIZE,),
            n_replicates=DEFAULT_N_REPLICATES,
            regimes=TABLE1_REGIMES,
            strata=SETTING_5_STRATA,
            rho_fixed=TABLE1_RHO,
        )
    elif scenario_id == ScenarioId.RhoIdent:
        spec = ScenarioSpec(
            scenario_id,
            truth=SETTING_RHO_IDENT,
            sample_sizes=RHO_IDENT_SAMPLE_SIZES,
            n_replicates=1,
            regimes=RHO_IDENT_REGIMES,
        )
    elif scenario_id == ScenarioId.Pi:
        spec = ScenarioSpec(
            scenario_id,
            truth=SETTING_PI,
            sample_sizes=(PI_SAMPLE_SIZE,),
            n_replicates=PI_REPLICATES,
            regimes=PI_REGIMES,
        )
    elif scenario_id == ScenarioId.RateStudy:
        spec = ScenarioSpec(
            scenario_id,
            truth=SETTING_RHO_IDENT,
            sample_sizes=RATE_STUDY_SAMPLE_SIZES,
            n_replicates=RATE_STUDY_REPLICATES,
            regimes=("two_constraints",),
        )
    elif scenario_id == ScenarioId.BinarySign:
        spec = ScenarioSpec(
            scenario_id,
            truth=SETTING_BINARY,
            sample_sizes=(BINARY_SIGN_SAMPLE_SIZE,),
            n_replicates=1,
            regimes=BINARY_REGIMES,
            rho_fixed=SETTING_BINARY.p11,
        )
    elif scenario_id == ScenarioId.BinaryP11:
        spec = ScenarioSpec(
            scenario_id,
            truth=SETTING_BINARY,
            sample_sizes=(BINARY_P11_SAMPLE_SIZE,),
            n_replicates=1,
            regimes=BINARY_REGIMES,
        )
    elif scenario_id == ScenarioId.Custom:
        raise ConfigError("the custom scenario has no preset; give its full spec in the config file")
    else:
        raise ConfigError(f"unknown scenario '{scenario_id}', expected one of {list(ScenarioId.ALL)}")
    return spec.validate()
