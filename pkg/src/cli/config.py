"""Command configuration: one JSON file per run, flag overrides on top.

Every command has a schema of known keys with their defaults. Unknown keys are rejected with
their path, nested blocks are validated by the settings classes they describe, and the
effective configuration is echoed into the command's outputs.
"""

import copy
import json
import logging
from typing import Optional, Union

from src.default_constants import DEFAULT_SEED
from src.errors import ConfigError
from src.binary.model import BinaryParams, SETTING_BINARY
from src.gibbs.settings import PriorSpec, ConstraintSet, ChainConfig
from src.psmodel.params import JointParams, PrincipalStratum
from src.psmodel.presets import PRESETS

log = logging.getLogger(__name__)

BINARY_PRESETS = {"binary": SETTING_BINARY}


class Command:
    Simulate = "simulate"
    Fit = "fit"
    Pir = "pir"
    Asym = "asym"
    Scenario = "scenario"

    ALL = (Simulate, Fit, Pir, Asym, Scenario)


# command -> known keys and their defaults
SCHEMA = {
    Command.Simulate: {
        "truth": "setting5",
        "binary": False,
        "n": 300,
        "seed": DEFAULT_SEED,
        "out": "data.csv",
    },
    Command.Fit: {
        "data": None,
        "regime": "none",
        "constraints": {},
        "rho": None,
        "prior": {},
        "chain": {},
        "strata": None,
        "out": ".",
    },
    Command.Pir: {
        "truth": None,
        "binary": False,
        "data": None,
        "moments": None,
        "rho": None,
        "rho_sweep": [],
        "assumptions": ["none", "same_sign", "dominant"],
        "strata": [],
        "oracle": False,
        "oracle_grid": None,
        "out": "regions.json",
    },
    Command.Asym: {
        "truth": "rho_ident",
        "t_bar": 0.5,
        "n_values": [300, 600, 1200, 2400, 4800],
        "out": None,
    },
    Command.Scenario: {
        "scenario": None,
        "spec": {},
        "formats": ["csv", "json", "markdown"],
        "check": False,
        "draws_dir": None,
        "out": ".",
    },
}


def resolve_truth(value: Union[str, dict], binary: bool = False):
    """A preset name or a parameter dictionary."""
    if isinstance(value, str):
        presets = BINARY_PRESETS if binary else PRESETS
        if value not in presets:
            raise ConfigError(f"truth: unknown preset '{value}', expected one of {sorted(presets)}")
        return presets[value]
    if not isinstance(value, dict):
        raise ConfigError("truth: expected a preset name or a parameter object")
    try:
        return BinaryParams.from_dict(value) if binary else JointParams.from_dict(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"truth: {e}") from e


def resolve_strata(value) -> Optional[list]:
    if value is None:
        return None
    try:
        return [PrincipalStratum(float(s0), float(s1)) for s0, s1 in value]
    except (TypeError, ValueError) as e:
        raise ConfigError(f"strata: expected a list of [s0, s1] pairs ({e})") from e


def _check_keys(values: dict, known, path: str):
    for key in values:
        if key not in known:
            raise ConfigError(f"unknown config key '{path}{key}'")


def read_config_file(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as f:
            values = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(values, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return values


def load_config(command: str, path: Optional[str] = None, overrides: Optional[dict] = None) -> dict:
    """Defaults, then the file, then the flags that were given (None means not given)."""
    if command not in SCHEMA:
        raise ConfigError(f"unknown command '{command}', expected one of {list(Command.ALL)}")
    config = copy.deepcopy(SCHEMA[command])
    values = read_config_file(path)
    _check_keys(values, config, "")
    config.update(values)
    for key, value in (overrides or {}).items():
        if value is not None:
            _check_keys({key: value}, config, "")
            config[key] = value
    validate_config(command, config)
    log.debug("effective %s config: %s", command, config)
    return config


def _nested(key: str, parse, value):
    try:
        return parse(value)
    except ConfigError as e:
        raise ConfigError(f"{key}: {e}") from e


def validate_config(command: str, config: dict):
    """Checks every value before any computation; raises ConfigError naming the key."""
    if command == Command.Simulate:
        resolve_truth(config["truth"], config["binary"])
        if not (isinstance(config["n"], int) and config["n"] >= 1):
            raise ConfigError(f"n: sample size must be a positive integer, got {config['n']}")
    elif command == Command.Fit:
        if config["data"] is None:
            raise ConfigError("data: a dataset path is required")
        _nested("prior", PriorSpec.from_dict, config["prior"])
        _nested("chain", ChainConfig.from_dict, config["chain"])
        fit_constraints(config)
        resolve_strata(config["strata"])
    elif command == Command.Pir:
        sources = [key for key in ("truth", "data", "moments") if config[key] is not None]
        if len(sources) != 1:
            raise ConfigError(f"give exactly one of truth, data or moments, got {sources or 'none'}")
        if config["truth"] is not None:
            resolve_truth(config["truth"], config["binary"])
        if config["rho"] is None and not config["rho_sweep"]:
            raise ConfigError("rho: give a fixed rho or a rho_sweep list")
        for rho in rho_values(config):
            if not abs(rho) < 1:
                raise ConfigError(f"rho: |rho| must be below 1, got {rho}")
        for assumption in config["assumptions"]:
            if assumption not in SCHEMA[Command.Pir]["assumptions"]:
                raise ConfigError(f"assumptions: unknown assumption '{assumption}'")
        resolve_strata(config["strata"])
    elif command == Command.Asym:
        resolve_truth(config["truth"])
        if not 0 < config["t_bar"] < 1:
            raise ConfigError(f"t_bar: treated fraction must lie in (0, 1), got {config['t_bar']}")
        if not config["n_values"] or min(config["n_values"]) < 1:
            raise ConfigError("n_values: need positive sample sizes")
    elif command == Command.Scenario:
        if config["scenario"] is None:
            raise ConfigError("scenario: a scenario id is required")
        for fmt in config["formats"]:
            if fmt not in ("csv", "json", "markdown"):
                raise ConfigError(f"formats: unknown report format '{fmt}'")


# keys of config["constraints"]; the regime and rho have their own options
CONSTRAINT_KEYS = ConstraintSet.FLAGS + ("sigma_y2_floor_frac",)


def fit_constraints(config: dict) -> ConstraintSet:
    for key in config["constraints"]:
        if key not in CONSTRAINT_KEYS:
            hint = {"regime": " (use 'regime')", "rho_fixed": " (use 'rho')"}.get(key, "")
            raise ConfigError(f"constraints: unknown constraint key '{key}'{hint}")
    constraints = _nested("regime", lambda regime: ConstraintSet.from_regime(regime, config["rho"]), config["regime"])
    extra = _nested("constraints", lambda values: ConstraintSet.from_dict(values), config["constraints"])
    # explicit flags add to the regime
    for flag in ConstraintSet.FLAGS:
        if getattr(extra, flag):
            setattr(constraints, flag, True)
    if "sigma_y2_floor_frac" in config["constraints"]:
        constraints.sigma_y2_floor_frac = extra.sigma_y2_floor_frac
    return constraints.validate()


def rho_values(config: dict) -> list:
    return [config["rho"]] if config["rho"] is not None else list(config["rho_sweep"])
