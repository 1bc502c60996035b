import json

import pytest

from src.errors import ConfigError
from src.binary.model import SETTING_BINARY
from src.cli.config import load_config, resolve_truth, resolve_strata, fit_constraints
from src.psmodel.params import PrincipalStratum
from src.psmodel.presets import SETTING_5


def write_config(tmp_path, values):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(values))
    return str(path)


def test_defaults_file_then_flags(tmp_path):
    path = write_config(tmp_path, {"n": 500, "seed": 3})
    config = load_config("simulate", path, {"n": 800, "seed": None})
    assert config["n"] == 800
    assert config["seed"] == 3
    assert config["truth"] == "setting5"


def test_unknown_key_is_named(tmp_path):
    path = write_config(tmp_path, {"n": 500, "sample_size": 3})
    with pytest.raises(ConfigError, match="sample_size"):
        load_config("simulate", path)


def test_nested_unknown_key_is_named(tmp_path):
    path = write_config(tmp_path, {"data": "x.csv", "chain": {"n_iterations": 5}})
    with pytest.raises(ConfigError, match="chain: unknown chain key 'n_iterations'"):
        load_config("fit", path)


def test_invalid_json(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{n: 3")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config("simulate", str(path))


def test_sample_size_must_be_positive():
    with pytest.raises(ConfigError, match="n:"):
        load_config("simulate", overrides={"n": 0})


def test_pir_needs_one_source_and_rho():
    with pytest.raises(ConfigError, match="exactly one"):
        load_config("pir", overrides={"rho": 0.5})
    with pytest.raises(ConfigError, match="exactly one"):
        load_config("pir", overrides={"rho": 0.5, "truth": "setting5", "data": "x.csv"})
    with pytest.raises(ConfigError, match="rho"):
        load_config("pir", overrides={"truth": "setting5"})
    with pytest.raises(ConfigError, match="below 1"):
        load_config("pir", overrides={"truth": "setting5", "rho_sweep": [0.5, 1.0]})


def test_unknown_command():
    with pytest.raises(ConfigError, match="simulate"):
        load_config("plot")


def test_resolve_truth():
    assert resolve_truth("setting5") == SETTING_5
    assert resolve_truth("binary", binary=True) == SETTING_BINARY
    assert resolve_truth(SETTING_5.to_dict()) == SETTING_5
    with pytest.raises(ConfigError, match="unknown preset"):
        resolve_truth("setting6")
    with pytest.raises(ConfigError, match="truth"):
        resolve_truth({"beta0": [1, 2]})


def test_resolve_strata():
    assert resolve_strata([[0.89, 0.18]]) == [PrincipalStratum(0.89, 0.18)]
    assert resolve_strata(None) is None
    with pytest.raises(ConfigError, match="strata"):
        resolve_strata([[1, 2, 3]])


def test_constraint_flags_add_to_the_regime():
    config = load_config("fit", overrides={"data": "x.csv", "regime": "zero_beta01", "rho": 0.3})
    config["constraints"] = {"equal_sigma_s": True, "sigma_y2_floor_frac": 0.1}
    constraints = fit_constraints(config)
    assert constraints.zero_beta01 and constraints.equal_sigma_s
    assert constraints.sigma_y2_floor_frac == 0.1
    assert constraints.rho_fixed == 0.3


@pytest.mark.parametrize("key, hint", [("rho_fixed", "use 'rho'"), ("regime", "use 'regime'"), ("zero_beta10", "")])
def test_constraint_keys_without_effect_are_rejected(key, hint):
    config = load_config("fit", overrides={"data": "x.csv", "regime": "none"})
    config["constraints"] = {key: 0.5}
    with pytest.raises(ConfigError, match=f"unknown constraint key '{key}'") as error:
        fit_constraints(config)
    assert hint in str(error.value)
