import numpy as np
import pytest

from src.probkit.rng_stream import RngStream
from src.psmodel.algebra import marginalize
from src.psmodel.params import JointParams
from src.psmodel.presets import SETTING_5, SETTING_RHO_IDENT, SETTING_PI
from src.psmodel.simulation import simulate


@pytest.fixture
def setting5():
    return SETTING_5


@pytest.fixture
def rho_ident_truth():
    return SETTING_RHO_IDENT


@pytest.fixture
def pi_truth():
    return SETTING_PI


@pytest.fixture
def setting5_marginal():
    return marginalize(SETTING_5)


@pytest.fixture
def setting5_data():
    return simulate(SETTING_5, 300, None, RngStream(2024, 0))


@pytest.fixture
def rho_ident_data():
    return simulate(SETTING_RHO_IDENT, 1200, None, RngStream(2024, 1))


def random_joint_params(rng: np.random.Generator) -> JointParams:
    """A random but well conditioned parameter set (no covariates)."""
    return JointParams(
        beta0=tuple(rng.normal(0.0, 2.0, 2)),
        beta1=tuple(rng.normal(0.0, 2.0, 2)),
        lambda0=rng.normal(),
        lambda1=rng.normal(),
        sigma_y2=rng.uniform(0.1, 3.0),
        phi0=rng.normal(),
        phi1=rng.normal(),
        sigma_s0=rng.uniform(0.3, 2.0),
        sigma_s1=rng.uniform(0.3, 2.0),
        rho=rng.uniform(-0.9, 0.9),
    )


@pytest.fixture
def random_params():
    return random_joint_params
