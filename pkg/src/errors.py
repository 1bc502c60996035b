from src.default_constants import (
    EXIT_CONFIG_ERROR,
    EXIT_DATA_ERROR,
    EXIT_NUMERICAL_ERROR,
    EXIT_GATE_FAILURE,
)


class PrinstratError(Exception):
    """Base class of every error raised on purpose by this package."""

    exit_code = EXIT_NUMERICAL_ERROR


class ConfigError(PrinstratError):
    """Invalid or inconsistent configuration."""

    exit_code = EXIT_CONFIG_ERROR


class DataError(PrinstratError):
    """Input data that does not match the dataset schema or cannot be fitted."""

    exit_code = EXIT_DATA_ERROR


class NumericalError(PrinstratError):
    exit_code = EXIT_NUMERICAL_ERROR


class DecompositionError(NumericalError):
    """A covariance or precision matrix is not positive definite."""


class TruncationMassError(NumericalError):
    """A truncated distribution has (numerically) no mass on its support."""


class EmptyRegionError(NumericalError):
    """A feasible set (sigma_y^2 interval, p11 interval, grid) is empty."""


class InfeasibleError(NumericalError):
    """Requested parameters are outside the identified set."""


class ChainError(NumericalError):
    """A Gibbs step failed; remembers where."""

    def __init__(self, step: str, iteration: int, cause: Exception):
        super().__init__(f"step '{step}' failed at iteration {iteration}: {cause}")
        self.step = step
        self.iteration = iteration
        self.cause = cause


class ScenarioAbortedError(NumericalError):
    """Too many replicates of a scenario failed."""


class AcceptanceGateError(PrinstratError):
    exit_code = EXIT_GATE_FAILURE

    def __init__(self, failures):
        super().__init__("acceptance gates failed: " + "; ".join(failures))
        self.failures = list(failures)
