"""Exception taxonomy shared across the package."""


class MinervaError(Exception):
    """Base class for all package errors."""


class ShapeError(MinervaError):
    """Operand shapes do not conform."""


class ContractError(MinervaError):
    """A documented pre/postcondition was violated by the caller."""


class ConfigError(MinervaError):
    """Invalid configuration or hyperparameter value."""


class DataError(MinervaError):
    """Malformed dataset contents or schema."""


class NumericError(MinervaError):
    """Non-finite value detected where finiteness is required."""


class TrainingError(MinervaError):
    """Optimization failed (divergence, collapse); message carries the step."""


class DegenerateWeightsError(TrainingError):
    """Feature-weight norm collapsed; the normalized L1 term is undefined."""
