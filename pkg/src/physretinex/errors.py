"""Shared exception types.

Every failure mode in the package maps to one of these so callers can
distinguish bad shapes from bad configuration from bad files.
"""


class DimensionError(ValueError):
    """Operand shapes are incompatible; message names both shapes."""


class ConfigurationError(ValueError):
    """A parameter, flag, or config entry is out of contract."""


class ContractError(RuntimeError):
    """An internal call violated a documented precondition."""


class CorruptCheckpointError(RuntimeError):
    """A checkpoint file failed validation; message names the field."""


class UnsupportedFormatError(ValueError):
    """An input file is not in the supported format."""


class DatasetError(RuntimeError):
    """A dataset directory is empty or inconsistently paired."""
