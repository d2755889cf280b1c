"""Exception hierarchy shared across the package."""


class TraitgenError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(TraitgenError):
    """An input file is missing a required column or has a bad header."""


class DataError(TraitgenError):
    """A data row is malformed: bad cell value, duplicate id, unknown prompt."""


class PolicyError(TraitgenError):
    """A codec policy was applied to an input it does not support."""


class InputError(TraitgenError):
    """Model input violates configured limits (e.g. sequence too long)."""


class TrainingError(TraitgenError):
    """Training diverged or produced non-finite values."""
