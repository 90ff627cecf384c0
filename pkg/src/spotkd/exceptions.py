"""Exception hierarchy; every error carries a machine-readable category for the CLI."""


class SpotkdError(Exception):
    """Base class for all package errors."""

    category = "internal"


class SchemaError(SpotkdError):
    """Label schema is malformed or a vector does not match it."""

    category = "schema"


class ConfigError(SpotkdError):
    """Invalid configuration value or combination."""

    category = "config"


class DataError(SpotkdError):
    """Dataset, split, or results content violates an invariant."""

    category = "data"


class ShapeError(SpotkdError):
    """Array argument has the wrong shape."""

    category = "shape"


class NumericError(SpotkdError):
    """Non-finite values where finite ones are required."""

    category = "numeric"
