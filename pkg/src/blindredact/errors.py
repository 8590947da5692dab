class BlindRedactError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(BlindRedactError, ValueError):
    """Invalid run configuration or command line."""


class DataError(BlindRedactError, ValueError):
    """Input data that cannot be used as asked (missing columns, ragged rows, ...)."""
