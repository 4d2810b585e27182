"""Exception hierarchy shared by the library and the command line driver.

The driver maps these onto process exit codes: ConfigError -> 2,
PrecisionError (and subclasses) -> 3, InternalConsistencyError -> 4.
"""


class ErgolinError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ErgolinError):
    """Invalid parameters, malformed config input, or violated preconditions."""


class PrecisionError(ErgolinError):
    """The available precision cannot certify the requested result."""


class HorizonError(PrecisionError):
    """A bit stream is too short for the requested iteration horizon."""


class InternalConsistencyError(ErgolinError):
    """Two independent computation routes disagreed beyond tolerance.

    Raising this is a bug trap, not a recoverable condition: it means one of
    the routes (or the tolerance model) is wrong.
    """
