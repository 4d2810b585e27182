"""ergolin: Birkhoff sums over circle dynamics and the random operator
products they drive, with exact arithmetic where the dichotomies live."""

__version__ = "0.1.0"

from .errors import (ConfigError, ErgolinError, HorizonError,
                     InternalConsistencyError, PrecisionError)

__all__ = [
    "ConfigError",
    "ErgolinError",
    "HorizonError",
    "InternalConsistencyError",
    "PrecisionError",
    "__version__",
]
