"""Exception types raised by the trickbounds library.

Library code raises; only ``main.py`` turns these into log lines and exit codes.
"""


class BoundsError(Exception):
    """Base class for every error raised on purpose by this package."""


class ConfigError(BoundsError, ValueError):
    """Invalid parameters, unknown experiment names, bad alphabet sizes."""


class ParseError(BoundsError, ValueError):
    def __init__(self, position: int, symbol, sigma: int):
        self.position = position  # 1-based
        self.symbol = symbol
        self.sigma = sigma
        super().__init__(f"symbol {symbol!r} at position {position} is outside the alphabet of size {sigma}")


class SizeError(BoundsError, ValueError):
    """A resource guard (length, digit count, enumeration size) was exceeded."""


class ConstructionError(BoundsError, ValueError):
    def __init__(self, message: str, positions=()):
        self.positions = tuple(positions)
        super().__init__(message)


class GenerationError(BoundsError, RuntimeError):
    """A source was asked for more symbols than it can define."""


class ExperimentAborted(BoundsError, RuntimeError):
    """The experiment's construction is infeasible at the requested parameters."""
