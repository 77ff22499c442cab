"""Exception hierarchy.

Two families: configuration problems (bad input, mismatched tables) and
numerical failures (non-convergence, rank loss, empty spectra).  The CLI maps
them to exit codes 2 and 3.
"""


class CorrSpiralError(Exception):
    """Base class for all package errors."""


class ConfigError(CorrSpiralError, ValueError):
    """Invalid configuration or mismatched inputs."""


class DomainError(ConfigError):
    """Argument outside the mathematical domain of a function."""


class PGMParseError(ConfigError):
    """Malformed or truncated PGM payload."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UnsupportedModeError(ConfigError):
    """Requested operating mode cannot produce the requested quantity."""


class NumericError(CorrSpiralError, ArithmeticError):
    """Numerical failure during a computation."""


class NonFiniteError(NumericError):
    """An integrand produced NaN or infinity."""


class ResolutionError(NumericError):
    """Quadrature did not converge at the requested resolution."""


class NoTransmissionError(NumericError):
    """The object blocks all detected amplitude; probabilities are undefined."""


class DataIntegrityError(NumericError):
    """Measured rates are mutually inconsistent."""


class UndefinedMetricError(NumericError):
    """A diagnostic is undefined for the given input (e.g. an all-zero image)."""


class NumericalRankError(NumericError):
    """A least-squares subproblem is rank deficient."""
