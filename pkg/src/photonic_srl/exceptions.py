"""Exception hierarchy shared across the package."""


class PhotonicSRLError(Exception):
    """Base class for all package errors."""


class ConfigError(PhotonicSRLError, ValueError):
    """Invalid configuration values."""


class TopologyError(PhotonicSRLError, ValueError):
    """Voltage table or weight shape does not match the mesh topology."""


class DimensionError(PhotonicSRLError, ValueError):
    """Vector or matrix has the wrong length/shape."""


class VoltageRangeError(PhotonicSRLError, ValueError):
    """A drive voltage lies outside the allowed range."""

    def __init__(self, message, shifter_index=None):
        super().__init__(message)
        self.shifter_index = shifter_index


class NumericError(PhotonicSRLError, ArithmeticError):
    """Non-finite input where a finite value is required."""


class UndefinedSimilarityError(PhotonicSRLError, ZeroDivisionError):
    """Cosine similarity requested for an all-zero matrix."""


class UsageError(PhotonicSRLError, RuntimeError):
    """API used out of order (missing forward cache, off-schedule update...)."""


class ProtocolError(PhotonicSRLError, RuntimeError):
    """Remote environment sent something the protocol does not allow."""
