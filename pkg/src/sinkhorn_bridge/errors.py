"""Exception types shared across the package."""


class SinkhornBridgeError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(SinkhornBridgeError, ValueError):
    """Inputs disagree on the ambient dimension or shape."""


class NumericalError(SinkhornBridgeError, FloatingPointError):
    """A computation produced non-finite values."""


class SampleFileError(SinkhornBridgeError, ValueError):
    """A sample file could not be parsed."""
