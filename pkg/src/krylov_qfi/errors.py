"""Exception hierarchy.

Errors split into two families so the CLI can map them onto exit codes:
``ConfigError`` (bad input, exit 2) and ``NumericalError`` (a computation
that cannot proceed, exit 3).
"""


class KrylovQFIError(Exception):
    """Base class for all package errors."""


class ConfigError(KrylovQFIError, ValueError):
    """Invalid experiment configuration or command-line input."""


class NumericalError(KrylovQFIError, ArithmeticError):
    """A numerical routine could not produce a result."""


class NotHermitian(KrylovQFIError, ValueError):
    pass


class NotDensityMatrix(KrylovQFIError, ValueError):
    """Trace or positivity check failed."""


class NotPure(KrylovQFIError, ValueError):
    pass


class DimensionMismatch(KrylovQFIError, ValueError):
    pass


class DimensionOverflow(KrylovQFIError, ValueError):
    """Requested dimension exceeds the configured cap."""


class DecompositionFailure(NumericalError):
    pass


class OrderExceedsNStar(NumericalError):
    """The moment matrix is numerically singular: the requested order is past
    the termination order of the Krylov chain."""


class ZeroQFI(NumericalError):
    """Relative gap requested for a state with vanishing QFI."""


class InsufficientBatches(KrylovQFIError, ValueError):
    pass


class EmptyBatch(KrylovQFIError, ValueError):
    pass


class SingularEstimate(NumericalError):
    """Estimated moment matrix could not be inverted even after truncation."""
