"""Exception and warning types raised across the package."""


class QubitQueueError(Exception):
    """Base class for all package errors."""


class DomainError(QubitQueueError, ValueError):
    pass


class DegenerateWarning(UserWarning):
    """A prefix product of sines vanished; trailing angles were set to zero."""


class ZeroVector(QubitQueueError, ValueError):
    pass


class DimensionMismatch(QubitQueueError, ValueError):
    pass


class SingularDenominator(QubitQueueError, ArithmeticError):
    """A coefficient formula hit a near-zero denominator.

    ``index`` is the 0-based amplitude index whose formula failed.
    """

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"near-singular denominator at amplitude {index}")


class DivisionByZeroAmplitude(QubitQueueError, ZeroDivisionError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"divisor amplitude {index} is (numerically) zero")


class InvalidRadius(QubitQueueError, ValueError):
    pass


class InfeasibleRates(QubitQueueError, ValueError):
    pass


class UnsupportedDistribution(QubitQueueError, ValueError):
    pass


class ConfigError(QubitQueueError, ValueError):
    pass


class HorizonTooShort(QubitQueueError, ValueError):
    pass


class EmptySamples(QubitQueueError, ValueError):
    pass


class GridMismatch(QubitQueueError, ValueError):
    pass


class DegenerateConfiguration(QubitQueueError, ValueError):
    """The limiting diffusion has zero variance, so no comparison is meaningful."""


class ParseError(QubitQueueError):
    def __init__(self, message, line=None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ValidationError(QubitQueueError, ValueError):
    def __init__(self, key, message=None):
        self.key = key
        super().__init__(f"{key}: {message}" if message else key)
