"""Exception hierarchy.

Every error raised on bad input derives from ``DataError`` so the CLI can map
it to exit status 2. ``UsageError`` maps to 1.
"""


class VocprepError(Exception):
    """Base class for all package errors."""


class UsageError(VocprepError):
    pass


class DataError(VocprepError, ValueError):
    """Invalid data, parameters or files."""


# imagecore
class MalformedHeader(DataError):
    pass


class UnsupportedMaxval(DataError):
    pass


class TruncatedPayload(DataError):
    pass


class WrongChannelCount(DataError):
    pass


# transforms
class NonPositiveGain(DataError):
    pass


class NonPositiveParam(DataError):
    pass


class InvalidControlPoints(DataError):
    pass


class InvalidRange(DataError):
    pass


class EmptyReference(DataError):
    pass


class EvenWindow(DataError):
    pass


# filters
class EvenKernel(DataError):
    pass


class NegativeNoiseVar(DataError):
    pass


class InvalidVarianceBand(DataError):
    pass


class OddDimensions(DataError):
    pass


# normalize / quality / bench
class TooFewSamples(DataError):
    pass


class EigenNoConvergence(VocprepError, ArithmeticError):
    pass


class DimensionMismatch(DataError):
    pass


class SingleClass(DataError):
    pass


class NonPositiveLambda(DataError):
    pass


# vocdata
class MalformedXml(DataError):
    def __init__(self, message, line=None, col=None):
        if line is not None:
            message = f"{message} at line {line}, column {col}"
        super().__init__(message)
        self.line = line
        self.col = col


class MissingField(DataError):
    pass


class InvalidBox(DataError):
    pass


class MissingImage(DataError):
    pass


class UnreadableImage(DataError):
    pass


class InvalidFraction(DataError):
    pass


# autotune / pipeline
class EmptySpace(DataError):
    pass


class UnknownOp(DataError):
    pass


class BadParam(DataError):
    pass


class MalformedJson(DataError):
    pass


class ChannelMismatch(DataError):
    pass
