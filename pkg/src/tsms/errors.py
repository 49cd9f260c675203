"""Exception hierarchy shared by every module of the package."""


class TSMSError(Exception):
    """Base class for all errors raised by this package."""


class SeriesTooShort(TSMSError):
    pass


class RegionTooShort(TSMSError):
    pass


class DegenerateSeries(TSMSError):
    pass


class EmptyTrainingSet(TSMSError):
    pass


class UnsupportedHorizon(TSMSError):
    pass


class DimensionMismatch(TSMSError):
    pass


class MissingTarget(TSMSError):
    pass


class EmptyBackground(TSMSError):
    pass


class TooManyFeatures(TSMSError):
    pass


class PoolMismatch(TSMSError):
    pass


class EmptySequence(TSMSError):
    pass


class ReferenceTooShort(TSMSError):
    pass


class DegenerateRange(TSMSError):
    pass


class InvalidParameters(TSMSError):
    pass


class NonFiniteObservation(TSMSError):
    pass


class NoModelsAvailable(TSMSError):
    pass


class IncompleteTable(TSMSError):
    pass


class ConfigError(TSMSError):
    pass


class ParseError(TSMSError):
    """Raised when a dataset file cannot be parsed.

    ``line`` holds the 1-based line number of the offending entry.
    """

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
