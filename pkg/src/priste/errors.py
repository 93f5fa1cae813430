"""Exception hierarchy shared by all modules."""


class PristeError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PristeError, ValueError):
    pass


class DataError(PristeError, ValueError):
    pass


class OutOfBounds(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class EmptyAfterFilter(DataError):
    pass


class TimestampOutOfRange(PristeError, IndexError):
    pass


class WindowOutOfRange(PristeError, ValueError):
    pass


class HorizonExceeded(PristeError, ValueError):
    pass


class OutOfOrder(PristeError, ValueError):
    pass


class TooLarge(PristeError, ValueError):
    pass


class DegenerateEvent(PristeError, ValueError):
    """Event prior or observation likelihood is identically zero."""


class DegeneratePrior(PristeError, ValueError):
    """Prior is 0 or 1 for the given initial distribution."""


class ZeroLikelihood(PristeError, ValueError):
    pass


class EmptySet(PristeError, ValueError):
    pass
