"""Exception hierarchy.

Surface and data problems derive from ``DataValidationError`` (CLI exit 3),
configuration problems from ``ConfigError`` (CLI exit 2).
"""


class DupireError(Exception):
    pass


class ConfigError(DupireError, ValueError):
    pass


class DataValidationError(DupireError, ValueError):
    pass


class NonMonotonicAxis(DataValidationError):
    pass


class NegativeVol(DataValidationError):
    pass


class DimensionMismatch(DataValidationError):
    pass


class TooFewNodes(DataValidationError):
    pass


class NonFiniteQuery(DupireError, ValueError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class DomainError(DupireError, ValueError):
    pass


class TapeMismatch(DupireError, ValueError):
    pass
