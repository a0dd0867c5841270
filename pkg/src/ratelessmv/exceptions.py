"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A parameter violates an operation's precondition."""


class DimensionMismatchError(ValueError):
    pass


class DuplicateSymbolError(ValueError):
    """An encoded symbol index was ingested twice."""


class InvalidIndexError(IndexError):
    pass


class NeedMoreSymbols(Exception):
    """The peeling decoder ran out of symbols before recovering every source."""

    def __init__(self, decoded_count, received):
        self.decoded_count = decoded_count
        self.received = received
        super().__init__(
            f"decoder stalled: {decoded_count} sources recovered from {received} symbols"
        )


class DecodeFailureError(RuntimeError):
    pass


class SetupFailureError(RuntimeError):
    pass


class JobFailureError(RuntimeError):
    """A distributed job could not complete; ``report`` carries partial progress."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
