"""Exception hierarchy shared by every module."""


class DriftGMMError(Exception):
    """Base class for all package errors."""


class RejectedInputError(DriftGMMError, ValueError):
    """Input has the wrong shape, a non-finite value, or an unknown label."""


class InsufficientDataError(DriftGMMError, ValueError):
    """Too few samples or frames for the requested operation."""


class DegenerateMergeError(DriftGMMError, ValueError):
    """Two components with zero total weight cannot be merged."""


class SpecError(DriftGMMError, ValueError):
    """A stream specification cannot be realised."""


class StreamParseError(DriftGMMError, ValueError):
    """A stream file record is malformed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
