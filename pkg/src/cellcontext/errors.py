"""Exception hierarchy shared by every module."""


class CellContextError(Exception):
    """Base class for all package errors."""


class FormatError(CellContextError, ValueError):
    """A layout or config file could not be parsed.

    ``record`` is the 1-based data record (row or point) that failed, when known.
    """

    def __init__(self, message, record=None):
        if record is not None:
            message = f"record {record}: {message}"
        super().__init__(message)
        self.record = record


class ValidationError(CellContextError, ValueError):
    """Input parsed fine but violates an invariant."""


class DegenerateInputError(CellContextError, ValueError):
    """The operation has no meaningful result for this input (e.g. no points)."""
