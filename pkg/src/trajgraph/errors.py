"""Exception hierarchy shared across the package."""


class TrajGraphError(Exception):
    """Base class for all package errors."""


class DataError(TrajGraphError):
    """Malformed input data (CSV rows, store files)."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(TrajGraphError, ValueError):
    """Invalid or unresolvable configuration."""


class StateError(TrajGraphError):
    """An operation was invoked on an object in the wrong state."""


class GuardError(TrajGraphError):
    """A safety cap was exceeded without an explicit override."""


class IndexFormatError(TrajGraphError):
    """Base class for index file decoding failures."""


class IndexVersionError(IndexFormatError):
    pass


class IndexTruncatedError(IndexFormatError):
    pass


class IndexChecksumError(IndexFormatError):
    pass


class StoreMismatchError(TrajGraphError):
    """The index was built over a different trajectory store."""
