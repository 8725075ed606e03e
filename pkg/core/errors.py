"""
Error Categories
Base exceptions shared by every stage; the CLI maps each category to an exit code.
"""


class YNoteError(Exception):
    """Base class for all classifier errors."""
    exit_code = 1


class InvalidConfig(YNoteError):
    """Raised when flags or configuration values violate their invariants."""
    exit_code = 2


class DataError(YNoteError):
    """Raised when input data is malformed."""
    exit_code = 3


class DegenerateDataError(YNoteError):
    """Raised when data is well-formed but unusable (too few samples, one class...)."""
    exit_code = 4


class ArtifactIOError(YNoteError):
    """Raised when a corpus, model or report file cannot be read or written."""
    exit_code = 5
