"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data problems
exit 2, numeric failures exit 3.
"""


class EpnetError(Exception):
    """Base class for all package errors."""


class UsageError(EpnetError):
    """Bad command-line invocation."""


class DataError(EpnetError):
    """Invalid input data: bad files, bounds violations, unknown ids, capacity."""


class FileFormatError(DataError):
    """A binary or structured file does not conform to its format."""


class VersionMismatchError(FileFormatError):
    """A file declares a format version this build cannot read."""


class CorruptFileError(FileFormatError):
    """Truncated payload or failed checksum."""


class NumericError(EpnetError):
    """Non-finite values where finite ones are required (e.g. gradients)."""
