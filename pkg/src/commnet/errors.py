"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data problems
exit 2, numeric failures exit 3.
"""


class CommnetError(Exception):
    """Base class for all package errors."""


class UsageError(CommnetError):
    """Bad invocation or invalid configuration."""


class DataError(CommnetError):
    """Input data violates a precondition (missing, malformed, degenerate)."""


class NumericError(CommnetError):
    """A numeric kernel received an input it cannot handle."""
