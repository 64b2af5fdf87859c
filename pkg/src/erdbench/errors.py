"""Exception hierarchy shared across the package."""


class ErdbenchError(Exception):
    """Base class for all package errors."""


class InputError(ErdbenchError):
    """Bad input data or configuration (CLI exit code 1)."""


class FormatError(InputError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(InputError, ValueError):
    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class DegenerateReferenceError(ErdbenchError, ZeroDivisionError):
    """Reference power/energy is zero (dead or fully suppressed window)."""


class TruncatedTrialError(ErdbenchError, IndexError):
    """An analysis period runs past the end of the recording."""


class DesignError(ErdbenchError, ValueError):
    """Filter requirements cannot be met at the given sample rate."""


class InsufficientDataError(ErdbenchError, ValueError):
    pass


class NoReactiveBandError(ErdbenchError):
    """No candidate band shows a significant positive power difference."""


class EmptyReportError(ErdbenchError):
    pass


class InvariantError(ErdbenchError, AssertionError):
    """Internal consistency check failed (CLI exit code 2)."""
