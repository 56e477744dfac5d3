class GeoRouterError(Exception):
    """Base class for every error raised by the library."""


class ValidationError(GeoRouterError, ValueError):
    """An argument or field value is outside its allowed range."""

    def __init__(self, field, message):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class DataError(GeoRouterError):
    """A dataset, record or file is malformed or inconsistent."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class ModelFileError(DataError):
    """A router model container cannot be read."""


class NumericalError(GeoRouterError):
    """Training diverged or a numerical invariant was violated."""


class UsageError(GeoRouterError):
    """Bad command-line input or configuration keys."""
