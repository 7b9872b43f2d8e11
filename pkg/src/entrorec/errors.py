class DataError(ValueError):
    """Input data cannot support the requested operation."""


class LogParseError(DataError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + message)


class FormatError(DataError):
    """A matrix or knowledge-base file is malformed or has an unknown version."""
