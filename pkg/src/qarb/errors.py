"""Exception hierarchy shared by every qarb module."""


class QarbError(Exception):
    """Base class for all library errors."""


class ValidationError(QarbError, ValueError):
    """Input rejected before any computation ran."""


class ShapeError(ValidationError):
    pass


class DegenerateInput(ValidationError):
    pass


class RankDeficient(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, line, message=""):
        self.line = line
        super().__init__(f"line {line}: {message}" if message else f"line {line}")


class OrderError(ValidationError):
    pass


class VersionError(ValidationError):
    pass


class NullSpectrumAnomaly(QarbError, RuntimeError):
    """The comparator input leaks onto the embedding's null space."""


class ProtocolViolation(QarbError, RuntimeError):
    """Cascade stages were applied out of order."""
