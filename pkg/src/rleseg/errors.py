"""Exception hierarchy shared across the package."""


class ValidationError(ValueError):
    """An argument or input violates a documented precondition."""


class OverlapError(ValidationError):
    """Two runs claim the same pixel during strict reconstruction."""


class RangeError(ValidationError):
    """A run extends past the end of the target vector in strict mode."""


class ParseError(ValidationError):
    """A token sequence violates its scheme grammar.

    ``position`` is the 0-based index of the offending token, or the
    sequence length when the violation is truncation / missing coverage.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at token {position})")
        self.position = position


class CapacityError(Exception):
    """A vocabulary layout exceeds the configured or representable size."""


class UndefinedMetricError(ValidationError):
    """Metrics requested from an empty or fully-undefined confusion matrix."""


class MaskIOError(Exception):
    """A mask, token, or manifest file could not be read or written."""
