"""Exception taxonomy shared by all modules.

Each class maps to one machine-parsable diagnostic prefix used by the CLI
(`error:<kind>: message`).
"""


class NoisetrendError(Exception):
    """Base class for all errors raised by this package."""

    kind = "internal"


class ConfigurationError(NoisetrendError, ValueError):
    """Invalid parameter, descriptor, or precondition violation."""

    kind = "config"


class NumericError(NoisetrendError, ArithmeticError):
    """Non-finite values where finite ones are required."""

    kind = "numeric"


class LayoutError(NoisetrendError):
    """Dataset directory tree does not follow the expected convention."""

    kind = "layout"


class DecodeError(NoisetrendError, ValueError):
    """Malformed image file; carries the byte offset of the failure."""

    kind = "decode"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class FormatError(NoisetrendError, ValueError):
    """File is not in a supported format."""

    kind = "format"


class MetricUndefinedError(NoisetrendError, ValueError):
    """Metric is undefined for the given labels (e.g. a single class)."""

    kind = "metric"
