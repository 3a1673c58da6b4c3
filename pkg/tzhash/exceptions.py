"""
Domain exceptions.

Every error carries the process exit code the CLI reports for it.
"""

from typing import Any, Optional


class TZSHError(Exception):
    """Base class for all tzhash errors."""

    exit_code = 2


class ConfigurationError(TZSHError):
    """Invalid configuration value or inconsistent batch geometry."""

    exit_code = 1


class DimensionError(TZSHError, ValueError):
    """Shapes of operands do not conform."""


class ParseError(TZSHError):
    """Malformed line in a feature, vocabulary or codes file."""

    def __init__(self, path: str, line_no: int, reason: str):
        self.path = path
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{path}:{line_no}: {reason}")


class VocabularyError(TZSHError):
    """Invalid class vocabulary (overlapping partition, zero-norm vector, ...)."""


class DataError(TZSHError):
    """Missing input file or dataset that cannot be used for the request."""


class TrainingError(TZSHError):
    """Optimizer failure tied to a named parameter."""

    exit_code = 3

    def __init__(self, message: str, param: Optional[str] = None):
        self.param = param
        super().__init__(message)


class NumericFailure(TrainingError):
    """Non-finite loss; `diagnostics` holds the state dump for the failing step."""

    def __init__(self, message: str, diagnostics: dict[str, Any]):
        self.diagnostics = diagnostics
        super().__init__(message)
