"""Exception hierarchy shared by every evaluation module.

Measure incomputability (an undefined Ent or IBO score, an always-fair FSat) is
reported on the result object as a warning code, not raised. Only contract
violations end up here.
"""

from typing import Optional


class FairnessEvalError(Exception):
    """Base class for all errors raised by recsys_fairness_eval."""


class ValidationError(FairnessEvalError):
    """Input violates a domain invariant (duplicate item, unknown item, ...)."""

    def __init__(
        self,
        message: str,
        user: Optional[str] = None,
        item: Optional[str] = None,
        location: Optional[str] = None,
    ):
        self.user = user
        self.item = item
        self.location = location
        details = []
        if user is not None:
            details.append(f"user={user}")
        if item is not None:
            details.append(f"item={item}")
        if location is not None:
            details.append(f"at {location}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)


class InputFormatError(FairnessEvalError):
    """Malformed line in an input file."""

    def __init__(self, message: str, path: str, line: int, column: Optional[int] = None):
        self.path = path
        self.line = line
        self.column = column
        where = f"{path}:{line}" if column is None else f"{path}:{line}:{column}"
        super().__init__(f"{where}: {message}")


class NormalizationDegenerateError(FairnessEvalError):
    """Corrected variant requested where the most fair and most unfair values coincide."""


class UnsupportedBoundError(FairnessEvalError):
    """No closed form (or no tractable enumeration) exists for the requested bound."""


class UndefinedMeasureError(FairnessEvalError):
    """Operation whose contract is an error, not a flag, when the value is undefined."""


class ConfigError(FairnessEvalError):
    """Parameter outside the domain of the measure it configures."""
