"""
Exception hierarchy for the velocity-turnpike toolkit.

Library code raises these; the CLI maps the validation family to exit code 1,
the numerical family to exit code 2 and OS errors to exit code 3.
"""

from typing import Any, List, Optional, Sequence


class TurnpikeError(Exception):
    """Base class for every error raised by this package."""


# ---------------------------------------------------------------------------
# Validation family (exit code 1)
# ---------------------------------------------------------------------------

class ModelValidationError(TurnpikeError, ValueError):
    """Inconsistent dimensions, invalid matrices or missing trajectory data."""


class UnknownSystemError(TurnpikeError, LookupError):
    """Registry lookup failed."""

    def __init__(self, name: str, available: Sequence[str]):
        self.name = name
        self.available = list(available)
        super().__init__(
            f"Unknown system '{name}'. Available systems: {', '.join(self.available)}"
        )


class ExprSyntaxError(TurnpikeError, ValueError):
    """Malformed expression source."""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class UnknownIdentifierError(TurnpikeError, ValueError):
    """Identifier that is neither a state/input variable nor a known function."""

    def __init__(self, identifier: str, valid: Sequence[str], line: int, column: int):
        self.identifier = identifier
        self.valid = list(valid)
        self.line = line
        self.column = column
        super().__init__(
            f"Unknown identifier '{identifier}' at line {line}, column {column}. "
            f"Valid names: {', '.join(self.valid)}"
        )


class ScenarioError(TurnpikeError, ValueError):
    """Scenario file failed schema validation; `path` is the dotted key path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class InvalidStorageError(TurnpikeError, ValueError):
    """Storage function took a negative value on a sampled state."""


# ---------------------------------------------------------------------------
# Numerical family (exit code 2)
# ---------------------------------------------------------------------------

class ExprDomainError(TurnpikeError, ArithmeticError):
    """Evaluation left the domain of an operation (e.g. division by zero)."""

    def __init__(self, message: str, subexpression: str):
        self.subexpression = subexpression
        super().__init__(f"{message} in '{subexpression}'")


class SingularMatrixError(TurnpikeError, ArithmeticError):
    """Factorization met a pivot that is zero to tolerance."""

    def __init__(self, message: str, pivot_index: Optional[int] = None):
        self.pivot_index = pivot_index
        if pivot_index is not None:
            message = f"{message} (pivot index {pivot_index})"
        super().__init__(message)


class IntegrationError(TurnpikeError, ArithmeticError):
    """Right-hand side returned a non-finite value."""

    def __init__(self, message: str, time: float):
        self.time = time
        super().__init__(f"{message} at t={time:.6g}")


class ConvergenceError(TurnpikeError, RuntimeError):
    """Iteration limit reached or line search stalled.

    `result` optionally holds a partial solution object built from the last
    iterate so callers can still inspect it.
    """

    def __init__(
        self,
        message: str,
        last_iterate: Any = None,
        residual_norm: float = float("nan"),
        history: Optional[List[float]] = None,
        result: Any = None,
    ):
        self.last_iterate = last_iterate
        self.residual_norm = residual_norm
        self.history = list(history or [])
        self.result = result
        super().__init__(f"{message} (last residual norm {residual_norm:.3e})")


class UnavailableBoundError(TurnpikeError, RuntimeError):
    """Turnpike bound requested without a strict dissipativity certificate."""


VALIDATION_ERRORS = (
    ModelValidationError,
    UnknownSystemError,
    ExprSyntaxError,
    UnknownIdentifierError,
    ScenarioError,
    InvalidStorageError,
)

NUMERICAL_ERRORS = (
    ExprDomainError,
    SingularMatrixError,
    IntegrationError,
    ConvergenceError,
    UnavailableBoundError,
)
