from __future__ import annotations


class OnofriError(Exception):
    """Base class for failures raised by the numerical operations."""


class GridError(OnofriError, ValueError):
    pass


class EvaluationError(OnofriError, ValueError):
    pass


class DomainError(OnofriError, ValueError):
    pass


class ConstraintError(OnofriError, ValueError):
    pass


class DegenerateError(OnofriError, ValueError):
    pass


class RangeError(OnofriError, ArithmeticError):
    pass


class StabilityError(OnofriError, ArithmeticError):
    def __init__(self, message: str, suggested_dt: float) -> None:
        super().__init__(f"{message} (try dt <= {suggested_dt:.3e})")
        self.suggested_dt = suggested_dt


class ConvergenceError(OnofriError, RuntimeError):
    def __init__(self, message: str, state: object = None) -> None:
        super().__init__(message)
        self.state = state
