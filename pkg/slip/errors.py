"""
Exception hierarchy for the stance-phase toolkit.
Every failure raised by the library derives from SlipError so callers can
catch one type and still tell validation problems from numerical ones.
"""

from typing import Any, Dict, Optional, Sequence


class SlipError(Exception):
    """Base class for all library errors."""

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable form used by the CLI on standard error."""
        return {"error": type(self).__name__, "message": self.message, **self.context}


class DomainError(SlipError, ValueError):
    """Invalid input, violated invariant or failed precondition."""


class SingularityError(SlipError, ArithmeticError):
    """
    The leg length fell below the guard (or a Cartesian point hit the origin).

    Attributes:
        time: Time of the last good state, if known
        state: Last good state vector, if known
    """

    def __init__(
        self,
        message: str,
        time: Optional[float] = None,
        state: Optional[Sequence[float]] = None,
        **context: Any
    ):
        super().__init__(message, time=time, state=state, **context)
        self.time = time
        self.state = None if state is None else tuple(state)


class StepBudgetError(SlipError, RuntimeError):
    """The integrator ran out of steps before reaching the end time."""

    def __init__(
        self,
        message: str,
        time: Optional[float] = None,
        state: Optional[Sequence[float]] = None,
        **context: Any
    ):
        super().__init__(message, time=time, state=state, **context)
        self.time = time
        self.state = None if state is None else tuple(state)


class EventNotFoundError(SlipError, LookupError):
    """No crossing in the requested direction before the search horizon."""


class ConvergenceError(SlipError, RuntimeError):
    """Secant iteration stagnated with the residual above tolerance."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None, **context: Any):
        super().__init__(message, diagnostics=diagnostics, **context)
        self.diagnostics = diagnostics or {}


class IterationBudgetError(ConvergenceError):
    """Secant iteration budget exhausted."""

