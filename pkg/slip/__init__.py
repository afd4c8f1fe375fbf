"""
Spring-mass running model: stance simulation, stiffness shooting and
asymptotic approximations with their numerical verification.
"""

from slip.errors import (
    ConvergenceError,
    DomainError,
    EventNotFoundError,
    IterationBudgetError,
    SingularityError,
    SlipError,
    StepBudgetError,
)
from slip.model import DimensionalInputs, ModelParams, State, TouchdownConditions, Trajectory

__all__ = [
    "ConvergenceError",
    "DimensionalInputs",
    "DomainError",
    "EventNotFoundError",
    "IterationBudgetError",
    "ModelParams",
    "SingularityError",
    "SlipError",
    "State",
    "StepBudgetError",
    "TouchdownConditions",
    "Trajectory",
]
