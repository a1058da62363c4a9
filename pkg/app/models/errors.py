"""
Exception hierarchy for the Lévy tree laboratory
"""

from typing import Any, Dict, Optional


class LabError(Exception):
    """Base class for every error raised by the lab"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details: Dict[str, Any] = dict(details or {})

    def to_dict(self) -> Dict[str, Any]:
        return {"type": type(self).__name__, "message": str(self), "details": self.details}


class DomainError(LabError, ValueError):
    """Argument outside the domain of an operation"""


class ConfigError(LabError):
    """Configuration file or override rejected by the schema"""


class ConvergenceError(LabError):
    """
    Iterative solver stopped without meeting its tolerance.

    The last bracket (or the last integrator state) is kept in ``details``
    so reports can show where the solver gave up.
    """


class QuadratureError(ConvergenceError):
    """Adaptive quadrature failed; ``partial_value`` holds what was accumulated"""

    def __init__(self, message: str, partial_value: float, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details)
        self.partial_value = partial_value
        self.details.setdefault("partial_value", partial_value)


class SamplerBudgetError(LabError):
    """Resampling or jump budget exhausted"""

    def __init__(self, message: str, attempts: int, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details)
        self.attempts = attempts
        self.details.setdefault("attempts", attempts)


class SolverCapError(LabError):
    """Exact packing solver refused an instance above its pair cap; use greedy"""
