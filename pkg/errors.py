"""
Exception hierarchy for the energy-Casimir reduction toolkit.

Every error carries the exit code the CLI returns when it escapes a command.
"""

from typing import List, Optional


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFICATION = 4


class CasimirError(Exception):
    """Base class for all toolkit errors."""
    exit_code: int = EXIT_NUMERICAL


# --- Parameter / Model Errors ---
class InvalidParameterError(CasimirError, ValueError):
    """A parameter lies outside its admissible range (k <= 0, R <= 0, ...)."""


class InvariantViolationError(CasimirError):
    """A function table breaks convexity or monotonicity."""


class DomainCutoffError(CasimirError):
    """An argument lies beyond the largest trusted abscissa of a table."""


class InternalConsistencyError(CasimirError):
    """A quantity that cannot be negative for valid input came out negative."""


class ModelMismatchError(CasimirError):
    """A state was built from a different model than the one supplied."""


class IncompatibleGridError(CasimirError):
    """Two densities that must share a grid do not."""


# --- Solver Errors ---
class UnboundedProfileError(CasimirError):
    """Shooting found no zero of the profile before the maximal radius."""


class StiffnessError(CasimirError):
    """The ODE integrator failed (step-size underflow)."""


class BracketFailureError(CasimirError):
    """The prescribed mass is not attained on the searched central values."""


class MultiplierError(CasimirError):
    """No multiplier E0 reproduces the prescribed mass."""


class NonConvergenceError(CasimirError):
    """The fixed-point iteration stalled at the damping floor."""

    def __init__(self, message: str, energies: Optional[List[float]] = None,
                 residuals: Optional[List[float]] = None):
        super().__init__(message)
        self.energies = list(energies or [])
        self.residuals = list(residuals or [])


# --- CLI Errors ---
class ConfigError(CasimirError):
    """Malformed model configuration; `line` is 1-based when known."""
    exit_code = EXIT_CONFIG

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class VerificationFailure(CasimirError):
    """At least one check of the verification suite failed."""
    exit_code = EXIT_VERIFICATION
