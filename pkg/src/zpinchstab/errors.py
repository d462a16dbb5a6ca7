"""Exception types shared across the solver."""
from __future__ import annotations


class ZpinchError(Exception):
    """Base class for all errors raised by this package."""


class NonAdmissibleProfile(ZpinchError):
    """Pressure profile violates an admissibility requirement."""


class NegativeFieldSquare(ZpinchError):
    """Computed azimuthal field square went negative (bad profile data)."""


class InvalidGrid(ZpinchError):
    """Radial evaluation grid is malformed (non-monotone, out of range, ...)."""


class BadGrading(ZpinchError):
    """Mesh grading parameters out of range."""


class NonPositiveViscosity(ZpinchError):
    """Viscosity coefficients must be strictly positive."""


class ModeSpaceMismatch(ZpinchError):
    """Discrete space does not carry the boundary pins the mode requires."""


class SingularVacuumBlock(ZpinchError):
    """Interior vacuum block is numerically singular; cannot condense."""


class NoConvergence(ZpinchError):
    """Iterative eigensolver failed to reach the residual target."""


class BracketExhausted(ZpinchError):
    """Fixed-point bracketing ran out of doublings before sign change."""


class InsufficientModes(ZpinchError):
    """Scan result does not contain enough modes for the requested fit."""


class StepRejected(ZpinchError):
    """Time integrator rejected a step (bad step size, factorization
    failure, or non-finite state)."""


class ParseError(ZpinchError):
    """Configuration file could not be parsed."""


class ValidationError(ZpinchError):
    """Configuration parsed but failed validation.

    Carries the full list of violations so a user can fix them in one pass.
    """

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
