"""Exception hierarchy for the spo package.

Every domain failure raises a subclass of SpoError so callers (and the CLI)
can separate "the math said no" from I/O and schema problems.
"""
from __future__ import annotations


class SpoError(Exception):
    """Base class for domain failures."""


class InstanceFormatError(SpoError):
    """Malformed instance file or instance data (schema level)."""


class EigensolverError(SpoError):
    """Eigensolver did not converge or failed its residual check."""

    def __init__(self, message: str, residual: float | None = None,
                 grid_index: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.grid_index = grid_index


class ScheduleConstraintError(SpoError):
    """Schedule violates boundary, amplitude, or slew constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        head = ", ".join(
            f"{v.constraint}(j={v.term}, i={v.grid_index}, by {v.magnitude:.3e})"
            for v in self.violations[:4]
        )
        more = "" if len(self.violations) <= 4 else f" (+{len(self.violations) - 4} more)"
        super().__init__(f"{len(self.violations)} constraint violation(s): {head}{more}")


class DegenerateGapError(SpoError):
    """First excited level is (numerically) degenerate; the gap gradient is set-valued."""

    def __init__(self, message: str, grid_index: int | None = None,
                 splitting: float | None = None):
        super().__init__(message)
        self.grid_index = grid_index
        self.splitting = splitting


class SubproblemError(SpoError):
    """Convex subproblem failed (LP solver failure or cutting-plane non-termination)."""


class NormDriftError(SpoError):
    """State norm drifted beyond tolerance during time evolution."""

    def __init__(self, message: str, drift: float):
        super().__init__(message)
        self.drift = drift
