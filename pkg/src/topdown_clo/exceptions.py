"""Exception hierarchy.

Validation problems derive from ``ValueError`` and solver problems from
``RuntimeError`` so callers that only know the builtins still catch them.
"""

from __future__ import annotations

import numpy as np


class CLOError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(CLOError, ValueError):
    """Malformed or inconsistent input data."""


class MissingMarketLoanPrice(ValidationError):
    """A basis was requested but no market loan price is available."""


class PinnedTrancheUnknown(ValidationError):
    """A pinned tranche does not exist in the bespoke PV matrix."""


class SolverError(CLOError, RuntimeError):
    """The entropy solver failed; ``residuals`` holds the last constraint violations."""

    def __init__(self, message: str, residuals=None, multipliers=None, iterations: int = 0):
        super().__init__(message)
        self.residuals = None if residuals is None else np.asarray(residuals, dtype=float)
        self.multipliers = None if multipliers is None else np.asarray(multipliers, dtype=float)
        self.iterations = iterations


class InfeasibleTarget(SolverError):
    """Targets lie outside the set of achievable expectations."""


class PriorSupportConflict(InfeasibleTarget):
    """Targets are achievable on the full scenario set but not on the prior's support."""


class NonConvergence(SolverError):
    """Iteration budget exhausted with residuals above tolerance."""
