"""Exception hierarchy for elbreak.

All library-specific failures derive from :class:`ElbreakError` so callers
can catch one base class. Input validation problems and numerical failures
are kept distinct because the CLI maps them to different exit codes.
"""

from __future__ import annotations


class ElbreakError(Exception):
    """Base class for all elbreak errors."""


class InputError(ElbreakError, ValueError):
    """Invalid user input: bad parameters, malformed data, series too short."""


class NumericalError(ElbreakError, ArithmeticError):
    """A computation produced an invalid numeric result (NaN/Inf, bad clamp)."""


class ConvexHullError(NumericalError):
    """The zero vector is not inside the convex hull of the estimating rows.

    The segment cannot satisfy the moment conditions for any probability
    weights, so the inner dual problem has no finite maximizer.
    """


class NonConvergence(NumericalError):
    """An iterative solver hit its iteration cap without meeting tolerance."""

    def __init__(self, message: str, iterations: int = 0, grad_norm: float = float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.grad_norm = grad_norm


class DegenerateSegment(NumericalError):
    """A segment's lagged design matrix is rank-deficient or noise-free."""


class ScanError(NumericalError):
    """Too many per-k failures during a change-point scan.

    Carries ``cause_counts``, a mapping from failure-class name to the number
    of candidate split points that failed with it.
    """

    def __init__(self, message: str, cause_counts: dict[str, int] | None = None):
        super().__init__(message)
        self.cause_counts = dict(cause_counts or {})


class BootstrapError(NumericalError):
    """The bootstrap null model is unusable (e.g. non-stationary OLS fit)."""
