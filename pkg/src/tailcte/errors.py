"""Exception hierarchy shared by the estimators."""


class TailCteError(ValueError):
    """Base class for every error raised by this package."""


class DomainError(TailCteError):
    """An argument lies outside the domain of the operation."""


class InfiniteMeanError(TailCteError):
    """The (estimated) tail index is <= 1, so the CTE is infinite."""


class LevelThresholdError(TailCteError):
    """The level t lies above the tail threshold 1 - k/n."""


class SingularityError(TailCteError):
    """A formula hits a removable-but-undefined point (e.g. alpha == beta)."""


class UnusableFitError(TailCteError):
    """A tail fit cannot feed the bias-reduced extrapolation."""


class NonConvergenceError(TailCteError):
    """The censored-ML solver did not reach its tolerance.

    ``best`` holds the best iterate seen as a dict with keys
    ``alpha``, ``beta``, ``residual_norm`` and ``iterations``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best or {}


class NumericalDomainError(NonConvergenceError):
    """Every damped step produced a non-positive G_i."""
