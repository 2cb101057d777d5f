"""Semi-parametric CTE estimators for heavy-tailed losses.

Both estimators split ``int_t^1 Q(s) ds`` at ``1 - k/n``: the body is the exact
integral of the empirical quantile function and the tail ``(0, k/n]`` is an
extrapolation. The *old* estimator extrapolates with Weissman/Hill, the *new*
one integrates the bias-reduced quantile built on a CML fit.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .empirical import SortedSample, integrate_cells
from .errors import (
    DomainError,
    InfiniteMeanError,
    LevelThresholdError,
    UnusableFitError,
)
from .tail_inference import TailFit, hill

EPSILON_RANGE = (0.2, 1.0 / 3.0)
# beta/alpha below this triggers a warning (the asymptotics need beta/alpha > 1)
NEAR_DEGENERATE_RATIO = 1.05
# slack when comparing t*n with n - k
_LEVEL_SLACK = 1e-9


class KRuleWarning(UserWarning):
    """The k-selection exponent lies outside (1/5, 1/3)."""


class NearDegenerateFitWarning(UserWarning):
    """The fitted beta/alpha ratio is close to 1."""


@dataclass(frozen=True)
class CteEstimate:
    """One CTE estimate and what produced it."""

    value: float
    method: str
    t: float
    k: int
    n: int
    alpha_hat: float
    fit: TailFit | None = None
    sigma2: float | None = None
    scale_factor: float | None = None
    body: float = 0.0
    tail: float = 0.0

    @property
    def has_variance(self) -> bool:
        return self.sigma2 is not None


def level_within_body(n: int, k: int, t: float) -> bool:
    """True when ``t <= 1 - k/n`` (up to rounding), i.e. the body integral is non-negative."""
    return t * n <= (n - k) + _LEVEL_SLACK * n


def _body_integral(s: SortedSample, t: float, k: int, strict: bool) -> float:
    """Oriented integral ``int_t^{1-k/n} Q_n``.

    When ``t > 1 - k/n`` the integral is taken with its sign, so the tail
    extrapolation over ``(1 - k/n, 1]`` is corrected by the empirical mass on
    ``(1 - k/n, t]``. ``strict=True`` refuses that case instead.
    """
    n = s.n
    if not 0.0 < t < 1.0:
        raise DomainError(f"level t={t} outside (0, 1)")
    if not 1 <= k < n:
        raise DomainError(f"k={k} outside [1, n-1] for n={n}")
    a, b = t * n, float(n - k)
    if level_within_body(n, k, t):
        return integrate_cells(s.values, min(a, b), b)
    if strict:
        raise LevelThresholdError(
            f"t={t} lies above the tail threshold 1 - k/n = {1 - k / n:g}; "
            "lower k or t")
    return -integrate_cells(s.values, b, a)


def cte_old(s: SortedSample, t: float, k: int, strict: bool = False) -> CteEstimate:
    """Hill/Weissman CTE estimate.

    ``strict=True`` raises :class:`LevelThresholdError` when ``t > 1 - k/n``
    instead of using the oriented body integral.
    """
    k = int(k)
    body = _body_integral(s, t, k, strict)
    a = hill(s, k)
    if a <= 1.0:
        raise InfiniteMeanError(f"Hill estimate {a:.4g} <= 1: tail mean is infinite")
    tail = (k / s.n) * a * s.threshold(k) / (a - 1.0)
    return CteEstimate(
        value=(body + tail) / (1.0 - t), method="old", t=t, k=k, n=s.n,
        alpha_hat=a, body=body, tail=tail,
    )


def _bias_reduced_tail(fit: TailFit) -> float:
    """``int_0^{k/n}`` of the bias-reduced quantile, in closed form."""
    a, b, c, d = fit.alpha_hat, fit.beta_hat, fit.c_hat, fit.d_hat
    frac = fit.k / fit.n
    lead = frac * math.exp((math.log(c) - math.log(frac)) / a)
    if d == 0.0:
        corr = 0.0
    else:
        if not math.isfinite(d):
            raise UnusableFitError("d_hat overflowed")
        log_corr = math.log(abs(d)) - (b / a) * math.log(c) + (b / a - 1.0) * math.log(frac)
        if log_corr > 700.0:
            raise UnusableFitError("second-order correction overflows")
        corr = math.copysign(math.exp(log_corr), d) / (b - 1.0)
    return lead * (a / (a - 1.0) + corr)


def cte_new(s: SortedSample, t: float, k: int, fit: TailFit, strict: bool = False) -> CteEstimate:
    """Bias-reduced CTE estimate from a censored-ML tail fit.

    ``sigma2`` and ``scale_factor`` are attached when ``1 < alpha_hat < 2``.
    ``strict`` behaves as in :func:`cte_old`.
    """
    k = int(k)
    if fit.k != k or fit.n != s.n:
        raise DomainError(f"fit was made with (k={fit.k}, n={fit.n}), not (k={k}, n={s.n})")
    if not fit.converged:
        raise UnusableFitError("fit did not converge")
    if not fit.alpha_hat > 1.0:
        raise InfiniteMeanError(f"alpha_hat={fit.alpha_hat:.4g} must exceed 1")
    if not fit.beta_hat > fit.alpha_hat:
        raise UnusableFitError(
            f"beta_hat={fit.beta_hat:.4g} must exceed alpha_hat={fit.alpha_hat:.4g}")
    if not fit.c_hat > 0:
        raise UnusableFitError(f"c_hat={fit.c_hat:.4g} must be positive")
    if fit.beta_hat / fit.alpha_hat < NEAR_DEGENERATE_RATIO:
        warnings.warn(
            f"beta_hat/alpha_hat={fit.beta_hat / fit.alpha_hat:.4f} is close to 1",
            NearDegenerateFitWarning, stacklevel=2)
    body = _body_integral(s, t, k, strict)
    tail = _bias_reduced_tail(fit)
    value = (body + tail) / (1.0 - t)
    if not math.isfinite(value):
        raise UnusableFitError("bias-reduced CTE is not finite")
    s2 = scale = None
    if 1.0 < fit.alpha_hat < 2.0:
        s2 = sigma2(fit.alpha_hat, fit.beta_hat)
        scale = standardizer(s.n, k, t, fit.c_hat, fit.alpha_hat)
    return CteEstimate(
        value=value, method="new", t=t, k=k, n=s.n, alpha_hat=fit.alpha_hat,
        fit=fit, sigma2=s2, scale_factor=scale, body=body, tail=tail,
    )


def sigma2(alpha: float, beta: float) -> float:
    """Asymptotic variance of the standardized bias-reduced CTE estimator."""
    if not 1.0 < alpha < 2.0:
        raise DomainError(f"alpha={alpha} outside (1, 2)")
    if not beta > alpha:
        raise DomainError(f"beta={beta} must exceed alpha={alpha}")
    a, b = alpha, beta
    return (a * a * b ** 4 / ((a - 1.0) ** 4 * (a - b) ** 4)
            + 2.0 / (2.0 - a)
            + 2.0 * a * b * b / ((a - 1.0) ** 2 * (a - b) ** 2))


def standardizer(n: int, k: int, t: float, c: float, alpha: float) -> float:
    """``(k/n)^(1/2) (n c / k)^(1/alpha) / ((1 - t) sqrt(n))``.

    Dividing an estimation error by this gives a quantity that is
    asymptotically ``N(0, sigma2)``.
    """
    return math.sqrt(k / n) * (n * c / k) ** (1.0 / alpha) / ((1.0 - t) * math.sqrt(n))


def choose_k(n: int, epsilon: float = 0.25) -> int:
    """``floor(n^(1 - epsilon))`` clamped to ``[2, n - 1]``.

    For ``n <= 2`` the clamp yields ``n - 1`` (< 2), which :func:`cml_fit`
    rejects.
    """
    if n < 2:
        raise DomainError("choose_k needs n >= 2")
    lo, hi = EPSILON_RANGE
    if not lo < epsilon < hi:
        warnings.warn(
            f"epsilon={epsilon:g} outside (1/5, 1/3); the intermediate-sequence "
            "conditions are not guaranteed", KRuleWarning, stacklevel=2)
    k = math.floor(n ** (1.0 - epsilon))
    return min(max(k, 2), n - 1)
