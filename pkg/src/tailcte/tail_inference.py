"""Tail-index estimation and extreme-quantile extrapolation.

Contains the Hill estimator, the censored maximum-likelihood (CML) fit of the
first- and second-order indices ``(alpha, beta)`` of Hall's model
``1 - F(x) = c x^-alpha + d x^-beta + o(x^-beta)``, the plug-in estimates of
``(c, d)``, and the Weissman and bias-reduced (Li) high-quantile estimators.

Notation: ``L_i = log(X_{n-i+1:n} / X_{n-k:n})`` for ``i = 1..k`` are the
log-excesses over the threshold and ``M`` is their mean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import _kernels
from .empirical import SortedSample
from .errors import (
    DomainError,
    NonConvergenceError,
    NumericalDomainError,
    SingularityError,
    UnusableFitError,
)


def log_excesses(s: SortedSample, k: int) -> np.ndarray:
    """``L_i`` for ``i = 1..k``, largest first."""
    k = int(k)
    if not 1 <= k < s.n:
        raise DomainError(f"k={k} outside [1, n-1] for n={s.n}")
    anchor = s.threshold(k)
    if anchor <= 0:
        raise DomainError(f"threshold X_(n-k:n)={anchor:g} must be positive to take logs")
    return np.log(s.upper(k) / anchor)


def mean_log_excess(s: SortedSample, k: int) -> float:
    return math.fsum(log_excesses(s, k).tolist()) / k


def hill(s: SortedSample, k: int) -> float:
    """Hill estimate of the tail index from the top ``k`` order statistics."""
    m = mean_log_excess(s, k)
    if m <= 0:
        raise DomainError("top k+1 order statistics are tied; the Hill estimate is undefined")
    return 1.0 / m


# --------------------------------------------------------------------------
# censored maximum likelihood
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverOptions:
    """Settings for :func:`cml_fit`.

    ``alpha0``/``beta0`` override the default start ``(hill, 2 * hill)``.
    ``restarts`` is the number of extra starting points tried when the
    default start fails (0 disables them).
    """

    tolerance: float = 1e-10
    max_iterations: int = 100
    max_halvings: int = 30
    jacobian_step: float = 1e-6
    alpha0: float | None = None
    beta0: float | None = None
    restarts: int = 14


@dataclass(frozen=True)
class CmlSystemState:
    """Quantities of the CML system at one ``(alpha, beta)``."""

    alpha: float
    beta: float
    H_value: float
    G: np.ndarray = field(repr=False)
    residuals: tuple

    @property
    def admissible(self) -> bool:
        return bool(np.all(self.G > 0))

    @property
    def residual_norm(self) -> float:
        return max(abs(r) for r in self.residuals)


@dataclass(frozen=True)
class TailFit:
    """Fitted tail of one sample at one ``k``."""

    k: int
    n: int
    alpha_hat: float
    beta_hat: float
    c_hat: float
    d_hat: float
    mean_log_excess: float
    threshold: float
    converged: bool = True
    iterations: int = 0
    residual_norm: float = 0.0
    start: str = "default"


def _phi(alpha, beta, L):
    """``((alpha/beta) exp((beta-alpha) L) - 1) / (beta - alpha)``, stable as beta -> alpha."""
    delta = beta - alpha
    return np.expm1(delta * L - np.log1p(delta / alpha)) / delta


def system_state(L: np.ndarray, alpha: float, beta: float) -> CmlSystemState:
    """Evaluate ``H``, the ``G_i`` and the two residuals of the CML equations.

    ``G_i`` is computed from the algebraically identical form
    ``1 + alpha (beta M - 1) phi_i``, which avoids the cancellation the
    textbook form suffers when beta is close to alpha.
    """
    if not (beta > alpha > 0):
        raise DomainError(f"need beta > alpha > 0, got ({alpha}, {beta})")
    M = float(np.mean(L))
    G = 1.0 + alpha * (beta * M - 1.0) * _phi(alpha, beta, L)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = float(np.mean(1.0 / G)) - 1.0
        r2 = float(np.mean(L / G)) - 1.0 / beta
    return CmlSystemState(alpha, beta, 1.0 / alpha - M, G, (r1, r2))


def _reduced_residual(L, M, alpha, beta):
    """Root-equivalent form of the CML system, with the degenerate roots divided out.

    With ``G_i = 1 + c phi_i`` and ``c = alpha (beta M - 1)``, the raw
    residuals are ``r1 = -c S1`` and ``r2 = delta T2 + (1 - c/alpha) S1``
    where ``delta = beta - alpha``. Every point with ``beta = 1/M`` (c = 0) and
    the whole edge ``beta -> alpha`` solve the raw system trivially; ``(S1, T2)``
    vanish only at genuine roots.

    ``alpha`` and ``beta`` are 1-d arrays of trial points. Returns
    ``(reduced, raw, ok)`` with shapes ``(m, 2)``, ``(m, 2)``, ``(m,)``; ``ok``
    flags points where every ``G_i`` is finite and positive.
    """
    return _kernels.reduced_residuals(
        L, float(M), np.asarray(alpha, dtype=float).ravel(), np.asarray(beta, dtype=float).ravel())


def cml_log_likelihood(L: np.ndarray, alpha, beta):
    """Profile log-likelihood whose stationary points solve the CML system.

    Up to a constant it equals ``k log(beta) + sum log G_i - beta sum L_i``.
    Vectorised over array-valued ``alpha``/``beta``; returns ``-inf`` where
    some ``G_i <= 0``.
    """
    L = np.ascontiguousarray(L, dtype=float)
    alpha, beta = np.broadcast_arrays(np.asarray(alpha, dtype=float), np.asarray(beta, dtype=float))
    ll = _kernels.profile_log_likelihood(L, float(np.mean(L)), alpha.ravel().copy(), beta.ravel().copy())
    return ll.reshape(alpha.shape) if alpha.ndim else float(ll[0])


# bounds on log((beta - alpha) / alpha) outside which an attempt is abandoned
_EDGE_LO = math.log(1e-6)
_EDGE_HI = math.log(1e4)


# abandon an attempt whose residual fails to halve over this many iterations
_STALL_WINDOW = 8
_STALL_RATIO = 0.5
# roots this close to beta = 1/M (c_hat = 0) or beta = alpha are rejected
_DEGENERATE_TOL = 1e-4


def _degenerate(alpha, beta, M):
    return abs(beta * M - 1.0) < _DEGENERATE_TOL or beta / alpha - 1.0 < _DEGENERATE_TOL


@dataclass
class _Attempt:
    alpha: float
    beta: float
    iterations: int
    residual: float
    converged: bool
    domain_failure: bool = False


def _newton(L, M, alpha0, beta0, opts: SolverOptions) -> _Attempt:
    """Damped Newton in ``u = (log alpha, log(beta - alpha))``.

    An attempt is abandoned once the iterate runs into the edge
    ``beta / alpha -> 1`` or ``beta / alpha -> inf`` (no root lives there), or
    when the residual fails to halve over ``_STALL_WINDOW`` iterations. A
    step is halved until the point stays admissible and the merit norm does
    not increase.
    """
    u0, u1, it, norm, status = _kernels.newton_solve(
        L, float(M), math.log(alpha0), math.log(beta0 - alpha0), opts.tolerance,
        opts.max_iterations, opts.max_halvings, opts.jacobian_step,
        _EDGE_LO, _EDGE_HI, _STALL_WINDOW, _STALL_RATIO)
    if abs(u0) > 30.0 or u1 > 700.0:
        return _Attempt(math.nan, math.nan, it, math.inf, False, domain_failure=status == 2)
    a = math.exp(u0)
    b = a + math.exp(u1)
    if status == 0:
        state = system_state(L, a, b)
        good = state.admissible and state.residual_norm <= opts.tolerance and not _degenerate(a, b, M)
        return _Attempt(a, b, it, state.residual_norm, good)
    return _Attempt(a, b, it, norm, False, domain_failure=status == 2)


def _restart_points(L, M, count):
    """Extra starting points, best first.

    Alternates between the best cells of a coarse profile-likelihood grid and
    a fixed ladder of ``beta/alpha`` ratios at the Hill estimate; roots often
    sit at ``beta/alpha`` of 10 or more, where the likelihood is flat.
    """
    a_hill = 1.0 / M
    alphas = a_hill * np.geomspace(0.5, 2.0, 11)
    gaps = np.geomspace(1e-2, 1e3, 16)
    A, R = np.meshgrid(alphas, gaps, indexing="ij")
    ll = cml_log_likelihood(L, A, A * (1.0 + R)).ravel()
    order = np.argsort(-ll, kind="stable")
    grid = [(A.ravel()[i], A.ravel()[i] * (1.0 + R.ravel()[i])) for i in order if np.isfinite(ll[i])]
    ladder = [(a_hill, a_hill * (1.0 + g)) for g in (10.0, 0.3, 30.0, 3.0, 100.0, 0.1, 300.0)]
    starts = []
    for pair in zip(grid, ladder):
        starts.extend(pair)
    starts.extend(grid[len(ladder):])
    return starts[:count]


# beta/alpha ratios at the Hill estimate from which the likelihood is climbed
_ASCENT_RATIOS = (11.0, 31.0)


def _ascend(L, M, alpha0, beta0, max_evaluations=200):
    """Climb the profile likelihood from ``(alpha0, beta0)``; returns the end point.

    On samples where Newton wanders off to the edge from every start, a
    derivative-free ascent usually lands next to an interior root which
    Newton then polishes.
    """
    def objective(u):
        return _kernels.neg_log_likelihood_point(L, M, u[0], u[1])

    u0 = [math.log(alpha0), math.log(beta0 / alpha0 - 1.0)]
    res = optimize.minimize(objective, u0, method="Nelder-Mead",
                            options={"xatol": 1e-5, "fatol": 1e-9, "maxfev": max_evaluations})
    a = math.exp(res.x[0])
    return a, a * (1.0 + math.exp(res.x[1]))


def cml_fit(s: SortedSample, k: int, opts: SolverOptions | None = None) -> TailFit:
    """Censored-ML estimates of ``(alpha, beta)`` and the Hall coefficients.

    The CML equations are solved by damped Newton starting from
    ``(hill, 2 * hill)``. If that start fails, up to ``opts.restarts`` further
    starts are tried (see :func:`_restart_points`); the first one that
    converges to a non-degenerate root is returned.

    Raises
    ------
    DomainError
        ``k`` out of range, non-positive threshold or tied upper order statistics.
    NumericalDomainError
        every attempt ended with a damped step that left the region ``G_i > 0``.
    NonConvergenceError
        no attempt reached the tolerance; ``err.best`` holds the best iterate.
    """
    opts = opts or SolverOptions()
    k = int(k)
    if not 2 <= k < s.n:
        raise DomainError(f"cml_fit needs 2 <= k < n, got k={k}, n={s.n}")
    L = log_excesses(s, k)
    M = float(np.mean(L))
    if M <= 0:
        raise DomainError("top k+1 order statistics are tied; nothing to fit")
    a0 = opts.alpha0 if opts.alpha0 is not None else 1.0 / M
    b0 = opts.beta0 if opts.beta0 is not None else 2.0 * a0
    if not b0 > a0 > 0:
        raise DomainError(f"starting point needs beta0 > alpha0 > 0, got ({a0}, {b0})")

    attempts = [("default", _newton(L, M, a0, b0, opts))]
    if not attempts[0][1].converged and opts.restarts > 0:
        for ratio in _ASCENT_RATIOS:
            a, b = _ascend(L, M, 1.0 / M, ratio / M)
            attempts.append((f"ascent-{ratio:g}", _newton(L, M, a, b, opts)))
            if attempts[-1][1].converged:
                break
    if not attempts[-1][1].converged and opts.restarts > 0:
        for i, (a, b) in enumerate(_restart_points(L, M, opts.restarts)):
            attempts.append((f"restart-{i}", _newton(L, M, a, b, opts)))
            if attempts[-1][1].converged:
                break

    label, best = attempts[-1]
    if not best.converged:
        label, best = min(attempts, key=lambda p: p[1].residual)
        info = {
            "alpha": best.alpha,
            "beta": best.beta,
            "residual_norm": best.residual,
            "iterations": sum(p[1].iterations for p in attempts),
            "starts": len(attempts),
        }
        if all(p[1].domain_failure for p in attempts):
            raise NumericalDomainError(
                f"CML solver left the region G_i > 0 from every start (k={k})", info)
        raise NonConvergenceError(
            f"CML solver did not converge from {len(attempts)} start(s) (k={k}); "
            f"best residual {best.residual:.3g}", info)

    c_hat, d_hat = hall_coefficients(s, k, best.alpha, best.beta)
    return TailFit(
        k=k,
        n=s.n,
        alpha_hat=best.alpha,
        beta_hat=best.beta,
        c_hat=c_hat,
        d_hat=d_hat,
        mean_log_excess=M,
        threshold=s.threshold(k),
        converged=True,
        iterations=sum(p[1].iterations for p in attempts),
        residual_norm=best.residual,
        start=label,
    )


def hall_coefficients(s: SortedSample, k: int, alpha_hat: float, beta_hat: float):
    """Plug-in ``(c_hat, d_hat)`` of Hall's expansion."""
    if alpha_hat == beta_hat:
        raise SingularityError("alpha_hat == beta_hat makes c_hat and d_hat undefined")
    if not beta_hat > alpha_hat > 0:
        raise DomainError("need beta_hat > alpha_hat > 0")
    M = mean_log_excess(s, k)
    x = s.threshold(k)
    if x <= 0:
        raise DomainError("threshold must be positive")
    lead = alpha_hat * beta_hat / (alpha_hat - beta_hat) * (k / s.n)
    c_hat = _scaled_power(lead * (1.0 / beta_hat - M), x, alpha_hat)
    # opposite sign to c_hat's prefactor: makes d_hat consistent for d in Hall's model
    d_hat = _scaled_power(-lead * (1.0 / alpha_hat - M), x, beta_hat)
    return c_hat, d_hat


def _scaled_power(coef: float, x: float, p: float) -> float:
    """``coef * x**p`` that saturates to a signed infinity instead of overflowing."""
    if coef == 0.0:
        return 0.0
    log_mag = math.log(abs(coef)) + p * math.log(x)
    if log_mag > 709.0:
        return math.copysign(math.inf, coef)
    return math.copysign(math.exp(log_mag), coef)


def synthetic_fit(s: SortedSample, k: int, alpha_hat, beta_hat, c_hat, d_hat) -> TailFit:
    """A :class:`TailFit` with hand-picked parameters (tests, what-if analysis)."""
    return TailFit(
        k=int(k), n=s.n, alpha_hat=float(alpha_hat), beta_hat=float(beta_hat),
        c_hat=float(c_hat), d_hat=float(d_hat), mean_log_excess=mean_log_excess(s, k),
        threshold=s.threshold(k), start="synthetic",
    )


# --------------------------------------------------------------------------
# high quantiles
# --------------------------------------------------------------------------


def weissman_quantile(s: SortedSample, k: int, alpha_hat: float, prob):
    """Weissman extrapolation of ``Q(1 - prob)`` anchored at ``X_{n-k:n}``."""
    prob = np.asarray(prob, dtype=float)
    if alpha_hat <= 0:
        raise DomainError("alpha_hat must be positive")
    if np.any((prob <= 0) | (prob >= 1)):
        raise DomainError("tail probability must lie in (0, 1)")
    out = s.threshold(k) * (k / s.n / prob) ** (1.0 / alpha_hat)
    return float(out) if out.ndim == 0 else out


def li_quantile(fit: TailFit, prob):
    """Bias-reduced estimate of ``Q(1 - prob)`` from a CML fit."""
    if not fit.converged:
        raise UnusableFitError("fit did not converge")
    if fit.c_hat <= 0:
        raise UnusableFitError(f"c_hat={fit.c_hat:g} <= 0; the extrapolation is undefined")
    prob = np.asarray(prob, dtype=float)
    if np.any((prob <= 0) | (prob >= 1)):
        raise DomainError("tail probability must lie in (0, 1)")
    a, b, c, d = fit.alpha_hat, fit.beta_hat, fit.c_hat, fit.d_hat
    out = (c / prob) ** (1.0 / a) * (1.0 + d * c ** (-b / a) * prob ** (b / a - 1.0) / a)
    return float(out) if out.ndim == 0 else out
