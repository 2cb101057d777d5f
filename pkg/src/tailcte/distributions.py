"""Parametric heavy-tailed loss laws with exact samplers and true CTE values.

Three families are supported:

* Frechet  ``F(x) = exp(-x^-alpha)``
* Burr     ``F(x) = 1 - (1 + x^tau)^-lambda``
* Pareto   ``F(x) = 1 - x^-alpha`` on ``x >= 1``

Each one satisfies Hall's expansion ``1 - F(x) = c x^-alpha + d x^-beta + ...``
and exposes its ``(alpha, beta, c, d)`` through :attr:`HeavyTailModel.hall`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .empirical import SortedSample
from .errors import DomainError, InfiniteMeanError

FAMILIES = ("frechet", "burr", "pareto")
QUAD_RTOL = 1e-10


class TailIndexWarning(UserWarning):
    """The model's tail index lies outside (1, 2)."""


@dataclass(frozen=True)
class HallParameters:
    """Hall's second-order tail parameters.

    ``beta`` is ``inf`` for the exact Pareto law, which has no second-order
    term (``d == 0``).
    """

    alpha: float
    beta: float
    c: float
    d: float

    def __post_init__(self):
        if not (self.beta > self.alpha > 0):
            raise DomainError(f"need beta > alpha > 0, got alpha={self.alpha}, beta={self.beta}")
        if self.c <= 0:
            raise DomainError(f"need c > 0, got {self.c}")


def frechet_quantile(p, alpha):
    """``(-ln p)^(-1/alpha)``, vectorised over ``p``."""
    p = np.asarray(p, dtype=float)
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    if np.any((p <= 0) | (p >= 1)):
        raise DomainError("Frechet quantile needs p in (0, 1)")
    out = (-np.log(p)) ** (-1.0 / alpha)
    return float(out) if out.ndim == 0 else out


def burr_quantile(p, lam, tau):
    """``((1-p)^(-1/lambda) - 1)^(1/tau)``, vectorised over ``p``."""
    p = np.asarray(p, dtype=float)
    if lam <= 0 or tau <= 0:
        raise DomainError("Burr parameters must be positive")
    if np.any((p < 0) | (p >= 1)):
        raise DomainError("Burr quantile needs p in [0, 1)")
    out = np.expm1(-np.log1p(-p) / lam) ** (1.0 / tau)
    return float(out) if out.ndim == 0 else out


def pareto_quantile(p, alpha):
    """``(1-p)^(-1/alpha)``; support starts at 1."""
    p = np.asarray(p, dtype=float)
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    if np.any((p < 0) | (p >= 1)):
        raise DomainError("Pareto quantile needs p in [0, 1)")
    out = (1.0 - p) ** (-1.0 / alpha)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HeavyTailModel:
    """A loss law from one of :data:`FAMILIES`.

    Use the ``frechet``/``burr``/``pareto`` constructors rather than the raw
    initialiser. ``alpha`` is the Frechet/Pareto shape; ``lam`` and ``tau``
    are the Burr shapes.
    """

    family: str
    alpha: float | None = None
    lam: float | None = None
    tau: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.family == "burr":
            if self.lam is None or self.tau is None or self.lam <= 0 or self.tau <= 0:
                raise DomainError("Burr needs lam > 0 and tau > 0")
        elif self.alpha is None or self.alpha <= 0:
            raise DomainError(f"{self.family} needs alpha > 0")
        if not self.applicable:
            warnings.warn(
                f"tail index {self.tail_index:g} outside (1, 2); the CTE estimators "
                "target the finite-mean, infinite-variance regime",
                TailIndexWarning,
                stacklevel=3,
            )

    @classmethod
    def frechet(cls, alpha: float) -> "HeavyTailModel":
        return cls("frechet", alpha=float(alpha))

    @classmethod
    def pareto(cls, alpha: float) -> "HeavyTailModel":
        return cls("pareto", alpha=float(alpha))

    @classmethod
    def burr(cls, lam: float, tau: float = 1.0) -> "HeavyTailModel":
        return cls("burr", lam=float(lam), tau=float(tau))

    @classmethod
    def burr_with_index(cls, alpha: float, lam: float) -> "HeavyTailModel":
        """Burr law with prescribed tail index: ``tau = alpha / lam``."""
        return cls.burr(lam, alpha / lam)

    @property
    def tail_index(self) -> float:
        if self.family == "burr":
            return self.tau * self.lam
        return self.alpha

    @property
    def applicable(self) -> bool:
        return 1.0 < self.tail_index < 2.0

    @property
    def hall(self) -> HallParameters:
        a = self.tail_index
        if self.family == "frechet":
            return HallParameters(a, 2.0 * a, 1.0, -0.5)
        if self.family == "burr":
            return HallParameters(a, a + self.tau, 1.0, -self.lam)
        return HallParameters(a, math.inf, 1.0, 0.0)

    def quantile(self, p):
        if self.family == "frechet":
            return frechet_quantile(p, self.alpha)
        if self.family == "burr":
            return burr_quantile(p, self.lam, self.tau)
        return pareto_quantile(p, self.alpha)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "frechet":
            with np.errstate(divide="ignore"):
                out = np.where(x > 0, np.exp(-np.where(x > 0, x, 1.0) ** -self.alpha), 0.0)
        elif self.family == "burr":
            xp = np.clip(x, 0.0, None)
            out = -np.expm1(-self.lam * np.log1p(xp ** self.tau))
        else:
            out = np.where(x >= 1, -np.expm1(-self.alpha * np.log(np.maximum(x, 1.0))), 0.0)
        return float(out) if out.ndim == 0 else out

    def upper_quantile(self, v):
        """``Q(1 - v)`` computed without forming ``1 - v`` (accurate for tiny v)."""
        v = np.asarray(v, dtype=float)
        if self.family == "frechet":
            out = (-np.log1p(-v)) ** (-1.0 / self.alpha)
        elif self.family == "burr":
            out = np.expm1(-np.log(v) / self.lam) ** (1.0 / self.tau)
        else:
            out = v ** (-1.0 / self.alpha)
        return out

    def describe(self) -> str:
        if self.family == "burr":
            return f"burr(lam={self.lam:g}, tau={self.tau:g})"
        return f"{self.family}(alpha={self.alpha:g})"


def _check_level(t):
    if not 0.0 < t < 1.0:
        raise DomainError(f"level t={t} outside (0, 1)")


def _tail_integral_quad(model: HeavyTailModel, t: float) -> float:
    """``int_0^{1-t} Q(1-v) dv`` with the ``v^(-1/alpha)`` singularity as weight."""
    a = model.tail_index
    if model.family == "frechet":
        # u = -ln s:  int_0^{-ln t} u^(-1/a) e^(-u) du
        value, _ = integrate.quad(
            lambda u: math.exp(-u), 0.0, -math.log(t),
            weight="alg", wvar=(-1.0 / a, 0.0), epsabs=0.0, epsrel=QUAD_RTOL, limit=200,
        )
        return value
    if model.family == "burr":
        lam, tau = model.lam, model.tau
        # Q(1-v) v^(1/a) = (1 - v^(1/lam))^(1/tau)
        smooth = lambda v: (-math.expm1(math.log(v) / lam)) ** (1.0 / tau) if v > 0 else 1.0
    else:
        smooth = lambda v: 1.0
    value, _ = integrate.quad(
        smooth, 0.0, 1.0 - t,
        weight="alg", wvar=(-1.0 / a, 0.0), epsabs=0.0, epsrel=QUAD_RTOL, limit=200,
    )
    return value


def true_cte(model: HeavyTailModel, t: float, method: str = "auto") -> float:
    """Conditional tail expectation ``(1/(1-t)) int_t^1 Q(s) ds``.

    ``method="auto"`` uses the Pareto closed form and quadrature elsewhere;
    ``method="quad"`` forces quadrature (handy for cross-checks).
    """
    _check_level(t)
    a = model.tail_index
    if a <= 1.0:
        raise InfiniteMeanError(f"tail index {a:g} <= 1 gives an infinite CTE")
    if method not in ("auto", "quad"):
        raise DomainError(f"unknown method {method!r}")
    if model.family == "pareto" and method == "auto":
        return (1.0 - t) ** (-1.0 / a) * a / (a - 1.0)
    return _tail_integral_quad(model, t) / (1.0 - t)


def replication_seed(seed: int, replication: int) -> np.random.SeedSequence:
    """Child stream ``replication`` of the master ``seed``."""
    return np.random.SeedSequence(int(seed), spawn_key=(int(replication),))


def open_uniform(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform draws on the open interval (0, 1), 53-bit resolution."""
    return (rng.integers(0, 2 ** 53, size=n, dtype=np.int64) + 0.5) * 2.0 ** -53


def sample(model: HeavyTailModel, n: int, seed) -> SortedSample:
    """Inverse-transform sample of size ``n``, sorted ascending.

    ``seed`` is an int or a :class:`numpy.random.SeedSequence`; equal seeds
    give bit-identical samples.
    """
    if int(n) < 1:
        raise DomainError("sample size must be >= 1")
    rng = np.random.default_rng(seed)
    u = open_uniform(rng, int(n))
    x = np.asarray(model.quantile(u), dtype=float)
    return SortedSample(np.sort(x))
