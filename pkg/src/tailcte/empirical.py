"""Order statistics and the piecewise-constant empirical quantile function.

Cell convention: ``Q_n(p) = X_{i:n}`` for ``p`` in ``((i-1)/n, i/n]``, so a
grid point ``i/n`` belongs to the lower cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# relative slack used to snap n*p onto an integer grid point
_GRID_SNAP = 1e-12


@dataclass(frozen=True, eq=False)
class SortedSample:
    """Immutable ascending sample; ``values[i]`` is ``X_{i+1:n}``."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise DomainError("a sample needs at least one observation")
        if np.any(np.diff(values) < 0):
            raise DomainError("values must be sorted ascending; use make_sorted")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def order_stat(self, i: int) -> float:
        """``X_{i:n}`` with the usual 1-based indexing."""
        if not 1 <= i <= self.n:
            raise DomainError(f"order statistic index {i} outside [1, {self.n}]")
        return float(self.values[i - 1])

    def upper(self, k: int) -> np.ndarray:
        """Top ``k`` order statistics, largest first: ``X_{n-i+1:n}``, i=1..k."""
        return self.values[self.n - k:][::-1]

    def threshold(self, k: int) -> float:
        """``X_{n-k:n}``, the anchor of every tail extrapolation."""
        return self.order_stat(self.n - k)

    def scaled(self, factor: float) -> "SortedSample":
        if factor <= 0:
            raise DomainError("scale factor must be positive")
        return SortedSample(self.values * factor)

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"SortedSample(n={self.n}, min={self.values[0]:.6g}, max={self.values[-1]:.6g})"


def make_sorted(data) -> SortedSample:
    """Build a :class:`SortedSample` from arbitrary real data."""
    arr = np.asarray(data, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError("cannot build a sample from empty input")
    if not np.all(np.isfinite(arr)):
        raise DomainError("sample contains non-finite values")
    return SortedSample(np.sort(arr, kind="stable"))


def _cell_index(x: float) -> int:
    """Ceiling of ``x`` with grid points snapped (0.3*10 -> 3, not 4)."""
    r = round(x)
    if abs(x - r) <= _GRID_SNAP * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


def empirical_quantile(s: SortedSample, p: float) -> float:
    """Return ``X_{ceil(n p):n}`` for ``0 < p <= 1``."""
    if not 0.0 < p <= 1.0:
        raise DomainError(f"p={p} outside (0, 1]")
    i = max(1, _cell_index(s.n * p))
    return s.order_stat(i)


def integrate_cells(values: np.ndarray, a: float, b: float) -> float:
    """Integral of the empirical quantile over ``(a/n, b/n]``.

    ``a`` and ``b`` are given in cell units (``0 <= a <= b <= n``) so callers
    holding integer bounds such as ``n - k`` keep them exact.
    """
    n = values.size
    if a == b:
        return 0.0
    lo_cell = math.floor(a) + 1           # first cell touched
    hi_cell = min(_cell_index(b), n)      # last cell touched
    if hi_cell < lo_cell:
        return 0.0
    idx = np.arange(lo_cell, hi_cell + 1, dtype=float)
    width = np.minimum(idx, b) - np.maximum(idx - 1.0, a)
    terms = values[lo_cell - 1:hi_cell] * width
    return math.fsum(terms.tolist()) / n


def partial_integral(s: SortedSample, lo: float, hi: float) -> float:
    """Exact integral of ``Q_n`` over ``(lo, hi]``, no quadrature involved."""
    if not (0.0 <= lo <= 1.0 and 0.0 <= hi <= 1.0):
        raise DomainError(f"bounds ({lo}, {hi}) must lie in [0, 1]")
    if lo > hi:
        raise DomainError(f"lo={lo} exceeds hi={hi}")
    return integrate_cells(s.values, lo * s.n, hi * s.n)
