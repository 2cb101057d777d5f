"""Seeded Monte Carlo comparison of the two CTE estimators.

Every replication ``r`` draws its sample from the child stream ``(seed, r)``,
so a report depends only on its configuration. Replications may run in
worker processes; results are gathered into one array in replication order
before any reduction, which keeps the output bit-identical for any worker
count.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .cte import choose_k, cte_new, cte_old, level_within_body
from .distributions import HeavyTailModel, replication_seed, sample, true_cte
from .empirical import SortedSample
from .errors import DomainError, LevelThresholdError, TailCteError
from .tail_inference import SolverOptions, cml_fit

DEFAULT_SEED = 20240917
ESTIMATORS = ("old", "new")
FLOAT_FORMAT = "%.10g"

# estimator(sample, t_levels, k, cfg) -> one value per level (NaN on failure)
EstimatorFn = Callable[[SortedSample, Sequence[float], int, "ExperimentConfig"], np.ndarray]


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment.

    Parameters
    ----------
    model : HeavyTailModel
        Law the samples are drawn from.
    n : int
        Sample size.
    reps : int
        Number of replications.
    t_levels : sequence of float
        CTE levels evaluated on every replication.
    k : int, optional
        Fixed number of upper order statistics. When omitted ``k`` follows
        ``floor(n^(1 - epsilon))``.
    epsilon : float
        Exponent of the k rule, used only when ``k`` is None.
    seed : int
        Master seed.
    estimators : sequence of str
        Names from :data:`ESTIMATORS` (or from a custom registry).
    fallback : bool
        Replace a failed new-estimator value with the old estimator's value.
    strict_level : bool
        Refuse levels ``t >= 1 - k/n`` instead of using the oriented body
        integral.
    solver : SolverOptions
        Options forwarded to the CML fit.
    """

    model: HeavyTailModel
    n: int
    reps: int
    t_levels: tuple = (0.9, 0.95)
    k: int | None = None
    epsilon: float = 0.25
    seed: int = DEFAULT_SEED
    estimators: tuple = ESTIMATORS
    fallback: bool = False
    strict_level: bool = False
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        object.__setattr__(self, "t_levels", tuple(float(t) for t in self.t_levels))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if int(self.reps) < 1:
            raise DomainError(f"reps must be >= 1, got {self.reps}")
        if int(self.n) < 3:
            raise DomainError(f"n must be >= 3, got {self.n}")
        if not self.t_levels:
            raise DomainError("at least one level t is required")
        for t in self.t_levels:
            if not 0.0 < t < 1.0:
                raise DomainError(f"level t={t} outside (0, 1)")
        if not self.estimators or len(set(self.estimators)) != len(self.estimators):
            raise DomainError(f"estimators must be distinct and non-empty, got {self.estimators}")
        k = self.resolved_k
        if not 2 <= k < self.n:
            raise DomainError(f"k={k} outside [2, n-1] for n={self.n}")
        if self.strict_level:
            for t in self.t_levels:
                if not level_within_body(self.n, k, t):
                    raise LevelThresholdError(
                        f"t={t} is not below 1 - k/n = {1 - k / self.n:g}")

    @property
    def resolved_k(self) -> int:
        if self.k is not None:
            return int(self.k)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return choose_k(int(self.n), self.epsilon)


@dataclass(frozen=True)
class ReportCell:
    """Summary of one ``(t, estimator)`` pair over all replications."""

    t: float
    estimator: str
    k: int
    true_cte: float
    mc_mean: float
    bias: float
    rmse: float
    failure_count: int
    fallback_count: int
    successes: int

    @property
    def abs_bias(self) -> float:
        return abs(self.bias)


@dataclass(frozen=True)
class ExperimentReport:
    """Cells of one experiment plus the raw per-replication estimates.

    ``estimates[name]`` has shape ``(reps, len(t_levels))`` with NaN where
    the estimator failed (after any fallback).
    """

    config: ExperimentConfig
    cells: tuple
    estimates: Mapping[str, np.ndarray] = field(repr=False)

    def cell(self, t: float, estimator: str) -> ReportCell:
        for c in self.cells:
            if c.estimator == estimator and math.isclose(c.t, t, rel_tol=0, abs_tol=1e-12):
                return c
        raise KeyError((t, estimator))

    def rows(self) -> list[dict]:
        """Flat rows with the simulate CSV schema."""
        m = self.config.model
        return [
            {
                "model": m.family,
                "alpha": m.tail_index,
                "n": self.config.n,
                "t": c.t,
                "estimator": c.estimator,
                "k": c.k,
                "true_cte": c.true_cte,
                "mean": c.mc_mean,
                "bias": c.bias,
                "rmse": c.rmse,
                "failures": c.failure_count,
            }
            for c in self.cells
        ]


REPORT_COLUMNS = ("model", "alpha", "n", "t", "estimator", "k",
                  "true_cte", "mean", "bias", "rmse", "failures")
SWEEP_COLUMNS = ("k", "mean_old", "mean_new", "true_cte")


# --------------------------------------------------------------------------
# built-in estimators
# --------------------------------------------------------------------------


def _old_values(s, t_levels, k, cfg):
    out = np.full(len(t_levels), np.nan)
    for j, t in enumerate(t_levels):
        try:
            out[j] = cte_old(s, t, k, strict=cfg.strict_level).value
        except TailCteError:
            pass
    return out


def _new_values(s, t_levels, k, cfg, opts=None):
    out = np.full(len(t_levels), np.nan)
    try:
        fit = cml_fit(s, k, opts or cfg.solver)
    except TailCteError:
        return out, None
    for j, t in enumerate(t_levels):
        try:
            out[j] = cte_new(s, t, k, fit, strict=cfg.strict_level).value
        except TailCteError:
            pass
    return out, fit


BUILTIN_ESTIMATORS: dict[str, EstimatorFn] = {
    "old": _old_values,
    "new": lambda s, t_levels, k, cfg: _new_values(s, t_levels, k, cfg)[0],
}


# --------------------------------------------------------------------------
# replications
# --------------------------------------------------------------------------


def _replicate(cfg: ExperimentConfig, r: int, registry: Mapping[str, EstimatorFn]):
    """Estimates of replication ``r``: values ``(n_est, n_t)`` and fallback flags."""
    s = sample(cfg.model, cfg.n, replication_seed(cfg.seed, r))
    k = cfg.resolved_k
    n_t = len(cfg.t_levels)
    values = np.full((len(cfg.estimators), n_t), np.nan)
    used_fallback = np.zeros((len(cfg.estimators), n_t), dtype=bool)
    old_cache = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for e, name in enumerate(cfg.estimators):
            values[e] = registry[name](s, cfg.t_levels, k, cfg)
            if name == "old":
                old_cache = values[e]
        if cfg.fallback and "new" in cfg.estimators:
            e = cfg.estimators.index("new")
            missing = np.isnan(values[e])
            if missing.any():
                if old_cache is None:
                    old_cache = _old_values(s, cfg.t_levels, k, cfg)
                fill = missing & ~np.isnan(old_cache)
                values[e, fill] = old_cache[fill]
                used_fallback[e] = fill
    return values, used_fallback


def _run_chunk(args):
    cfg, indices = args
    out = [_replicate(cfg, r, BUILTIN_ESTIMATORS) for r in indices]
    return np.stack([v for v, _ in out]), np.stack([f for _, f in out])


def _chunks(reps: int, workers: int):
    size = max(1, math.ceil(reps / (4 * workers)))
    return [range(i, min(i + size, reps)) for i in range(0, reps, size)]


def _map_replications(cfg: ExperimentConfig, workers: int, registry=None):
    """Per-replication arrays in replication order.

    Custom registries run in-process (their callables need not be picklable).
    """
    if registry is not None or workers <= 1 or cfg.reps == 1:
        reg = dict(BUILTIN_ESTIMATORS, **(registry or {}))
        out = [_replicate(cfg, r, reg) for r in range(cfg.reps)]
        return np.stack([v for v, _ in out]), np.stack([f for _, f in out])
    jobs = [(cfg, idx) for idx in _chunks(cfg.reps, workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, jobs))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def summarize(estimates: np.ndarray, truth: float) -> tuple[float, float, float, int]:
    """``(mean, bias, rmse, failures)`` of one column of replication estimates.

    NaN entries are failures and are left out of every statistic; when all
    replications failed the three statistics are NaN.
    """
    x = np.asarray(estimates, dtype=float)
    ok = x[~np.isnan(x)]
    failures = int(x.size - ok.size)
    if ok.size == 0:
        return math.nan, math.nan, math.nan, failures
    err = ok - truth
    mean = math.fsum(ok) / ok.size
    rmse = math.sqrt(math.fsum(err * err) / ok.size)
    return mean, mean - truth, rmse, failures


def run_experiment(cfg: ExperimentConfig, workers: int = 1,
                   registry: Mapping[str, EstimatorFn] | None = None) -> ExperimentReport:
    """Run all replications of ``cfg`` and summarise each ``(t, estimator)``.

    Parameters
    ----------
    cfg : ExperimentConfig
    workers : int
        Worker processes; the report does not depend on this value.
    registry : mapping, optional
        Extra estimators by name, e.g. a constant estimator for testing. They
        are evaluated in the calling process.
    """
    reg = dict(BUILTIN_ESTIMATORS, **(registry or {}))
    unknown = [e for e in cfg.estimators if e not in reg]
    if unknown:
        raise DomainError(f"unknown estimators {unknown}; choose from {sorted(reg)}")
    values, fallbacks = _map_replications(cfg, workers, registry)
    truths = [true_cte(cfg.model, t) for t in cfg.t_levels]
    k = cfg.resolved_k
    cells = []
    for j, t in enumerate(cfg.t_levels):
        for e, name in enumerate(cfg.estimators):
            mean, bias, rmse, failures = summarize(values[:, e, j], truths[j])
            cells.append(ReportCell(
                t=t, estimator=name, k=k, true_cte=truths[j], mc_mean=mean,
                bias=bias, rmse=rmse, failure_count=failures,
                fallback_count=int(fallbacks[:, e, j].sum()),
                successes=cfg.reps - failures,
            ))
    estimates = {name: values[:, e, :].copy() for e, name in enumerate(cfg.estimators)}
    return ExperimentReport(cfg, tuple(cells), estimates)


# --------------------------------------------------------------------------
# k sweeps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KSweepRow:
    k: int
    mean_old: float
    mean_new: float
    true_cte: float
    valid: bool = True
    failures_old: int = 0
    failures_new: int = 0


@dataclass(frozen=True)
class KSweepCurve:
    """Monte Carlo means of both estimators over a grid of ``k``."""

    rows: tuple
    kmin: int
    kmax: int
    step: int
    t: float

    @property
    def ks(self) -> np.ndarray:
        return np.array([r.k for r in self.rows])

    def closer_fraction(self) -> float:
        """Share of valid rows where the new mean is closer to the truth than the old one.

        A row whose old mean is NaN (all replications failed) while the new
        one is finite counts as a win for the new estimator, and vice versa.
        """
        wins = total = 0
        for r in self.rows:
            if not r.valid:
                continue
            total += 1
            dn = abs(r.mean_new - r.true_cte)
            do = abs(r.mean_old - r.true_cte)
            if math.isnan(dn):
                continue
            if math.isnan(do) or dn < do:
                wins += 1
        return wins / total if total else math.nan

    def row_dicts(self) -> list[dict]:
        return [{"k": r.k, "mean_old": r.mean_old, "mean_new": r.mean_new,
                 "true_cte": r.true_cte} for r in self.rows]


def k_grid(kmin: int, kmax: int, step: int) -> list[int]:
    return list(range(int(kmin), int(kmax) + 1, int(step)))


def _sweep_replicate(cfg: ExperimentConfig, r: int, ks, t: float, valid):
    """Old/new values of replication ``r`` on every grid ``k`` (one shared sample).

    Each fit starts from the root found at the previous grid point, which is
    both faster and steadier than a cold start at every ``k``.
    """
    s = sample(cfg.model, cfg.n, replication_seed(cfg.seed, r))
    out = np.full((len(ks), 2), np.nan)
    prev = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i, k in enumerate(ks):
            if not valid[i]:
                continue
            out[i, 0] = _old_values(s, (t,), k, cfg)[0]
            opts = cfg.solver
            if prev is not None:
                opts = replace(opts, alpha0=prev.alpha_hat, beta0=prev.beta_hat)
            value, fit = _new_values(s, (t,), k, cfg, opts)
            if fit is None and prev is not None:
                value, fit = _new_values(s, (t,), k, cfg)
            out[i, 1] = value[0]
            if fit is not None:
                prev = fit
            if cfg.fallback and np.isnan(out[i, 1]):
                out[i, 1] = out[i, 0]
    return out


def _run_sweep_chunk(args):
    cfg, indices, ks, t, valid = args
    return np.stack([_sweep_replicate(cfg, r, ks, t, valid) for r in indices])


def k_sweep(cfg: ExperimentConfig, kmin: int, kmax: int, step: int,
            t: float | None = None, workers: int = 1) -> KSweepCurve:
    """Monte Carlo means of both estimators for ``k = kmin, kmin + step, ..., <= kmax``.

    Replication ``r`` uses the same sample at every ``k``. With
    ``cfg.strict_level`` a grid point with ``t >= 1 - k/n`` is kept as an
    invalid row (NaN means) rather than aborting the sweep.
    """
    n = cfg.n
    if not 2 <= kmin < kmax < n:
        raise DomainError(f"need 2 <= kmin < kmax < n, got kmin={kmin}, kmax={kmax}, n={n}")
    if int(step) < 1:
        raise DomainError(f"step must be >= 1, got {step}")
    if t is None:
        if len(cfg.t_levels) != 1:
            raise DomainError("pass t explicitly when the config has several levels")
        t = cfg.t_levels[0]
    ks = k_grid(kmin, kmax, step)
    valid = [not cfg.strict_level or level_within_body(n, k, t) for k in ks]
    # invalid grid points are skipped, so the rows that run need no level check
    base = replace(cfg, t_levels=(t,), k=ks[0], strict_level=False)
    if workers <= 1 or cfg.reps == 1:
        values = np.stack([_sweep_replicate(base, r, ks, t, valid) for r in range(cfg.reps)])
    else:
        jobs = [(base, idx, ks, t, valid) for idx in _chunks(cfg.reps, workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = np.concatenate(list(pool.map(_run_sweep_chunk, jobs)))
    truth = true_cte(cfg.model, t)
    rows = []
    for i, k in enumerate(ks):
        m_old, _, _, f_old = summarize(values[:, i, 0], truth)
        m_new, _, _, f_new = summarize(values[:, i, 1], truth)
        rows.append(KSweepRow(k, m_old, m_new, truth, valid[i], f_old, f_new))
    return KSweepCurve(tuple(rows), int(kmin), int(kmax), int(step), float(t))


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FORMAT % v
    return str(v)


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        v = float(FLOAT_FORMAT % v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def rows_to_csv(rows: Sequence[Mapping], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def rows_to_json(rows: Sequence[Mapping], columns: Sequence[str]) -> str:
    data = [{c: _json_value(row[c]) for c in columns} for row in rows]
    return json.dumps(data, indent=2) + "\n"


def report_to_csv(reports: ExperimentReport | Sequence[ExperimentReport]) -> str:
    if isinstance(reports, ExperimentReport):
        reports = [reports]
    return rows_to_csv([r for rep in reports for r in rep.rows()], REPORT_COLUMNS)


def sweep_to_csv(curve: KSweepCurve) -> str:
    return rows_to_csv(curve.row_dicts(), SWEEP_COLUMNS)
