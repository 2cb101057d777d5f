"""Command-line front end.

Subcommands
-----------
estimate
    CTE estimates from a file of losses (one value per line).
simulate
    Monte Carlo bias/RMSE table, one row per (n, t, estimator).
ksweep
    Monte Carlo means of both estimators over a grid of k.

Data goes to ``--output`` (default standard output) as CSV or JSON; warnings
and diagnostics go to standard error. Exit codes: 0 success, 1 usage or I/O
error, 2 estimation failure.
"""
from __future__ import annotations

import argparse
import math
import sys
import warnings
from typing import Sequence

import numpy as np

from .cte import choose_k, cte_new, cte_old, sigma2
from .distributions import HeavyTailModel
from .empirical import make_sorted
from .errors import TailCteError
from .montecarlo import (
    DEFAULT_SEED,
    REPORT_COLUMNS,
    SWEEP_COLUMNS,
    ExperimentConfig,
    k_sweep,
    rows_to_csv,
    rows_to_json,
    run_experiment,
)
from .tail_inference import cml_fit, hill

EXIT_OK, EXIT_USAGE, EXIT_ESTIMATION = 0, 1, 2

ESTIMATE_COLUMNS = ("n", "k", "t", "alpha_hill", "alpha_hat", "beta_hat", "c_hat", "d_hat",
                    "cte_old", "cte_new", "sigma2", "status")


class UsageError(Exception):
    """Bad flags, unreadable input or invalid parameters (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _diag(msg: str) -> None:
    print(msg, file=sys.stderr)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# --------------------------------------------------------------------------
# input
# --------------------------------------------------------------------------


def read_losses(path: str) -> np.ndarray:
    """One loss per line; blank lines skipped; a non-numeric first line is a header."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}")
    except UnicodeDecodeError:
        raise UsageError(f"{path} is not a text file")
    values = []
    seen_content = False
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        token = text.split(",")[0].split()[0]
        try:
            x = float(token)
        except ValueError:
            if not seen_content:
                seen_content = True
                continue
            raise UsageError(f"{path}, line {lineno}: cannot parse {text!r} as a number")
        seen_content = True
        if not math.isfinite(x):
            raise UsageError(f"{path}, line {lineno}: non-finite value {text!r}")
        values.append(x)
    return np.asarray(values, dtype=float)


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _emit(rows, columns, args) -> None:
    text = rows_to_json(rows, columns) if args.format == "json" else rows_to_csv(rows, columns)
    if args.output in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {args.output}: {exc.strerror or exc}")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_estimate(args) -> int:
    data = read_losses(args.input)
    n = data.size
    if n < 3:
        raise UsageError(f"need at least 3 observations, found {n}")
    k = args.k if args.k is not None else choose_k(n, args.epsilon)
    if not 2 <= k <= n - 1:
        raise UsageError(f"k={k} outside [2, n-1] = [2, {n - 1}]")
    positives = int(np.count_nonzero(data > 0))
    if positives < k + 2:
        raise UsageError(f"need at least k+2 = {k + 2} positive observations, found {positives}")
    s = make_sorted(data)

    alpha_hill = hill(s, k)
    fit = None
    try:
        fit = cml_fit(s, k)
    except TailCteError as exc:
        _diag(f"warning: CML fit failed: {exc}")

    rows, failed = [], False
    for t in args.t:
        row = dict.fromkeys(ESTIMATE_COLUMNS, math.nan)
        row.update(n=n, k=k, t=t, alpha_hill=alpha_hill, status="ok")
        try:
            row["cte_old"] = cte_old(s, t, k, strict=args.strict_level).value
        except TailCteError as exc:
            _diag(f"warning: old estimator failed at t={t:g}: {exc}")
        if fit is not None:
            row.update(alpha_hat=fit.alpha_hat, beta_hat=fit.beta_hat,
                       c_hat=fit.c_hat, d_hat=fit.d_hat)
            if 1.0 < fit.alpha_hat < 2.0:
                row["sigma2"] = sigma2(fit.alpha_hat, fit.beta_hat)
            try:
                row["cte_new"] = cte_new(s, t, k, fit, strict=args.strict_level).value
            except TailCteError as exc:
                _diag(f"warning: new estimator failed at t={t:g}: {exc}")
        if math.isnan(row["cte_new"]):
            if args.fallback and not math.isnan(row["cte_old"]):
                row["cte_new"] = row["cte_old"]
                row["status"] = "fallback"
            else:
                row["status"] = "failed"
                failed = True
        rows.append(row)
    _emit(rows, ESTIMATE_COLUMNS, args)
    return EXIT_ESTIMATION if failed else EXIT_OK


def _model_from_args(args) -> HeavyTailModel:
    if args.model == "burr":
        lam = args.lam if args.lam is not None else args.alpha
        if lam is None:
            raise UsageError("burr needs --lambda (or --alpha with tau=1)")
        return HeavyTailModel.burr(lam, args.tau)
    if args.alpha is None:
        raise UsageError(f"{args.model} needs --alpha")
    return HeavyTailModel(args.model, alpha=args.alpha)


def _k_kwargs(args) -> dict:
    return {"k": args.k} if args.k is not None else {"epsilon": args.epsilon}


def cmd_simulate(args) -> int:
    model = _model_from_args(args)
    rows = []
    for n in args.n:
        cfg = ExperimentConfig(
            model=model, n=n, reps=args.reps, t_levels=tuple(args.t), seed=args.seed,
            fallback=args.fallback, strict_level=args.strict_level, **_k_kwargs(args))
        report = run_experiment(cfg, workers=args.workers)
        for cell in report.cells:
            if cell.failure_count or cell.fallback_count:
                _diag(f"note: n={n} t={cell.t:g} {cell.estimator}: "
                      f"{cell.failure_count} failed, {cell.fallback_count} fell back")
        rows.extend(report.rows())
    _emit(rows, REPORT_COLUMNS, args)
    return EXIT_OK


def cmd_ksweep(args) -> int:
    model = _model_from_args(args)
    cfg = ExperimentConfig(model=model, n=args.n, reps=args.reps, t_levels=(args.t,),
                           k=args.kmin, seed=args.seed, fallback=args.fallback,
                           strict_level=False)
    cfg = cfg if not args.strict_level else _strict(cfg)
    curve = k_sweep(cfg, args.kmin, args.kmax, args.step, t=args.t, workers=args.workers)
    for r in curve.rows:
        if not r.valid:
            _diag(f"note: k={r.k} invalid (t >= 1 - k/n)")
        elif r.failures_new or r.failures_old:
            _diag(f"note: k={r.k}: {r.failures_old} old / {r.failures_new} new failures")
    _emit(curve.row_dicts(), SWEEP_COLUMNS, args)
    return EXIT_OK


def _strict(cfg: ExperimentConfig) -> ExperimentConfig:
    # the sweep validates each grid point itself; the base config only carries the flag
    object.__setattr__(cfg, "strict_level", True)
    return cfg


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", "-o", help="write data here instead of standard output")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--fallback", action="store_true",
                   help="use the old estimator where the new one fails")
    p.add_argument("--strict-level", action="store_true",
                   help="refuse t >= 1 - k/n instead of using the oriented body integral")


def _add_k(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--k", type=int, help="fixed number of upper order statistics")
    g.add_argument("--epsilon", type=float, default=0.25,
                   help="k = floor(n^(1 - epsilon)) (default 0.25)")


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=("frechet", "burr", "pareto"), required=True)
    p.add_argument("--alpha", type=float, help="tail index (Frechet, Pareto)")
    p.add_argument("--lambda", dest="lam", type=float, help="Burr lambda")
    p.add_argument("--tau", type=float, default=1.0, help="Burr tau (default 1)")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help=f"master seed (default {DEFAULT_SEED})")
    p.add_argument("--workers", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tailcte", description="CTE estimation for heavy-tailed losses.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate the CTE of a loss file")
    p.add_argument("input", help="text file, one loss per line")
    p.add_argument("--t", type=_float_list, default=[0.9], help="level(s), comma separated")
    _add_k(p)
    _add_common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="Monte Carlo bias/RMSE table")
    _add_model(p)
    p.add_argument("--n", type=_int_list, default=[250, 500, 1000, 2000])
    p.add_argument("--t", type=_float_list, default=[0.9, 0.95])
    _add_k(p)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ksweep", help="Monte Carlo means over a grid of k")
    _add_model(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--t", type=float, default=0.9)
    p.add_argument("--kmin", type=int, default=50)
    p.add_argument("--kmax", type=int, default=850)
    p.add_argument("--step", type=int, default=50)
    _add_common(p)
    p.set_defaults(func=cmd_ksweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    warnings.formatwarning = lambda msg, cat, *a, **kw: f"warning: {msg}\n"
    try:
        return args.func(args)
    except UsageError as exc:
        _diag(f"error: {exc}")
        return EXIT_USAGE
    except TailCteError as exc:
        # invalid parameters surface as domain errors before any estimation runs
        _diag(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
