"""Acceptance criteria, one test per criterion.

Each test records a single ``[criterion N] PASS/FAIL: ...`` line that is
printed in the terminal summary, then asserts. The Monte Carlo criteria run
at full size and take most of the suite's wall time.
"""
import math
import time
import warnings

import numpy as np
import pytest
from scipy import special

from tailcte import (
    HeavyTailModel,
    TailCteError,
    choose_k,
    cml_fit,
    cte_new,
    cte_old,
    hill,
    make_sorted,
    partial_integral,
    replication_seed,
    sample,
    sigma2,
    standardizer,
    true_cte,
)
from tailcte.montecarlo import ExperimentConfig, k_sweep, report_to_csv, run_experiment
from tailcte.tail_inference import synthetic_fit

from conftest import ACCEPTANCE_LINES

SEED = 20240917


def record(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}"
    print(ACCEPTANCE_LINES[number])


@pytest.fixture(scope="module")
def table_reports():
    """Fréchet tables rerun at 1000 replications: {(alpha, n): report}."""
    out = {}
    for alpha in (1.5, 1.75):
        for n in (250, 500, 1000, 2000):
            cfg = ExperimentConfig(HeavyTailModel.frechet(alpha), n=n, reps=1000,
                                   t_levels=(0.9, 0.95), epsilon=0.25, seed=SEED)
            out[alpha, n] = run_experiment(cfg)
    return out


def test_criterion_1_true_cte_oracle():
    start = time.perf_counter()
    expected = {(1.5, 0.9): 13.793, (1.5, 0.95): 21.984, (1.75, 0.9): 8.6207, (1.75, 0.95): 12.866}
    got = {key: true_cte(HeavyTailModel.frechet(key[0]), key[1]) for key in expected}
    misses = {key: got[key] - v for key, v in expected.items() if abs(got[key] - v) > 0.02}
    elapsed = time.perf_counter() - start

    # diagnostic: the tabulated truths agree with the integral stopped at 1 - 1e-10,
    # written through the regularized lower incomplete gamma function
    def truncated(alpha, t, eps=1e-10):
        a = 1 - 1 / alpha
        mass = special.gammainc(a, -math.log(t)) - special.gammainc(a, -math.log1p(-eps))
        return math.gamma(a) * mass / (1 - t)

    trunc_gap = max(abs(truncated(*key) - v) for key, v in expected.items())
    ok = not misses and elapsed < 1.0
    detail = ", ".join(f"({a}, {t}) {got[a, t]:.4f}" for a, t in expected)
    detail += f"; {elapsed:.2f}s"
    if misses:
        detail += "; off by more than 0.02: " + ", ".join(
            f"({a}, {t}) {d:+.4f}" for (a, t), d in misses.items())
        detail += f"; integral truncated at 1-1e-10 matches all four within {trunc_gap:.4f}"
    record(1, ok, detail)
    assert ok


def test_criterion_2_burr_truth():
    value = true_cte(HeavyTailModel.burr(1.5, 1.0), 0.9)
    hand = 10 * (3 * 0.1 ** (1 / 3) - 0.1)
    ok = abs(value - hand) <= 1e-6
    record(2, ok, f"quadrature {value:.9f}, hand reduction {hand:.9f}, gap {abs(value - hand):.1e} "
                  f"(tabulated 13.676 not matched by design)")
    assert ok


def test_criterion_3_unit_values():
    checks = {
        "sigma2(1.5, 3) = 628": abs(sigma2(1.5, 3.0) - 628.0) <= 1e-9,
        "hill = 2/3": abs(hill(make_sorted(np.exp([0.0, 1.0, 2.0, 3.0])), 2) - 2 / 3) <= 1e-12,
        "choose_k(1000) = 177": choose_k(1000, 0.25) == 177,
        "cte_old hand = 8.0576": abs(cte_old(make_sorted(np.arange(1.0, 11.0)), 0.5, 2).value - 8.0576) <= 5e-4,
    }
    ok = all(checks.values())
    record(3, ok, "; ".join(f"{k} {'ok' if v else 'WRONG'}" for k, v in checks.items()))
    assert ok


def test_criterion_4_solver_contract(frechet15):
    start = time.perf_counter()
    accepted, alphas = 0, []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for r in range(500):
            s = sample(frechet15, 2000, replication_seed(SEED, r))
            try:
                fit = cml_fit(s, 177)
            except TailCteError:
                continue
            if fit.residual_norm <= 1e-8 and fit.beta_hat > fit.alpha_hat:
                accepted += 1
                alphas.append(fit.alpha_hat)
    elapsed = time.perf_counter() - start
    median = float(np.median(alphas))
    ok = accepted >= 450 and 1.2 <= median <= 1.8 and elapsed < 120
    record(4, ok, f"{accepted}/500 converged, median alpha_hat {median:.3f}, {elapsed:.1f}s")
    assert ok


def test_criterion_5_table_cells(table_reports):
    targets = {1000: 8.6586, 2000: 8.6504}
    parts, ok = [], True
    for n, target in targets.items():
        cell = table_reports[1.75, n].cell(0.9, "new")
        rel = cell.mc_mean / target - 1
        ok &= abs(rel) <= 0.02
        parts.append(f"n={n} k={cell.k} mean {cell.mc_mean:.4f} vs {target} ({rel:+.1%}, "
                     f"{cell.failure_count} failed fits)")
    record(5, ok, "; ".join(parts))
    assert ok


def test_criterion_6_ordering(table_reports):
    wins_bias = wins_rmse = total = 0
    losses = []
    for (alpha, n), rep in sorted(table_reports.items()):
        for t in (0.9, 0.95):
            new, old = rep.cell(t, "new"), rep.cell(t, "old")
            total += 1
            b, r = new.abs_bias < old.abs_bias, new.rmse < old.rmse
            wins_bias += b
            wins_rmse += r
            if not (b and r):
                losses.append(f"({alpha},{n},{t}) |bias| {new.abs_bias:.3f}/{old.abs_bias:.3f} "
                              f"rmse {new.rmse:.3f}/{old.rmse:.3f}")
    ok = wins_bias == wins_rmse == total
    detail = f"new beats old on |bias| in {wins_bias}/{total}, on RMSE in {wins_rmse}/{total}"
    if losses:
        detail += " (new/old) e.g. " + "; ".join(losses[:3])
    record(6, ok, detail)
    assert ok


@pytest.mark.slow
def test_criterion_7_k_sweeps():
    start = time.perf_counter()
    panels = {
        "frechet 1.5": HeavyTailModel.frechet(1.5),
        "frechet 1.75": HeavyTailModel.frechet(1.75),
        "burr 1.5": HeavyTailModel.burr(1.5, 1.0),
        "burr 1.75": HeavyTailModel.burr(1.75, 1.0),
    }
    fractions, dead = {}, {}
    for name, model in panels.items():
        cfg = ExperimentConfig(model, n=1000, reps=1000, t_levels=(0.9,), seed=SEED)
        curve = k_sweep(cfg, 50, 850, 50)
        fractions[name] = curve.closer_fraction()
        dead[name] = sum(math.isnan(r.mean_old) and math.isnan(r.mean_new) for r in curve.rows)
    elapsed = time.perf_counter() - start
    ok = all(f >= 0.70 for f in fractions.values()) and elapsed < 1800
    detail = "; ".join(f"{name} {f:.0%}" + (f" ({dead[name]} k with no finite mean)" if dead[name] else "")
                       for name, f in fractions.items())
    record(7, ok, f"{detail}; {elapsed / 60:.1f} min")
    assert ok


def test_criterion_8_invariants(frechet_sample):
    s = frechet_sample
    checks = {}
    checks["hill scale invariance"] = all(
        math.isclose(hill(s.scaled(c), 177), hill(s, 177), rel_tol=1e-9) for c in (1e-3, 2.5, 1e4))
    checks["cte_old homogeneity"] = all(
        math.isclose(cte_old(s.scaled(c), 0.9, 177).value, c * cte_old(s, 0.9, 177).value, rel_tol=1e-9)
        for c in (1e-3, 2.5, 1e4))
    weissman = synthetic_fit(s, 177, hill(s, 177), 3.0, (177 / s.n) * s.threshold(177) ** hill(s, 177), 0.0)
    checks["new reduces to old"] = all(
        math.isclose(cte_new(s, t, 177, weissman).value, cte_old(s, t, 177).value, rel_tol=1e-9)
        for t in (0.5, 0.9, 0.95))
    rng = np.random.default_rng(SEED)
    add = []
    for _ in range(200):
        a, b, c = np.sort(rng.uniform(0, 1, 3))
        add.append(math.isclose(partial_integral(s, a, c), partial_integral(s, a, b) + partial_integral(s, b, c),
                                rel_tol=1e-9, abs_tol=1e-12))
    checks["partial_integral additivity"] = all(add)
    checks["mean identity"] = math.isclose(partial_integral(s, 0, 1), math.fsum(s.values) / s.n, rel_tol=1e-9)
    cfg = ExperimentConfig(HeavyTailModel.frechet(1.5), n=500, reps=40, seed=SEED)
    csvs = {w: report_to_csv(run_experiment(cfg, workers=w)) for w in (1, 2, 8)}
    checks["workers 1/2/8 byte-identical"] = csvs[1] == csvs[2] == csvs[8]
    ok = all(checks.values())
    record(8, ok, "; ".join(f"{k} {'ok' if v else 'BROKEN'}" for k, v in checks.items()))
    assert ok


def test_criterion_9_standardized_error(frechet15):
    n, t = 2000, 0.9
    k = choose_k(n, 0.25)
    h = frechet15.hall
    scale = standardizer(n, k, t, h.c, h.alpha) * math.sqrt(sigma2(h.alpha, h.beta))
    truth = true_cte(frechet15, t)
    z = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for r in range(1000):
            s = sample(frechet15, n, replication_seed(SEED, r))
            try:
                z.append((cte_new(s, t, k, cml_fit(s, k)).value - truth) / scale)
            except TailCteError:
                continue
    z = np.asarray(z)
    mean, sd = float(z.mean()), float(z.std(ddof=1))
    ok = -1 <= mean <= 1 and 0.5 <= sd <= 2.0
    record(9, ok, f"mean {mean:.3f}, sd {sd:.3f} over {z.size} fits ({1000 - z.size} failed), k={k}")
    assert ok
