"""Conditional tail expectation estimators for heavy-tailed losses.

The package compares two semi-parametric estimators of
``CTE(t) = E[X | X > Q(t)]`` for tail indices in (1, 2): a Hill/Weissman
extrapolation and a bias-reduced extrapolation built on a censored
maximum-likelihood fit of Hall's second-order tail model.
"""
from .cte import (
    CteEstimate,
    KRuleWarning,
    NearDegenerateFitWarning,
    choose_k,
    cte_new,
    cte_old,
    sigma2,
    standardizer,
)
from .distributions import (
    HallParameters,
    HeavyTailModel,
    TailIndexWarning,
    replication_seed,
    sample,
    true_cte,
)
from .empirical import SortedSample, empirical_quantile, make_sorted, partial_integral
from .errors import (
    DomainError,
    InfiniteMeanError,
    LevelThresholdError,
    NonConvergenceError,
    NumericalDomainError,
    SingularityError,
    TailCteError,
    UnusableFitError,
)
from .montecarlo import (
    ExperimentConfig,
    ExperimentReport,
    KSweepCurve,
    k_sweep,
    run_experiment,
)
from .tail_inference import (
    CmlSystemState,
    SolverOptions,
    TailFit,
    cml_fit,
    hall_coefficients,
    hill,
    li_quantile,
    system_state,
    weissman_quantile,
)

__all__ = [
    "CmlSystemState", "CteEstimate", "DomainError", "ExperimentConfig", "ExperimentReport",
    "HallParameters", "HeavyTailModel", "InfiniteMeanError", "KRuleWarning", "KSweepCurve",
    "LevelThresholdError", "NearDegenerateFitWarning", "NonConvergenceError",
    "NumericalDomainError", "SingularityError", "SolverOptions", "SortedSample", "TailCteError",
    "TailFit", "TailIndexWarning", "UnusableFitError", "choose_k", "cml_fit", "cte_new",
    "cte_old", "empirical_quantile", "hall_coefficients", "hill", "k_sweep", "li_quantile",
    "make_sorted", "partial_integral", "replication_seed", "run_experiment", "sample",
    "sigma2", "standardizer", "system_state", "true_cte", "weissman_quantile",
]
__version__ = "0.1.0"
