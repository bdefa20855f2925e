"""Integer point scores fit by direct maximization of the tied AUC."""

from __future__ import annotations

__version__ = "0.1.0"

from .baseline import BaselineConfig, LogisticFit, baseline_fit, feasible_delta_interval, fit_logistic, tune_rounding
from .complexity import ComplexityEstimate, esc_closed_form, esc_monte_carlo, exhaustive_max_auc, rbar_binary_exact, r_L_exact
from .core import (
    ActionSet,
    BudgetExceededError,
    DataFormatError,
    Dataset,
    DegenerateDataError,
    SchemaMismatchError,
    ScoreHistogram,
    auc,
    auc_pairwise,
    compute_scores,
    tabulate,
)
from .harness import ExperimentSpec, ResultTable, aggregate, run_experiment, run_timing, score_curve
from .search import FitResult, SearchConfig, evaluate, fit, fit_cv_stopped, fit_greedy, fit_lookahead
from .simgen import SimConfig, generate, train_test_split

__all__ = [
    "ActionSet", "BaselineConfig", "BudgetExceededError", "ComplexityEstimate", "DataFormatError", "Dataset",
    "DegenerateDataError", "ExperimentSpec", "FitResult", "LogisticFit", "ResultTable", "SchemaMismatchError",
    "ScoreHistogram", "SearchConfig", "SimConfig", "aggregate", "auc", "auc_pairwise", "baseline_fit",
    "compute_scores", "esc_closed_form", "esc_monte_carlo", "evaluate", "exhaustive_max_auc",
    "feasible_delta_interval", "fit", "fit_cv_stopped", "fit_greedy", "fit_logistic", "fit_lookahead",
    "generate", "r_L_exact", "rbar_binary_exact", "run_experiment", "run_timing", "score_curve", "tabulate",
    "train_test_split", "tune_rounding",
]
