"""Fair ordinal regression with threshold models and pairwise fairness criteria."""

from .core import (
    CostMatrix,
    DataError,
    Dataset,
    FairnessNotion,
    GuardError,
    LinearScorer,
    ThresholdModel,
    Thresholds,
    predictions_from_scores,
)
from .dataio import load_csv, split_train_test
from .metrics import (
    FairnessReport,
    GroupStats,
    expected_cost,
    group_stats,
    pairwise_dp_viol,
    pairwise_eo_viol,
    pairwise_eqodds_viol,
    scorer_dp_viol,
    scorer_eo_viol,
    standard_viol,
)
from .pipeline import (
    FrontierPoint,
    MixturePoint,
    PomReport,
    TradeoffConfig,
    constant_median_baseline,
    evaluate_model,
    fair_thresholds_for_scorer,
    fit_pom,
    frontier_rows,
    lambda_from_prime,
    mixture_eval,
    sweep,
    train_two_step,
)
from .reduction import (
    FairClassifierConfig,
    PairwiseDataset,
    TrainingReport,
    build_pairwise_dataset,
    classifier_fairness_gap,
    train_fair_scorer,
)
from .simulate import (
    ConvergenceResult,
    FinitePopulation,
    SimulationResult,
    convergence_experiment,
    enumerate_fair_threshold_fractions,
)
from .thresholds import (
    ThresholdObjectiveConfig,
    brute_force_thresholds,
    cost_only_dp,
    exact_dp,
    local_search,
    objective,
)

__all__ = [
    "ConvergenceResult",
    "CostMatrix",
    "DataError",
    "Dataset",
    "FairClassifierConfig",
    "FairnessNotion",
    "FairnessReport",
    "FinitePopulation",
    "FrontierPoint",
    "GroupStats",
    "GuardError",
    "LinearScorer",
    "MixturePoint",
    "PairwiseDataset",
    "PomReport",
    "SimulationResult",
    "ThresholdModel",
    "ThresholdObjectiveConfig",
    "Thresholds",
    "TradeoffConfig",
    "TrainingReport",
    "brute_force_thresholds",
    "build_pairwise_dataset",
    "classifier_fairness_gap",
    "constant_median_baseline",
    "convergence_experiment",
    "cost_only_dp",
    "enumerate_fair_threshold_fractions",
    "evaluate_model",
    "exact_dp",
    "expected_cost",
    "fair_thresholds_for_scorer",
    "fit_pom",
    "frontier_rows",
    "group_stats",
    "lambda_from_prime",
    "load_csv",
    "local_search",
    "mixture_eval",
    "objective",
    "pairwise_dp_viol",
    "pairwise_eo_viol",
    "pairwise_eqodds_viol",
    "predictions_from_scores",
    "scorer_dp_viol",
    "scorer_eo_viol",
    "split_train_test",
    "standard_viol",
    "sweep",
    "train_fair_scorer",
    "train_two_step",
]

__version__ = "0.1.0"
