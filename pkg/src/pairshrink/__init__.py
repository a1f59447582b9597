"""Empirical Bayes shrinkage for Bradley-Terry-Luce comparison models."""

from .bootstrap import (BootstrapRun, BootstrapScheme, ledoit_wolf_shrink,
                        make_replicate, parse_scheme, run_bootstrap,
                        sample_covariance, select_nu)
from .data import (ComparisonGraph, Dataset, ItemUniverse, ParseError,
                   PartitionError, RaschStructure, build_graph, detect_rasch,
                   is_strongly_connected, parse_comparisons,
                   restrict_to_largest_scc, split_folds)
from .estimation import (FitConfig, FitError, QualityVector, choice_prob,
                         ctmc_rate_matrix, fit_mle, log_likelihood,
                         model_from_json, model_to_json)
from .evaluation import (EvalReport, Schedule, alpha_metric, beta_metric,
                         learning_curve, matchup_brier, pairwise_distance,
                         predicted_win_rate, run_cv, sample_simplex_uniform,
                         simulate_outcomes, synth_schedule, win_rate_mse)
from .fisher import (CovarianceEstimate, InformationMatrix,
                     covariance_from_information, expected_information,
                     implicit_shrink_matrix, inverse_covariance,
                     observed_information)
from .shrinkage import (PriorSpec, dirichlet_prior_cov, james_stein,
                        james_stein_implicit, make_prior, rasch_target,
                        uniform_target)

__version__ = "0.1.0"

__all__ = [
    "BootstrapRun", "BootstrapScheme", "ComparisonGraph", "CovarianceEstimate",
    "Dataset", "EvalReport", "FitConfig", "FitError", "InformationMatrix",
    "ItemUniverse", "ParseError", "PartitionError", "PriorSpec",
    "QualityVector", "RaschStructure", "Schedule",
    "alpha_metric", "beta_metric", "build_graph", "choice_prob",
    "covariance_from_information", "ctmc_rate_matrix", "detect_rasch",
    "dirichlet_prior_cov", "expected_information", "fit_mle",
    "implicit_shrink_matrix", "inverse_covariance", "is_strongly_connected",
    "james_stein", "james_stein_implicit", "learning_curve",
    "ledoit_wolf_shrink", "log_likelihood", "make_replicate", "make_prior",
    "matchup_brier", "model_from_json", "model_to_json",
    "observed_information", "pairwise_distance", "parse_comparisons",
    "parse_scheme", "predicted_win_rate", "rasch_target",
    "restrict_to_largest_scc", "run_bootstrap", "run_cv",
    "sample_covariance", "sample_simplex_uniform", "select_nu",
    "simulate_outcomes", "split_folds", "synth_schedule", "uniform_target",
    "win_rate_mse",
]
