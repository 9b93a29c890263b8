"""Averaged ensembles, snapshot posteriors and gradient boosting."""

from .bagging import (EnsembleSet, SnapshotCollector, bag_predict, bagging_gap, bootstrap_indices,
                      bootstrap_resample, fit_bagged, gaussian_log_prior, log_posterior_unnorm,
                      snapshot_collect)
from .boosting import (LOSSES, AbsoluteLoss, BoostState, RegressionTree, SquaredLoss,
                       boost_line_search, boost_stage_fit, boost_targets, golden_section,
                       gradient_boost, tree_fitter)

__all__ = [
    "EnsembleSet", "SnapshotCollector", "bag_predict", "bagging_gap", "bootstrap_indices",
    "bootstrap_resample", "fit_bagged", "gaussian_log_prior", "log_posterior_unnorm",
    "snapshot_collect", "LOSSES", "AbsoluteLoss", "BoostState", "RegressionTree", "SquaredLoss",
    "boost_line_search", "boost_stage_fit", "boost_targets", "golden_section", "gradient_boost",
    "tree_fitter",
]
