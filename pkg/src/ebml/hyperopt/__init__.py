"""Hyperparameter search: random search and surrogate-guided sequential search."""

from .search import (GaussianSurrogate, MdnSurrogate, SearchResult, best_trial, candidate_pool,
                     expected_improvement, gaussian_ei, history_rows, propose_from_pool,
                     random_search, run_trial, selection_probs, smbo_loop, smbo_propose)
from .space import Categorical, Continuous, Dimension, HyperSpace, Integer, TrialRecord
from .tune import Split, check_disjoint, tune_then_report, zero_one_risk

__all__ = [
    "GaussianSurrogate", "MdnSurrogate", "SearchResult", "best_trial", "candidate_pool",
    "expected_improvement", "gaussian_ei", "history_rows", "propose_from_pool", "random_search",
    "run_trial", "selection_probs", "smbo_loop", "smbo_propose", "Categorical", "Continuous",
    "Dimension", "HyperSpace", "Integer", "TrialRecord", "Split", "check_disjoint",
    "tune_then_report", "zero_one_risk",
]
