"""
Falling rule lists: ordered IF-THEN lists whose risk decreases down the list.
"""

from .annealing import AnnealingConfig, anneal_chains, optimize_continuous, simulated_annealing
from .evaluation import auroc, cross_validate, edit_distance, predict_proba, recovery_study, simulate_data
from .mining import build_rule_matrix, mine_rules
from .model import (BinaryDataset, FallingRuleList, Hyperparameters, RuleAntecedent, RuleUniverse,
                    log_likelihood, log_posterior, log_prior)
from .sampler import run_chain

__version__ = "0.1.0"

__all__ = [
    "AnnealingConfig", "anneal_chains", "optimize_continuous", "simulated_annealing",
    "auroc", "cross_validate", "edit_distance", "predict_proba", "recovery_study", "simulate_data",
    "build_rule_matrix", "mine_rules",
    "BinaryDataset", "FallingRuleList", "Hyperparameters", "RuleAntecedent", "RuleUniverse",
    "log_likelihood", "log_posterior", "log_prior", "run_chain",
]
