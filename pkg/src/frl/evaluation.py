"""
Prediction, AUROC, cross-validation and the synthetic recovery study.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .annealing import AnnealingConfig, anneal_chains, simulated_annealing
from .mining import build_rule_matrix, mine_rules
from .model import (BinaryDataset, FallingRuleList, Hyperparameters, RuleUniverse,
                    assign_rule, assign_segments, risk_vector)

__all__ = [
    "predict_proba", "predict_proba_batch", "auroc", "stratified_folds", "CvReport", "cross_validate",
    "edit_distance", "SimulationSpec", "SimulatedInstance", "simulate_data", "recovery_seeds",
    "RecoveryReport", "recovery_study", "segment_summary",
]

DEFAULT_SEGMENT_PROBS = (0.84, 0.70, 0.54, 0.40, 0.25, 0.14)


def predict_proba(model: FallingRuleList, universe: RuleUniverse, x) -> float:
    """Probability of ``y = 1`` for one feature vector."""
    _, _, p = risk_vector(model)
    return float(p[assign_rule(x, [universe.rules[j] for j in model.rule_indices])])


def predict_proba_batch(model: FallingRuleList, universe: RuleUniverse, X) -> np.ndarray:
    X = np.asarray(X, dtype=bool)
    matrix = build_rule_matrix(X, universe)
    _, _, p = risk_vector(model)
    return p[assign_segments(matrix.columns, model.rule_indices)]


def segment_summary(model: FallingRuleList, universe: RuleUniverse, data: BinaryDataset):
    """Per-segment training supports and empirical positive rates."""
    z = assign_segments(build_rule_matrix(data, universe).columns, model.rule_indices)
    nseg = model.length + 1
    support = np.bincount(z, minlength=nseg)
    pos = np.bincount(z, weights=data.labels, minlength=nseg)
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = np.where(support > 0, pos / np.maximum(support, 1), np.nan)
    return support, rate


def auroc(scores, labels) -> float:
    """Area under the ROC curve in Mann-Whitney form (ties count one half)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same shape")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs at least one positive and one negative label")
    ranks = stats.rankdata(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def stratified_folds(labels, k: int, seed) -> np.ndarray:
    """Fold id per row; each class is shuffled and dealt round-robin."""
    labels = np.asarray(labels, dtype=bool)
    rng = np.random.default_rng(seed)
    fold = np.empty(labels.size, dtype=np.intp)
    offset = 0
    for cls in (True, False):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        fold[idx] = (np.arange(idx.size) + offset) % k
        offset += idx.size
    return fold


@dataclass
class CvReport:
    fold_aurocs: list
    fold_models: list
    mean: float = field(init=False)
    std: float = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.fold_aurocs, dtype=float)
        self.mean = float(a.mean())
        self.std = float(a.std(ddof=1)) if a.size > 1 else 0.0

    def to_dict(self):
        return {"k": len(self.fold_aurocs), "mean_auroc": self.mean, "std_auroc": self.std,
                "fold_aurocs": list(self.fold_aurocs), "fold_models": self.fold_models}


def cross_validate(data: BinaryDataset, H: Hyperparameters = Hyperparameters(), k: int = 5,
                   sa_config: AnnealingConfig = AnnealingConfig(), seed=0, chains: int = 1) -> CvReport:
    """Stratified k-fold AUROC of the MAP rule list.

    Rules are mined on each training split with ``H.min_support`` and
    ``H.max_cardinality``.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    fold = stratified_folds(data.labels, k, seed)
    aurocs, models = [], []
    for f in range(k):
        test = fold == f
        train_d, test_d = data.subset(~test), data.subset(test)
        if test_d.labels.all() or not test_d.labels.any():
            raise ValueError(f"fold {f} does not contain both classes")
        universe = mine_rules(train_d, H.min_support, H.max_cardinality)
        res = anneal_chains(train_d, universe, H, sa_config, chains)
        model = res.model
        aurocs.append(auroc(predict_proba_batch(model, universe, test_d.features), test_d.labels))
        models.append({
            "rules": [universe.rules[j].label() for j in model.rule_indices],
            "gamma": list(model.gamma),
            "k_default": model.k_default,
            "n_rules_mined": len(universe),
        })
    return CvReport(aurocs, models)


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Unit-cost Levenshtein distance between two sequences of rule identifiers."""
    a, b = list(a), list(b)
    prev = list(range(len(b) + 1))
    for i, ai in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, bj in enumerate(b, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ai != bj))
        prev = cur
    return prev[-1]


# --- synthetic study ----------------------------------------------------------

@dataclass(frozen=True)
class SimulationSpec:
    n: int = 1000
    num_rules: int = 100
    feature_density: float = 0.25
    list_size: int = 5
    segment_probs: tuple = DEFAULT_SEGMENT_PROBS
    seed: int = 0

    def __post_init__(self):
        p = tuple(float(x) for x in self.segment_probs)
        object.__setattr__(self, "segment_probs", p)
        if len(p) != self.list_size + 1:
            raise ValueError("need list_size + 1 segment probabilities")
        if any(not 0 < x < 1 for x in p):
            raise ValueError("segment probabilities must lie in (0, 1)")
        if any(b >= a for a, b in zip(p, p[1:])):
            raise ValueError("segment probabilities must be strictly decreasing")
        if not 0 <= self.feature_density <= 1:
            raise ValueError("feature_density must be a probability")
        if self.list_size > self.num_rules:
            raise ValueError("list_size cannot exceed num_rules")


def params_from_probs(probs) -> tuple[tuple[float, ...], float]:
    """``(gamma, K)`` that reproduce the given segment probabilities."""
    v = [p / (1.0 - p) for p in probs]
    return tuple(v[l] / v[l + 1] for l in range(len(v) - 1)), v[-1]


@dataclass(frozen=True, eq=False)
class SimulatedInstance:
    data: BinaryDataset
    universe: RuleUniverse
    true_model: FallingRuleList


def simulate_data(spec: SimulationSpec) -> SimulatedInstance:
    """Random rule matrix, a random planted list, and labels drawn from it.

    The columns of the returned dataset are the rules themselves, and the
    universe is one single-column rule per column.
    """
    rng = np.random.default_rng(spec.seed)
    X = rng.random((spec.n, spec.num_rules)) < spec.feature_density
    rules = tuple(int(j) for j in rng.choice(spec.num_rules, size=spec.list_size, replace=False))
    gamma, k = params_from_probs(spec.segment_probs)
    model = FallingRuleList(rules, gamma, k)
    z = assign_segments(np.ascontiguousarray(X.T), rules)
    y = rng.random(spec.n) < np.asarray(spec.segment_probs)[z]
    names = tuple(f"r{j}" for j in range(spec.num_rules))
    return SimulatedInstance(BinaryDataset(X, y, names), RuleUniverse.identity(spec.num_rules, names), model)


def recovery_seeds(sim_seed: int, sa_seed: int, grid_index: int, replicate: int) -> tuple[int, int]:
    """Seeds for one replicate; the first replicate of the first grid point uses the seeds as given."""
    if grid_index == 0 and replicate == 0:
        return sim_seed, sa_seed
    ss = np.random.SeedSequence([sim_seed, sa_seed, grid_index, replicate])
    a, b = ss.generate_state(2)
    return int(a), int(b)


@dataclass
class RecoveryReport:
    n_grid: list
    distances: dict
    means: list = field(init=False)
    stderrs: list = field(init=False)

    def __post_init__(self):
        self.means, self.stderrs = [], []
        for n in self.n_grid:
            d = np.asarray(self.distances[n], dtype=float)
            self.means.append(float(d.mean()))
            self.stderrs.append(float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0)


def recovery_study(template: SimulationSpec, n_grid: Sequence[int], replicates: int = 20,
                   sa_config: AnnealingConfig = AnnealingConfig(), H: Hyperparameters = Hyperparameters(),
                   progress=None) -> RecoveryReport:
    """Mean edit distance between the MAP list and the planted list for each N."""
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    distances = {}
    for g, n in enumerate(n_grid):
        distances[n] = []
        for i in range(replicates):
            sim_seed, sa_seed = recovery_seeds(template.seed, sa_config.seed, g, i)
            spec = SimulationSpec(n, template.num_rules, template.feature_density, template.list_size,
                                  template.segment_probs, sim_seed)
            inst = simulate_data(spec)
            cfg = AnnealingConfig(sa_config.steps, sa_config.schedule, sa_config.t0, sa_config.t_final, sa_seed)
            res = simulated_annealing(inst.data, inst.universe, H, cfg)
            d = edit_distance(res.rule_indices, inst.true_model.rule_indices)
            distances[n].append(d)
            if progress is not None:
                progress(n, i, d)
    return RecoveryReport(list(n_grid), distances)
