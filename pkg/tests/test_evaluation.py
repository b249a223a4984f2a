import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frl.annealing import AnnealingConfig, simulated_annealing
from frl.evaluation import (CvReport, SimulationSpec, auroc, cross_validate, edit_distance, params_from_probs,
                            predict_proba, predict_proba_batch, recovery_seeds, recovery_study,
                            segment_summary, simulate_data, stratified_folds)
from frl.model import (BinaryDataset, FallingRuleList, Hyperparameters, RuleAntecedent, RuleUniverse,
                       assign_segments, log_likelihood, risk_vector)
from oracles import auroc_pairs, edit_distance_recursive

H = Hyperparameters()


# --- AUROC -------------------------------------------------------------------------

def test_auroc_examples():
    assert auroc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
    assert auroc([0.1, 0.2, 0.9, 0.8], [1, 1, 0, 0]) == 0.0
    assert auroc([0.5] * 4, [1, 0, 1, 0]) == 0.5
    with pytest.raises(ValueError):
        auroc([0.1, 0.2], [1, 1])


@given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=2, max_size=40))
def test_auroc_matches_pair_counting(pairs):
    scores = [s for s, _ in pairs]
    labels = [y for _, y in pairs]
    if all(labels) or not any(labels):
        return
    assert auroc(scores, labels) == pytest.approx(auroc_pairs(scores, labels), abs=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_auroc_negation_complements(seed):
    rng = np.random.default_rng(seed)
    s = rng.random(30)
    y = np.arange(30) % 3 == 0
    assert auroc(s, y) + auroc(-s, y) == pytest.approx(1.0, abs=1e-12)


# --- edit distance --------------------------------------------------------------------

def test_edit_distance_examples():
    assert edit_distance([1, 2, 3], [1, 2, 3]) == 0
    assert edit_distance([1, 2, 3], [1, 2, 3, 4]) == 1
    assert edit_distance([], [5, 6]) == 2


short = st.lists(st.integers(0, 4), max_size=6)


@given(short, short)
def test_edit_distance_matches_recursion(a, b):
    assert edit_distance(a, b) == edit_distance_recursive(a, b)


@given(short, short, short)
def test_edit_distance_is_a_metric(a, b, c):
    assert edit_distance(a, b) == edit_distance(b, a)
    assert (edit_distance(a, b) == 0) == (a == b)
    assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)


# --- prediction --------------------------------------------------------------------

def test_predictions_lie_in_open_interval():
    rng = np.random.default_rng(0)
    U = RuleUniverse(tuple(RuleAntecedent((j,)) for j in range(4)))
    X = rng.random((50, 4)) < 0.5
    for _ in range(50):
        L = rng.integers(0, 5)
        frl = FallingRuleList(rng.permutation(4)[:L], 1 + rng.exponential(2, L), rng.exponential(1) + 1e-3)
        p = predict_proba_batch(frl, U, X)
        assert np.all((p > 0) & (p < 1))
        assert p[7] == predict_proba(frl, U, X[7])


def test_segment_summary_partitions():
    rng = np.random.default_rng(1)
    X = rng.random((40, 3)) < 0.5
    y = rng.random(40) < 0.5
    U = RuleUniverse(tuple(RuleAntecedent((j,)) for j in range(3)))
    frl = FallingRuleList((2, 0), (2.0, 1.5), 0.3)
    support, rate = segment_summary(frl, U, BinaryDataset(X, y))
    assert support.sum() == 40
    z = assign_segments(np.ascontiguousarray(X.T), (2, 0))
    assert rate[0] == pytest.approx(y[z == 0].mean())


# --- folds and CV -----------------------------------------------------------------------

def test_stratified_folds_balance_and_reproduce():
    y = np.r_[np.ones(23, bool), np.zeros(57, bool)]
    f = stratified_folds(y, 5, seed=3)
    assert np.array_equal(f, stratified_folds(y, 5, seed=3))
    for k in range(5):
        assert abs((f == k).sum() - 16) <= 1
        assert abs(y[f == k].sum() - 23 / 5) < 1


def test_cross_validate_planted_signal():
    rng = np.random.default_rng(2)
    X = rng.random((400, 6)) < 0.4
    y = rng.random(400) < np.where(X[:, 1], 0.85, 0.15)
    rep = cross_validate(BinaryDataset(X, y), H, k=4, sa_config=AnnealingConfig(steps=300), seed=0)
    assert len(rep.fold_aurocs) == 4 and rep.mean > 0.75
    assert rep.to_dict()["mean_auroc"] == rep.mean
    assert CvReport([0.5, 0.7], []).std == pytest.approx(np.std([0.5, 0.7], ddof=1))


def test_cv_auroc_near_bayes_optimal():
    inst = simulate_data(SimulationSpec(n=4000, seed=5))
    _, _, p = risk_vector(inst.true_model)
    z = assign_segments(np.ascontiguousarray(inst.data.features.T), inst.true_model.rule_indices)
    bayes = auroc(p[z], inst.data.labels)
    rep = cross_validate(inst.data, Hyperparameters(min_support=0.01, max_cardinality=1), k=5,
                         sa_config=AnnealingConfig(steps=3000, schedule="geometric", t0=10, t_final=0.01), seed=1)
    assert abs(rep.mean - bayes) < 0.02


# --- simulation ------------------------------------------------------------------

def test_spec_validation():
    with pytest.raises(ValueError):
        SimulationSpec(segment_probs=(0.5, 0.6, 0.4, 0.3, 0.2, 0.1))
    with pytest.raises(ValueError):
        SimulationSpec(list_size=3)
    with pytest.raises(ValueError):
        SimulationSpec(feature_density=1.5)


def test_derived_default_odds():
    gamma, k = params_from_probs((.84, .70, .54, .40, .25, .14))
    assert k == pytest.approx(0.162791, abs=1e-6)
    assert len(gamma) == 5 and min(gamma) >= 1


def test_full_density_puts_everyone_in_first_segment():
    inst = simulate_data(SimulationSpec(n=5000, feature_density=1.0, seed=1))
    p0 = 0.84
    assert abs(inst.data.labels.mean() - p0) < 4 * math.sqrt(p0 * (1 - p0) / 5000)


def test_segment_rates_match_probs():
    spec = SimulationSpec(n=100_000, seed=2)
    inst = simulate_data(spec)
    z = assign_segments(np.ascontiguousarray(inst.data.features.T), inst.true_model.rule_indices)
    for l, p in enumerate(spec.segment_probs):
        sel = z == l
        assert abs(inst.data.labels[sel].mean() - p) < 4 * math.sqrt(p * (1 - p) / sel.sum())


def test_true_loglik_near_entropy():
    spec = SimulationSpec(n=20_000, seed=3)
    inst = simulate_data(spec)
    z = assign_segments(np.ascontiguousarray(inst.data.features.T), inst.true_model.rule_indices)
    _, r, _ = risk_vector(inst.true_model)
    ll = log_likelihood(inst.data, z, r)
    p = np.asarray(spec.segment_probs)[z]
    mean = np.sum(p * np.log(p) + (1 - p) * np.log(1 - p))
    var = np.sum(p * (1 - p) * (np.log(p) - np.log(1 - p)) ** 2)
    assert abs(ll - mean) < 3 * math.sqrt(var)


def test_simulation_is_seeded():
    a = simulate_data(SimulationSpec(n=100, seed=9))
    b = simulate_data(SimulationSpec(n=100, seed=9))
    assert np.array_equal(a.data.features, b.data.features) and a.true_model == b.true_model


def test_recovery_single_replicate_is_deterministic():
    cfg = AnnealingConfig(steps=500, seed=2)
    a = recovery_study(SimulationSpec(seed=4), [300], 1, cfg)
    b = recovery_study(SimulationSpec(seed=4), [300], 1, cfg)
    assert a.distances == b.distances and a.stderrs == [0.0]
    # the first replicate uses the given seeds directly
    inst = simulate_data(SimulationSpec(n=300, seed=4))
    res = simulated_annealing(inst.data, inst.universe, H, cfg)
    assert a.distances[300][0] == edit_distance(res.rule_indices, inst.true_model.rule_indices)
    assert recovery_seeds(4, 2, 0, 0) == (4, 2)
    assert recovery_seeds(4, 2, 0, 1) != (4, 2)
    with pytest.raises(ValueError):
        recovery_study(SimulationSpec(), [100], 0, cfg)
