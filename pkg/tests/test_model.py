import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from frl.model import (BinaryDataset, FallingRuleList, Hyperparameters, RuleAntecedent, RuleUniverse,
                       assign_rule, assign_segments, log_likelihood, log_posterior, log_prior, risk_vector,
                       segment_counts)
from frl.mining import build_rule_matrix
from oracles import first_match, odds, structure_prior, truncated_gamma_pdf

H = Hyperparameters()


def rules_of(*ids):
    return [RuleAntecedent(f) for f in ids]


# --- types ----------------------------------------------------------------

def test_antecedent_requires_increasing_ids():
    with pytest.raises(ValueError):
        RuleAntecedent((2, 1))
    with pytest.raises(ValueError):
        RuleAntecedent(())
    assert RuleAntecedent((0, 3), ("a", "b")).label() == "a AND b"


def test_universe_rejects_duplicates_and_bad_weights():
    with pytest.raises(ValueError):
        RuleUniverse(rules_of((0,), (0,)))
    with pytest.raises(ValueError):
        RuleUniverse(rules_of((0,), (1,)), weights=(1.0, 0.0))


def test_hyperparameters_validate_and_schedule():
    with pytest.raises(ValueError):
        Hyperparameters(lambda_len=0)
    with pytest.raises(ValueError):
        Hyperparameters(min_support=1.5)
    h = Hyperparameters(alpha_gamma=(1.0, 2.0, 3.0))
    assert h.gamma_prior(0) == (1.0, 0.1)
    assert h.gamma_prior(7) == (3.0, 0.1)


def test_dataset_validates_shape():
    with pytest.raises(ValueError):
        BinaryDataset(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        BinaryDataset(np.zeros((2, 2)), np.zeros(3))
    with pytest.raises(ValueError):
        BinaryDataset(np.full((2, 2), 2), np.zeros(2))


# --- assignment -------------------------------------------------------------

def test_assign_rule_examples():
    rules = rules_of((0,), (1,), (2,))
    assert assign_rule([0, 0, 0, 1], rules) == 3
    assert assign_rule([1, 1, 1], []) == 0
    assert assign_rule([0, 1, 1], rules) == 1
    with pytest.raises(IndexError):
        assign_rule([0, 0], rules)


@given(st.integers(0, 2 ** 32 - 1))
def test_first_match_ignores_unreferenced_features(seed):
    rng = np.random.default_rng(seed)
    p = 6
    rules = [RuleAntecedent(tuple(sorted(rng.choice(p, size=rng.integers(1, 3), replace=False))))
             for _ in range(rng.integers(0, 4))]
    x = rng.random(p) < 0.5
    z = assign_rule(x, rules)
    used = {f for r in rules[: z + 1] for f in r.feature_ids}
    for f in set(range(p)) - used:
        x2 = x.copy()
        x2[f] = ~x2[f]
        assert assign_rule(x2, rules) == z


@given(st.integers(0, 2 ** 32 - 1))
def test_segments_partition_and_match_scalar_assignment(seed):
    rng = np.random.default_rng(seed)
    X = rng.random((int(rng.integers(1, 40)), 5)) < 0.4
    y = rng.random(X.shape[0]) < 0.5
    universe = RuleUniverse(rules_of((0,), (1,), (2,), (3,), (4,), (0, 1), (2, 4)))
    idx = tuple(int(j) for j in rng.permutation(len(universe))[: rng.integers(0, 5)])
    cols = build_rule_matrix(X, universe).columns
    z = assign_segments(cols, idx)
    ref = [first_match(x, [universe.rules[j].feature_ids for j in idx]) for x in X]
    assert z.tolist() == ref
    pos, neg = segment_counts(cols, y, idx)
    assert pos.sum() + neg.sum() == X.shape[0]
    assert np.array_equal(pos, np.bincount(z, weights=y, minlength=len(idx) + 1))


# --- risk ---------------------------------------------------------------------

def test_risk_vector_examples():
    v, r, p = risk_vector(FallingRuleList((), (), 1.0))
    assert p.tolist() == [0.5]
    v, r, p = risk_vector(FallingRuleList((0,), (2.0,), 1.0))
    assert np.allclose(v, [2, 1]) and np.allclose(p, [2 / 3, 1 / 2])


def test_risk_vector_inverts_target_probabilities():
    target = np.array([.84, .70, .54, .40, .25, .14])
    v = target / (1 - target)
    gamma = v[:-1] / v[1:]
    assert v[-1] == pytest.approx(0.16279, abs=1e-5)
    assert gamma == pytest.approx([2.25, 1.98765, 1.76087, 2.0, 2.04762], abs=1e-5)
    _, _, p = risk_vector(FallingRuleList(range(5), gamma, v[-1]))
    assert p == pytest.approx(target, abs=1e-12)


def test_zero_default_odds_is_minus_infinity():
    _, r, p = risk_vector(FallingRuleList((0,), (3.0,), 0.0))
    assert r.tolist() == [-math.inf, -math.inf]
    assert p.tolist() == [0.0, 0.0]


@given(st.lists(st.floats(1.0, 50.0), max_size=8), st.floats(1e-6, 1e3))
def test_probabilities_fall_and_satisfy_logistic_identity(gamma, k):
    v, r, p = risk_vector(FallingRuleList(range(len(gamma)), gamma, k))
    assert np.all(np.diff(p) <= 0)
    assert np.all(np.diff(r) <= 1e-12)
    assert np.allclose(v, odds(gamma, k), rtol=1e-12)
    assert np.allclose(p * (1 + v), v, rtol=1e-12, atol=1e-12)


def test_monotone_fuzz():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        L = rng.integers(0, 7)
        gamma = 1 + rng.exponential(2.0, L)
        _, _, p = risk_vector(FallingRuleList(range(L), gamma, rng.exponential(1.0)))
        assert np.all(np.diff(p) <= 0)


# --- likelihood -------------------------------------------------------------------

def test_log_likelihood_examples():
    assert log_likelihood(np.array([1, 1]), [0, 0], [0.0]) == pytest.approx(2 * math.log(0.5))
    assert log_likelihood(np.array([0]), [0], [-math.inf]) == 0.0
    r = np.log([0.8 / 0.2, 0.2 / 0.8])
    got = log_likelihood(np.array([1, 0, 1]), [0, 0, 1], r)
    assert got == pytest.approx(math.log(0.8) + math.log(0.2) + math.log(0.2))
    assert log_likelihood(np.array([1]), [0], [-math.inf]) == -math.inf


def test_log_likelihood_rejects_mismatch():
    with pytest.raises(ValueError):
        log_likelihood(np.array([1, 0]), [0], [0.0])
    with pytest.raises(ValueError):
        log_likelihood(np.array([1]), [1], [0.0])


# --- prior -------------------------------------------------------------------

def test_log_prior_support():
    U = RuleUniverse(rules_of((0,), (1,), (2,), (3,)))
    assert log_prior(FallingRuleList((0, 1), (0.9, 2.0), 1.0), U, H) == -math.inf
    assert log_prior(FallingRuleList((0, 0), (2.0, 2.0), 1.0), U, H) == -math.inf
    assert log_prior(FallingRuleList((), (), -1.0), U, H) == -math.inf


def _manual_prior(rules, gamma, k, n_rules, h=H, weights=None):
    out = math.log(structure_prior(rules, n_rules, h.lambda_len, weights))
    for l, g in enumerate(gamma):
        out += math.log(truncated_gamma_pdf(np.array(g), *h.gamma_prior(l)))
    return out + stats.gamma.logpdf(k, h.alpha_k, scale=1 / h.beta_k)


def test_log_prior_selection_terms():
    U1 = RuleUniverse(rules_of((0,)))
    lp = log_prior(FallingRuleList((0,), (2.0,), 1.0), U1, H)
    # with a single rule the selection term is log 1
    pois = stats.poisson.pmf([0, 1], H.lambda_len)
    expect = math.log(pois[1] / pois.sum()) + math.log(truncated_gamma_pdf(np.array(2.0), 1, 0.1)) \
        + stats.gamma.logpdf(1.0, 1, scale=10)
    assert lp == pytest.approx(expect, rel=1e-12)

    U4 = RuleUniverse(rules_of((0,), (1,), (2,), (3,)))
    a = log_prior(FallingRuleList((2, 0), (3.0, 1.5), 0.7), U4, H)
    pois = stats.poisson.pmf(range(5), H.lambda_len)
    sel = math.log(1 / 4) + math.log(1 / 3)
    cont = sum(math.log(truncated_gamma_pdf(np.array(g), 1, 0.1)) for g in (3.0, 1.5)) \
        + stats.gamma.logpdf(0.7, 1, scale=10)
    assert a == pytest.approx(math.log(pois[2] / pois.sum()) + sel + cont, rel=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_log_prior_matches_oracle_with_weights(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    w = tuple(rng.uniform(0.2, 3.0, n))
    U = RuleUniverse(rules_of(*[(j,) for j in range(n)]), weights=w)
    L = int(rng.integers(0, n + 1))
    rules = tuple(int(j) for j in rng.permutation(n)[:L])
    h = Hyperparameters(lambda_len=float(rng.uniform(0.5, 6)), alpha_gamma=float(rng.uniform(0.5, 3)),
                        beta_gamma=float(rng.uniform(0.05, 2)), alpha_k=2.0, beta_k=0.5)
    gamma = 1 + rng.exponential(1.0, L)
    k = float(rng.exponential(1.0))
    got = log_prior(FallingRuleList(rules, gamma, k), U, h)
    assert got == pytest.approx(_manual_prior(rules, gamma, k, n, h, w), rel=1e-10, abs=1e-10)


def test_prior_length_mass_sums_to_one():
    # sum over every ordered list of the structure prior is 1
    import itertools
    U = RuleUniverse(rules_of((0,), (1,), (2,)), weights=(1.0, 2.0, 0.5))
    from frl.model import structure_log_prior
    tot = sum(math.exp(structure_log_prior(r, U, H))
              for L in range(4) for r in itertools.permutations(range(3), L))
    assert tot == pytest.approx(1.0, abs=1e-12)


# --- posterior ------------------------------------------------------------------

def test_log_posterior_decomposes():
    rng = np.random.default_rng(4)
    X = rng.random((30, 3)) < 0.5
    y = rng.random(30) < 0.4
    data = BinaryDataset(X, y)
    U = RuleUniverse(rules_of((0,), (1,), (2,), (0, 2)))
    frl = FallingRuleList((3, 1), (2.5, 1.2), 0.4)
    z = [first_match(x, [(0, 2), (1,)]) for x in X]
    _, r, _ = risk_vector(frl)
    assert log_posterior(frl, U, data, H) == log_prior(frl, U, H) + log_likelihood(data, z, r)
    bad = FallingRuleList((3, 1), (0.5, 1.2), 0.4)
    assert log_posterior(bad, U, data, H) == -math.inf


def test_log_posterior_difference_in_k():
    data = BinaryDataset(np.array([[1]]), np.array([1]))
    U = RuleUniverse(rules_of((0,)))
    a, b = FallingRuleList((), (), 0.5), FallingRuleList((), (), 2.0)
    diff = log_posterior(b, U, data, H) - log_posterior(a, U, data, H)
    lik = math.log(2 / 3) - math.log(1 / 3)
    pri = stats.gamma.logpdf(2.0, 1, scale=10) - stats.gamma.logpdf(0.5, 1, scale=10)
    assert diff == pytest.approx(lik + pri, rel=1e-12)
