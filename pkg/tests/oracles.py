"""
Independent reference implementations used by the tests.

Nothing here calls into the package except for data containers, so each
function is a second route to the quantity the package computes.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate, special, stats


# --- mining -------------------------------------------------------------------------

def brute_force_itemsets(X, min_count, max_size):
    """Every itemset of size <= max_size with support >= min_count, by enumeration."""
    X = np.asarray(X, dtype=bool)
    p = X.shape[1]
    out = {}
    for k in range(1, max_size + 1):
        for combo in itertools.combinations(range(p), k):
            s = int(np.all(X[:, list(combo)], axis=1).sum())
            if s >= min_count:
                out[combo] = s
    return out


# --- evaluation -------------------------------------------------------------------

def auroc_pairs(scores, labels):
    """Fraction of positive/negative pairs ranked correctly, ties counted 1/2."""
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    tot = 0.0
    for a in pos:
        for b in neg:
            tot += 1.0 if a > b else 0.5 if a == b else 0.0
    return tot / (len(pos) * len(neg))


def edit_distance_recursive(a, b):
    a, b = tuple(a), tuple(b)
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(edit_distance_recursive(a[1:], b) + 1,
               edit_distance_recursive(a, b[1:]) + 1,
               edit_distance_recursive(a[1:], b[1:]) + (a[0] != b[0]))


# --- model --------------------------------------------------------------------------

def odds(gamma, k):
    """Segment odds by explicit products."""
    L = len(gamma)
    return [k * math.prod(gamma[i:]) for i in range(L)] + [k]


def first_match(x, antecedents):
    for l, feats in enumerate(antecedents):
        if all(x[f] for f in feats):
            return l
    return len(antecedents)


def structure_prior(rules, n_rules, lam, weights=None):
    """Truncated-Poisson length times sequential without-replacement picks."""
    w = np.ones(n_rules) if weights is None else np.asarray(weights, float)
    pmf = np.array([stats.poisson.pmf(k, lam) for k in range(n_rules + 1)])
    p = pmf[len(rules)] / pmf.sum()
    left = w.sum()
    for j in rules:
        p *= w[j] / left
        left -= w[j]
    return p


def truncated_gamma_pdf(x, a, b):
    return np.where(x >= 1, stats.gamma.pdf(x, a, scale=1 / b) / special.gammaincc(a, b), 0.0)


# --- tiny instance and its exact posterior ---------------------------------------------------

def tiny_instance(seed=11, n=20, p=3):
    """Small dataset whose labels follow a two-rule list over single-feature rules."""
    rng = np.random.default_rng(seed)
    X = rng.random((n, p)) < 0.45
    z = np.array([first_match(x, [(1,), (0,)]) for x in X])
    y = rng.random(n) < np.array([0.85, 0.55, 0.2])[z]
    return X, y


def _segment_loglik(pos, neg, r):
    # log sigma(r) = -log1p(exp(-r))
    return -pos * np.logaddexp(0.0, -r) - neg * np.logaddexp(0.0, r)


def list_evidence(X, y, rules, alpha_g, beta_g, alpha_k, beta_k, lo=-25.0, hi=25.0, h=0.01):
    """``(Z, Z_K)``: integral of prior times likelihood over ``(K, gamma)`` for one
    list of single-feature rules, and the same integral weighted by ``K``.

    Parameters live in log-odds space: ``r_L = log K`` and
    ``r_l = r_{l+1} + t_l`` with ``t_l = log gamma_l >= 0``.  The integrand
    factorizes along the list, so a message is passed from the default
    segment upward with one discrete convolution (trapezoid rule) per position.
    """
    X = np.asarray(X, dtype=bool)
    y = np.asarray(y, dtype=bool)
    L = len(rules)
    grid = np.arange(lo, hi + h / 2, h)
    t = np.arange(0.0, hi - lo + h / 2, h)
    # densities of log K and log gamma (change of variables)
    gk = np.exp(stats.gamma.logpdf(np.exp(grid), alpha_k, scale=1 / beta_k) + grid)
    log_tail = math.log(special.gammaincc(alpha_g, beta_g))
    gt = np.exp(stats.gamma.logpdf(np.exp(t), alpha_g, scale=1 / beta_g) - log_tail + t)
    wt = np.full(t.size, h)
    wt[0] = h / 2
    kernel = gt * wt

    z = np.array([first_match(x, [(j,) for j in rules]) for x in X], dtype=int)
    pos = np.bincount(z, weights=y, minlength=L + 1)
    neg = np.bincount(z, minlength=L + 1) - pos
    m = np.vstack([gk, gk * np.exp(grid)])
    m = m * np.exp(_segment_loglik(pos[L], neg[L], grid))
    for l in range(L - 1, -1, -1):
        m = np.vstack([np.convolve(row, kernel)[: grid.size] for row in m])
        m = m * np.exp(_segment_loglik(pos[l], neg[l], grid))
    z0, z1 = integrate.trapezoid(m, dx=h, axis=1)
    return float(z0), float(z1)


def exact_posterior(X, y, lam, alpha_g, beta_g, alpha_k, beta_k, **grid):
    """Posterior over every ordered list of single-feature rules.

    Returns ``(probs, mean_k)``: structure -> posterior probability, and the
    posterior mean of ``K``.
    """
    p = np.asarray(X).shape[1]
    marg, mk = {}, {}
    for L in range(p + 1):
        for rules in itertools.permutations(range(p), L):
            z0, z1 = list_evidence(X, y, rules, alpha_g, beta_g, alpha_k, beta_k, **grid)
            marg[rules] = structure_prior(rules, p, lam) * z0
            mk[rules] = z1 / z0
    tot = sum(marg.values())
    probs = {k: v / tot for k, v in marg.items()}
    return probs, sum(probs[k] * mk[k] for k in probs)


# --- augmented joint --------------------------------------------------------------

def augmented_log_joint(gamma, k, z, u, zeta, alpha_g, beta_g, alpha_k, beta_k):
    """log p(gamma, K, zeta, U) for fixed structure, up to a constant."""
    v = np.asarray(odds(gamma, k))[np.asarray(z)]
    u = np.asarray(u, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    out = float(np.sum(u * np.log(zeta * v) - zeta * v - zeta - special.gammaln(u + 1)))
    for g in gamma:
        if g < 1:
            return -math.inf
        out += stats.gamma.logpdf(g, alpha_g, scale=1 / beta_g)
    return out + stats.gamma.logpdf(k, alpha_k, scale=1 / beta_k)
