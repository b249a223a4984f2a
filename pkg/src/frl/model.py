"""
Core data types and densities for falling rule lists.

A falling rule list is an ordered list of antecedents followed by a default
rule.  Risk is parameterized on the odds scale: the default segment has odds
``K`` and each rule above multiplies the odds by a factor ``gamma_l >= 1``, so
the per-segment probabilities can only fall as one moves down the list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import special, stats

__all__ = [
    "RuleAntecedent",
    "RuleUniverse",
    "FallingRuleList",
    "BinaryDataset",
    "Hyperparameters",
    "assign_rule",
    "assign_segments",
    "segment_counts",
    "risk_vector",
    "log_likelihood",
    "counts_log_likelihood",
    "log_prior",
    "structure_log_prior",
    "log_posterior",
    "log_gamma_density",
    "log_truncated_gamma_density",
]


@dataclass(frozen=True)
class RuleAntecedent:
    """A conjunction of ``feature == 1`` conditions."""

    feature_ids: tuple[int, ...]
    display_names: tuple[str, ...] | None = None

    def __post_init__(self):
        ids = tuple(int(f) for f in self.feature_ids)
        if not ids:
            raise ValueError("antecedent needs at least one condition")
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise ValueError(f"feature ids must be strictly increasing: {ids}")
        if ids[0] < 0:
            raise ValueError("feature ids must be nonnegative")
        object.__setattr__(self, "feature_ids", ids)
        if self.display_names is not None:
            names = tuple(self.display_names)
            if len(names) != len(ids):
                raise ValueError("display_names must match feature_ids")
            object.__setattr__(self, "display_names", names)

    @property
    def cardinality(self) -> int:
        return len(self.feature_ids)

    def matches(self, x) -> bool:
        return all(bool(x[f]) for f in self.feature_ids)

    def label(self) -> str:
        names = self.display_names or tuple(f"x{f}" for f in self.feature_ids)
        return " AND ".join(names)


@dataclass(frozen=True)
class RuleUniverse:
    """The pool of candidate antecedents with selection weights and supports."""

    rules: tuple[RuleAntecedent, ...]
    weights: tuple[float, ...] = None
    support_counts: tuple[int, ...] = None

    def __post_init__(self):
        rules = tuple(self.rules)
        weights = (1.0,) * len(rules) if self.weights is None else tuple(float(w) for w in self.weights)
        supports = (0,) * len(rules) if self.support_counts is None else tuple(int(s) for s in self.support_counts)
        if not (len(rules) == len(weights) == len(supports)):
            raise ValueError("rules, weights and support_counts must have equal length")
        if any(not w > 0 for w in weights):
            raise ValueError("rule weights must be positive")
        if len({r.feature_ids for r in rules}) != len(rules):
            raise ValueError("rule universe contains duplicate antecedents")
        object.__setattr__(self, "rules", rules)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "support_counts", supports)
        object.__setattr__(self, "_uniform", len(set(weights)) <= 1)

    def __len__(self):
        return len(self.rules)

    @property
    def uniform(self) -> bool:
        return self._uniform

    @classmethod
    def identity(cls, p: int, feature_names: Sequence[str] | None = None) -> "RuleUniverse":
        """One single-feature rule per column."""
        names = feature_names or [f"x{j}" for j in range(p)]
        return cls(tuple(RuleAntecedent((j,), (names[j],)) for j in range(p)))


@dataclass(frozen=True)
class FallingRuleList:
    """Parameters ``{L, rules, gamma, K}`` of one falling rule list.

    ``rule_indices`` point into a :class:`RuleUniverse`.  See ``is_valid``
    for the support constraints.
    """

    rule_indices: tuple[int, ...] = ()
    gamma: tuple[float, ...] = ()
    k_default: float = 1.0

    def __post_init__(self):
        idx = tuple(int(i) for i in self.rule_indices)
        gam = tuple(float(g) for g in self.gamma)
        if len(idx) != len(gam):
            raise ValueError("need one gamma per rule")
        if any(math.isnan(g) for g in gam) or math.isnan(self.k_default):
            raise ValueError("parameters must not be NaN")
        object.__setattr__(self, "rule_indices", idx)
        object.__setattr__(self, "gamma", gam)
        object.__setattr__(self, "k_default", float(self.k_default))

    @property
    def length(self) -> int:
        return len(self.rule_indices)

    @property
    def is_valid(self) -> bool:
        """Distinct rules, every ``gamma >= 1`` and ``K >= 0``.

        Invalid lists can be built (e.g. as proposals) but have zero prior
        density.
        """
        return (len(set(self.rule_indices)) == len(self.rule_indices)
                and all(g >= 1.0 for g in self.gamma) and self.k_default >= 0.0)

    def risk(self):
        return risk_vector(self)


@dataclass(frozen=True, eq=False)
class BinaryDataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = None

    def __post_init__(self):
        X = np.asarray(self.features)
        y = np.asarray(self.labels)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"features must be a non-empty N x p matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError("labels must have one entry per row")
        for arr, what in ((X, "features"), (y, "labels")):
            if arr.dtype != bool and not np.isin(arr, (0, 1)).all():
                raise ValueError(f"{what} must be binary")
        X = X.astype(bool)
        y = y.astype(bool)
        X.flags.writeable = False
        y.flags.writeable = False
        names = self.feature_names
        names = tuple(f"x{j}" for j in range(X.shape[1])) if names is None else tuple(names)
        if len(names) != X.shape[1]:
            raise ValueError("feature_names must match number of columns")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "BinaryDataset":
        return BinaryDataset(self.features[rows], self.labels[rows], self.feature_names)


def _positive_schedule(value, name):
    if np.isscalar(value):
        vals = (float(value),)
    else:
        vals = tuple(float(v) for v in value)
        if not vals:
            raise ValueError(f"{name} schedule is empty")
    if any(not v > 0 for v in vals):
        raise ValueError(f"{name} must be strictly positive")
    return vals if len(vals) > 1 else vals[0]


@dataclass(frozen=True)
class Hyperparameters:
    """Prior and mining hyperparameters.

    ``alpha_gamma`` and ``beta_gamma`` are either constants or per-position
    schedules; positions beyond the end of a schedule reuse its last entry.
    """

    lambda_len: float = 8.0
    alpha_gamma: float | tuple[float, ...] = 1.0
    beta_gamma: float | tuple[float, ...] = 0.1
    alpha_k: float = 1.0
    beta_k: float = 0.1
    min_support: float = 0.05
    max_cardinality: int = 2

    def __post_init__(self):
        object.__setattr__(self, "alpha_gamma", _positive_schedule(self.alpha_gamma, "alpha_gamma"))
        object.__setattr__(self, "beta_gamma", _positive_schedule(self.beta_gamma, "beta_gamma"))
        for name in ("lambda_len", "alpha_k", "beta_k", "min_support"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.min_support > 1:
            raise ValueError("min_support must be <= 1")
        if int(self.max_cardinality) < 1:
            raise ValueError("max_cardinality must be >= 1")

    def gamma_prior(self, position: int) -> tuple[float, float]:
        def pick(s):
            if isinstance(s, tuple):
                return s[min(position, len(s) - 1)]
            return s
        return pick(self.alpha_gamma), pick(self.beta_gamma)


# --- assignment -------------------------------------------------------------

def assign_rule(x, rules: Sequence[RuleAntecedent]) -> int:
    """Index of the first antecedent satisfied by ``x``; ``len(rules)`` if none."""
    x = np.asarray(x)
    for l, rule in enumerate(rules):
        if rule.feature_ids[-1] >= x.shape[0]:
            raise IndexError(f"feature {rule.feature_ids[-1]} out of range for vector of length {x.shape[0]}")
        if rule.matches(x):
            return l
    return len(rules)


def assign_segments(columns: np.ndarray, rule_indices: Sequence[int]) -> np.ndarray:
    """Vectorized first-match assignment.

    ``columns`` is the ``|B| x N`` boolean rule-applicability matrix (rule
    rows), as stored on :class:`frl.mining.RuleMatrix`.
    """
    L = len(rule_indices)
    n = columns.shape[1]
    z = np.full(n, L, dtype=np.intp)
    free = np.ones(n, dtype=bool)
    for l, j in enumerate(rule_indices):
        hit = columns[j] & free
        z[hit] = l
        free &= ~hit
    return z


def segment_counts(columns: np.ndarray, labels: np.ndarray, rule_indices: Sequence[int]):
    """Positive and negative counts in each of the ``L + 1`` segments."""
    L = len(rule_indices)
    pos = np.empty(L + 1)
    tot = np.empty(L + 1)
    free = np.ones(columns.shape[1], dtype=bool)
    for l, j in enumerate(rule_indices):
        hit = columns[j] & free
        tot[l] = np.count_nonzero(hit)
        pos[l] = np.count_nonzero(hit & labels)
        free &= ~hit
    tot[L] = np.count_nonzero(free)
    pos[L] = np.count_nonzero(free & labels)
    return pos, tot - pos


# --- risk -------------------------------------------------------------------

def risk_vector(frl: FallingRuleList):
    """Odds ``v``, log-odds ``r`` and probabilities ``p`` for all ``L + 1`` segments.

    ``v_L = K`` and ``v_l = gamma_l * v_{l+1}``.  ``K = 0`` gives ``r = -inf``
    on every segment.
    """
    gam = frl.gamma
    L = len(gam)
    v = [0.0] * (L + 1)
    acc = frl.k_default
    v[L] = acc
    for l in range(L - 1, -1, -1):
        acc *= gam[l]
        v[l] = acc
    if math.isinf(v[0]):
        p = [1.0 if math.isinf(x) else x / (1.0 + x) for x in v]
    else:
        p = [x / (1.0 + x) for x in v]
    r = [math.log(x) if x > 0 else -math.inf for x in v]
    return np.array(v), np.array(r), np.array(p)


def _log1pexp(x: float) -> float:
    if x > 35.0:
        return x
    if x < -35.0:
        return math.exp(x)
    return math.log1p(math.exp(x))


def counts_log_likelihood(pos, neg, r) -> float:
    """Bernoulli log-likelihood from per-segment positive/negative counts."""
    total = 0.0
    for n_pos, n_neg, rl in zip(pos, neg, r):
        rl = float(rl)
        if n_pos:
            total -= n_pos * _log1pexp(-rl)
        if n_neg:
            total -= n_neg * _log1pexp(rl)
    return float(total)


def log_likelihood(data: BinaryDataset | np.ndarray, z, r) -> float:
    """Sum of Bernoulli log-probabilities of the labels under segment risks ``r``.

    ``data`` may be a :class:`BinaryDataset` or a bare label vector.
    """
    y = data.labels if isinstance(data, BinaryDataset) else np.asarray(data, dtype=bool)
    z = np.asarray(z)
    if z.shape != y.shape:
        raise ValueError(f"z has shape {z.shape}, labels have shape {y.shape}")
    r = np.asarray(r, dtype=float)
    nseg = len(r)
    if len(z) and (z.min() < 0 or z.max() >= nseg):
        raise ValueError("segment index out of range for risk vector")
    pos = np.bincount(z[y], minlength=nseg)
    neg = np.bincount(z[~y], minlength=nseg)
    return counts_log_likelihood(pos, neg, r)


# --- prior ------------------------------------------------------------------

def log_gamma_density(x, alpha, beta):
    """Log density of Gamma(shape ``alpha``, rate ``beta``) at ``x`` (``-inf`` for x < 0)."""
    if x < 0:
        return -math.inf
    if x == 0:
        if alpha < 1:
            return math.inf
        if alpha > 1:
            return -math.inf
    shape_term = (alpha - 1.0) * math.log(x) if alpha != 1.0 else 0.0
    return alpha * math.log(beta) + shape_term - beta * x - math.lgamma(alpha)


@lru_cache(maxsize=4096)
def _log_upper_mass(alpha, beta, lower):
    return float(np.log(special.gammaincc(alpha, beta * lower))) if lower > 0 else 0.0


def log_truncated_gamma_density(x, alpha, beta, lower=1.0):
    """Log density of Gamma(alpha, rate beta) conditioned on ``x >= lower``."""
    if x < lower:
        return -math.inf
    return log_gamma_density(x, alpha, beta) - _log_upper_mass(float(alpha), float(beta), float(lower))


@lru_cache(maxsize=1024)
def _log_length_prior(L, n_rules, lam):
    return float(stats.poisson.logpmf(L, lam) - stats.poisson.logcdf(n_rules, lam))


def structure_log_prior(rule_indices: Sequence[int], universe: RuleUniverse, H: Hyperparameters) -> float:
    """Log prior mass of the list length and the ordered rule choice."""
    n_rules = len(universe)
    L = len(rule_indices)
    if L > n_rules or len(set(rule_indices)) != L:
        return -math.inf
    if any(j < 0 or j >= n_rules for j in rule_indices):
        return -math.inf
    out = _log_length_prior(L, n_rules, float(H.lambda_len))
    w = universe.weights
    if universe.uniform:
        # without-replacement uniform draws: prod 1/(|B| - l)
        out -= sum(math.log(n_rules - l) for l in range(L))
    else:
        remaining = math.fsum(w)
        for j in rule_indices:
            out += math.log(w[j]) - math.log(remaining)
            remaining -= w[j]
    return out


def continuous_log_prior(gamma: Sequence[float], k_default: float, H: Hyperparameters) -> float:
    out = log_gamma_density(k_default, H.alpha_k, H.beta_k)
    for l, g in enumerate(gamma):
        a, b = H.gamma_prior(l)
        out += log_truncated_gamma_density(g, a, b, 1.0)
    return out


def log_prior(frl: FallingRuleList, universe: RuleUniverse, H: Hyperparameters) -> float:
    """Log prior density of a falling rule list; ``-inf`` outside the support."""
    if not frl.is_valid:
        return -math.inf
    s = structure_log_prior(frl.rule_indices, universe, H)
    if s == -math.inf:
        return s
    return s + continuous_log_prior(frl.gamma, frl.k_default, H)


def log_posterior(frl: FallingRuleList, universe: RuleUniverse, data: BinaryDataset, H: Hyperparameters) -> float:
    """Unnormalized log posterior: ``log_prior + log_likelihood``."""
    lp = log_prior(frl, universe, H)
    if lp == -math.inf:
        return lp
    rules = [universe.rules[j] for j in frl.rule_indices]
    if rules and max(r.feature_ids[-1] for r in rules) >= data.p:
        raise IndexError("rule references a feature outside the dataset")
    z = np.array([assign_rule(x, rules) for x in data.features], dtype=np.intp)
    _, r, _ = risk_vector(frl)
    return lp + log_likelihood(data, z, r)
