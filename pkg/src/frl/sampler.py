"""
Posterior sampling for falling rule lists.

Each datum carries two auxiliary variables: ``zeta_n ~ Exponential(1)`` and
``U_n ~ Poisson(zeta_n * v_{z_n})`` with ``y_n = 1(U_n > 0)``.  Integrating
them out recovers the logistic likelihood, and conditioning on them makes the
full conditionals of ``K`` and every ``gamma_l`` Gamma (truncated to
``[1, inf)`` for ``gamma``).

One sweep of :func:`run_chain` applies, in this order:

1. Gibbs update of every ``gamma_l``,
2. Gibbs update of ``K``,
3. a Metropolis-Hastings move on the rule list with the auxiliary variables
   integrated out,
4. a joint Gibbs update of all ``(U_n, zeta_n)``.

Steps 3 and 4 must stay in this order; splitting step 4 into separate
``U`` and ``zeta`` updates would break the stationary distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import special

from .annealing import ADD, REMOVE, propose_neighbor
from .mining import RuleMatrix, build_rule_matrix
from .model import (BinaryDataset, FallingRuleList, Hyperparameters, RuleUniverse,
                    assign_segments, continuous_log_prior, counts_log_likelihood, risk_vector,
                    structure_log_prior, log_truncated_gamma_density, _log_length_prior)

__all__ = [
    "ChainState", "ConditionalCoefficients", "ChainResult",
    "sample_truncated_gamma", "conditional_coefficients",
    "gamma_conditional", "k_conditional", "gibbs_gamma", "gibbs_k",
    "gibbs_augmented", "collapsed_mh_step", "sample_prior", "sample_augmented_prior",
    "initial_state", "run_chain", "fixed_params_log_posterior",
]

TRUNCATION_FLOOR = 1e-300


def sample_truncated_gamma(alpha: float, beta: float, lower_bound: float = 1.0, rng=None) -> float:
    """Draw from Gamma(shape ``alpha``, rate ``beta``) conditioned on ``x >= lower_bound``.

    Uses inversion of the upper regularized incomplete gamma function, so one
    uniform is consumed per draw.
    """
    rng = np.random.default_rng() if rng is None else rng
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    if lower_bound <= 0:
        return float(rng.gamma(alpha, 1.0 / beta))
    tail = special.gammaincc(alpha, beta * lower_bound)
    if tail < TRUNCATION_FLOOR:
        raise FloatingPointError(
            f"Gamma({alpha}, {beta}) has mass {tail:.3g} above {lower_bound}; cannot truncate")
    u = 1.0 - rng.random()
    x = special.gammainccinv(alpha, u * tail) / beta
    return float(max(x, lower_bound))


@dataclass
class ChainState:
    """Current parameters plus auxiliary variables.

    ``z`` caches the segment of every datum under ``frl``.
    """

    frl: FallingRuleList
    z: np.ndarray
    u: np.ndarray
    zeta: np.ndarray

    def check(self, labels, matrix: RuleMatrix | None = None):
        if not self.frl.is_valid:
            raise AssertionError(f"invalid rule list {self.frl}")
        if not np.array_equal(self.u > 0, np.asarray(labels, dtype=bool)):
            raise AssertionError("u_n > 0 must coincide with y_n = 1")
        if matrix is not None and not np.array_equal(self.z, assign_segments(matrix.columns, self.frl.rule_indices)):
            raise AssertionError("z is stale")


@dataclass(frozen=True)
class ConditionalCoefficients:
    """Per-datum ``sigma_{z_n}^{(l)}`` for one target position and ``o_{z_n}``."""

    sigma: np.ndarray
    o: np.ndarray


def _segment_coefficients(gamma: Sequence[float], k_default: float, l: int | None):
    """``sigma_k^{(l)}`` and ``o_k`` for every segment ``k = 0..L`` as lists."""
    L = len(gamma)
    o = [1.0] * (L + 1)
    for k in range(L - 1, -1, -1):
        o[k] = o[k + 1] * gamma[k]
    if l is None:
        return None, o
    sigma = [0.0] * (L + 1)
    acc = k_default
    for i in range(L - 1, l, -1):
        acc *= gamma[i]
    for k in range(l, -1, -1):
        sigma[k] = acc
        if k > 0:
            acc *= gamma[k - 1]
    return sigma, o


def conditional_coefficients(frl: FallingRuleList, z, l: int) -> ConditionalCoefficients:
    sigma, o = _segment_coefficients(frl.gamma, frl.k_default, l)
    z = np.asarray(z)
    return ConditionalCoefficients(np.asarray(sigma)[z], np.asarray(o)[z])


def _segment_sums(state: ChainState):
    nseg = state.frl.length + 1
    u_sum = np.bincount(state.z, weights=state.u, minlength=nseg).tolist()
    zeta_sum = np.bincount(state.z, weights=state.zeta, minlength=nseg).tolist()
    return u_sum, zeta_sum


def _gamma_params(l, gamma, k_default, u_sum, zeta_sum, H):
    sigma, _ = _segment_coefficients(gamma, k_default, l)
    a, b = H.gamma_prior(l)
    return a + math.fsum(u_sum[:l + 1]), b + math.fsum(zs * sg for zs, sg in zip(zeta_sum, sigma))


def _k_params(gamma, u_sum, zeta_sum, H):
    _, o = _segment_coefficients(gamma, 0.0, None)
    return H.alpha_k + math.fsum(u_sum), H.beta_k + math.fsum(zs * ok for zs, ok in zip(zeta_sum, o))


def gamma_conditional(l: int, state: ChainState, H: Hyperparameters) -> tuple[float, float]:
    """Shape and rate of the full conditional of ``gamma_l`` (before truncation)."""
    u_sum, zeta_sum = _segment_sums(state)
    return _gamma_params(l, state.frl.gamma, state.frl.k_default, u_sum, zeta_sum, H)


def k_conditional(state: ChainState, H: Hyperparameters) -> tuple[float, float]:
    u_sum, zeta_sum = _segment_sums(state)
    return _k_params(state.frl.gamma, u_sum, zeta_sum, H)


def gibbs_gamma(l: int, state: ChainState, H: Hyperparameters, rng) -> float:
    """New value of ``gamma_l`` drawn from its full conditional truncated to ``[1, inf)``."""
    shape, rate = gamma_conditional(l, state, H)
    return sample_truncated_gamma(shape, rate, 1.0, rng)


def gibbs_k(state: ChainState, H: Hyperparameters, rng) -> float:
    shape, rate = k_conditional(state, H)
    return float(rng.gamma(shape, 1.0 / rate))


def gibbs_augmented(state: ChainState, data: BinaryDataset | np.ndarray, rng):
    """Joint draw of all ``(U_n, zeta_n)`` given the parameters and labels.

    ``y_n = 0``: ``U_n = 0`` and ``zeta_n ~ Exponential(rate 1 + v)``.
    ``y_n = 1``: ``U_n - 1 ~ Geometric(1 / (1 + v))`` counting failures, then
    ``zeta_n ~ Gamma(1 + U_n, rate 1 + v)``.  Draws are vectorized in datum
    order, so results do not depend on how the caller iterates.
    """
    y = data.labels if isinstance(data, BinaryDataset) else np.asarray(data, dtype=bool)
    v, _, _ = risk_vector(state.frl)
    scale = 1.0 / (1.0 + v[state.z])
    # numpy's geometric counts trials, i.e. 1 + failures
    u = np.where(y, rng.geometric(scale), 0)
    zeta = rng.gamma(1.0 + u, scale)
    return u, zeta


def fixed_params_log_posterior(frl: FallingRuleList, universe: RuleUniverse, H: Hyperparameters,
                               matrix: RuleMatrix, labels) -> float:
    """Non-augmented log posterior using the cached rule matrix."""
    if not frl.is_valid:
        return -math.inf
    sp = structure_log_prior(frl.rule_indices, universe, H)
    if sp == -math.inf:
        return sp
    z = assign_segments(matrix.columns, frl.rule_indices)
    nseg = frl.length + 1
    tot = np.bincount(z, minlength=nseg)
    pos = np.bincount(z, weights=labels, minlength=nseg)
    neg = tot - pos
    _, r, _ = risk_vector(frl)
    return sp + continuous_log_prior(frl.gamma, frl.k_default, H) + counts_log_likelihood(pos, neg, r)


def collapsed_mh_step(state: ChainState, universe: RuleUniverse, data: BinaryDataset, H: Hyperparameters,
                      rng, matrix: RuleMatrix | None = None, proposal=None):
    """Metropolis-Hastings move on ``(L, rules)`` with ``U`` and ``zeta`` integrated out.

    ``K`` and the ``gamma`` of rules that stay in the list are held fixed
    (SWAP and REPLACE keep ``gamma`` by position, REMOVE drops the removed
    position's factor).  ADD draws the new factor from its truncated prior;
    that proposal density enters the ratio, cancelling the prior term of the
    new factor.  Returns ``(state, accepted, proposal)``; ``u`` and ``zeta``
    are left untouched.
    """
    matrix = matrix or build_rule_matrix(data, universe)
    y = data.labels
    cur = state.frl
    if len(universe) == 0:
        return state, False, None
    prop = proposal or propose_neighbor(cur.rule_indices, universe, rng)
    gam = list(cur.gamma)
    log_jump = 0.0
    if prop.move == ADD:
        a, b = H.gamma_prior(prop.position)
        g_new = sample_truncated_gamma(a, b, 1.0, rng)
        gam.insert(prop.position, g_new)
        log_jump -= log_truncated_gamma_density(g_new, a, b)
    elif prop.move == REMOVE:
        a, b = H.gamma_prior(prop.position)
        log_jump += log_truncated_gamma_density(gam.pop(prop.position), a, b)
    new = FallingRuleList(prop.rules, tuple(gam), cur.k_default)
    lp_new = fixed_params_log_posterior(new, universe, H, matrix, y)
    if lp_new == -math.inf:
        return state, False, prop
    lp_cur = fixed_params_log_posterior(cur, universe, H, matrix, y)
    log_ratio = lp_new - lp_cur + prop.log_q_reverse - prop.log_q_forward + log_jump
    if log_ratio >= 0 or math.log(1.0 - rng.random()) < log_ratio:
        z = assign_segments(matrix.columns, new.rule_indices)
        return replace(state, frl=new, z=z), True, prop
    return state, False, prop


@lru_cache(maxsize=256)
def _length_cdf(n_rules: int, lam: float) -> np.ndarray:
    pmf = np.exp([_log_length_prior(k, n_rules, lam) for k in range(n_rules + 1)])
    return np.cumsum(pmf)


def sample_prior(universe: RuleUniverse, H: Hyperparameters, rng) -> FallingRuleList:
    """Exact draw of a rule list from the prior."""
    n = len(universe)
    # truncated Poisson on {0..|B|} by inversion over the renormalized pmf
    cdf = _length_cdf(n, float(H.lambda_len))
    L = int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), n))
    if universe.uniform:
        rules = [int(j) for j in rng.choice(n, size=L, replace=False)] if L else []
    else:
        w = np.asarray(universe.weights, dtype=float)
        rules = []
        avail = np.ones(n, dtype=bool)
        for _ in range(L):
            p = np.where(avail, w, 0.0)
            j = int(rng.choice(n, p=p / p.sum()))
            rules.append(j)
            avail[j] = False
    gam = tuple(sample_truncated_gamma(*H.gamma_prior(l), 1.0, rng) for l in range(L))
    k = float(rng.gamma(H.alpha_k, 1.0 / H.beta_k))
    return FallingRuleList(tuple(rules), gam, k)


def sample_augmented_prior(frl: FallingRuleList, z, rng):
    """Forward draw of ``(zeta, U, y)`` from the augmented likelihood."""
    v, _, _ = risk_vector(frl)
    z = np.asarray(z)
    zeta = rng.exponential(1.0, size=len(z))
    u = rng.poisson(zeta * v[z])
    return zeta, u, u > 0


def initial_state(frl: FallingRuleList, data: BinaryDataset, matrix: RuleMatrix, rng) -> ChainState:
    z = assign_segments(matrix.columns, frl.rule_indices)
    state = ChainState(frl, z, np.zeros(len(z), dtype=np.int64), np.zeros(len(z)))
    u, zeta = gibbs_augmented(state, data, rng)
    return replace(state, u=u, zeta=zeta)


def sweep(state: ChainState, data: BinaryDataset, universe: RuleUniverse, H: Hyperparameters,
          matrix: RuleMatrix, rng):
    """One full update cycle; returns ``(state, accepted)``."""
    # z, u and zeta are fixed through steps 1 and 2, so their segment sums are too
    u_sum, zeta_sum = _segment_sums(state)
    gam = list(state.frl.gamma)
    k = state.frl.k_default
    for l in range(len(gam)):
        gam[l] = sample_truncated_gamma(*_gamma_params(l, gam, k, u_sum, zeta_sum, H), 1.0, rng)
    shape, rate = _k_params(gam, u_sum, zeta_sum, H)
    k = float(rng.gamma(shape, 1.0 / rate))
    state = replace(state, frl=FallingRuleList(state.frl.rule_indices, tuple(gam), k))
    state, accepted, _ = collapsed_mh_step(state, universe, data, H, rng, matrix)
    u, zeta = gibbs_augmented(state, data, rng)
    return replace(state, u=u, zeta=zeta), accepted


@dataclass
class ChainResult:
    samples: list
    accept_rate: float
    final_state: ChainState

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]


def run_chain(data: BinaryDataset, universe: RuleUniverse, H: Hyperparameters, iterations: int,
              burn_in: int | None = None, thin: int = 10, seed=0, *,
              init: FallingRuleList | None = None, matrix: RuleMatrix | None = None,
              check: bool = False) -> ChainResult:
    """Run one posterior chain.

    ``burn_in`` defaults to 20% of ``iterations``.  Every ``thin``-th
    post-burn-in state is kept.  The chain starts from ``init`` (default: the
    empty list with ``K`` at the overall training odds).  ``check=True``
    validates every state's invariants.
    """
    burn_in = iterations // 5 if burn_in is None else burn_in
    if not iterations > burn_in >= 0:
        raise ValueError("need iterations > burn_in >= 0")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    matrix = matrix or build_rule_matrix(data, universe)
    if init is None:
        rate = (data.labels.sum() + 1.0) / (data.n + 2.0)
        init = FallingRuleList((), (), rate / (1.0 - rate))
    state = initial_state(init, data, matrix, rng)
    samples = []
    n_acc = 0
    for it in range(iterations):
        state, acc = sweep(state, data, universe, H, matrix, rng)
        n_acc += acc
        if check:
            state.check(data.labels, matrix)
        if it >= burn_in and (it - burn_in) % thin == 0:
            samples.append(state.frl)
    return ChainResult(samples, n_acc / iterations, state)
