"""
MAP search over falling rule lists.

The discrete part (which rules, in which order) is searched by simulated
annealing.  For every visited rule list the continuous parameters ``K`` and
``gamma`` are profiled out by :func:`optimize_continuous`, so the annealing
energy is ``-max_{K, gamma} log posterior``.

The neighbor kernel (:func:`propose_neighbor`) and its transition
probabilities (:func:`proposal_probability`) are shared with the posterior
sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .mining import RuleMatrix, build_rule_matrix
from .model import (BinaryDataset, FallingRuleList, Hyperparameters, RuleUniverse,
                    segment_counts, structure_log_prior, _log_upper_mass)

__all__ = [
    "SWAP", "REPLACE", "ADD", "REMOVE", "MOVES",
    "Proposal", "valid_moves", "propose_neighbor", "proposal_probability", "log_proposal_probability",
    "InnerOptResult", "optimize_counts", "optimize_continuous", "initial_point", "pava_decreasing",
    "AnnealingConfig", "AnnealResult", "simulated_annealing", "anneal_chains",
]

SWAP, REPLACE, ADD, REMOVE = "swap", "replace", "add", "remove"
MOVES = (SWAP, REPLACE, ADD, REMOVE)


# --- neighbor kernel --------------------------------------------------------

def valid_moves(length: int, n_rules: int) -> tuple[str, ...]:
    """Move types that can be applied to a list of ``length`` rules over ``n_rules`` candidates."""
    out = []
    if length >= 2:
        out.append(SWAP)
    if 1 <= length < n_rules:
        out.append(REPLACE)
    if length < n_rules:
        out.append(ADD)
    if length >= 1:
        out.append(REMOVE)
    return tuple(out)


@dataclass(frozen=True)
class Proposal:
    """A neighbor of the current list plus the bookkeeping needed for MH.

    ``position`` is the first swapped index, the replaced index, the
    insertion point, or the removed index.  ``log_q_forward`` and
    ``log_q_reverse`` are ``log Q(new | old)`` and ``log Q(old | new)``.
    """

    rules: tuple[int, ...]
    move: str
    position: int
    other: int
    log_q_forward: float
    log_q_reverse: float


def _draw_unchosen(chosen, universe: RuleUniverse, rng) -> int:
    n = len(universe)
    if universe.uniform:
        if len(chosen) * 2 < n:
            while True:
                j = int(rng.integers(n))
                if j not in chosen:
                    return j
        pool = [j for j in range(n) if j not in chosen]
        return pool[int(rng.integers(len(pool)))]
    pool = np.array([j for j in range(n) if j not in chosen])
    w = np.asarray(universe.weights)[pool]
    return int(pool[rng.choice(len(pool), p=w / w.sum())])


def _log_pick(j, chosen, universe: RuleUniverse) -> float:
    """log probability that a weighted draw from the unchosen rules returns ``j``."""
    n = len(universe)
    if universe.uniform:
        return -math.log(n - len(chosen))
    w = universe.weights
    rest = math.fsum(w) - math.fsum(w[i] for i in chosen)
    return math.log(w[j]) - math.log(rest)


def propose_neighbor(current: Sequence[int], universe: RuleUniverse, rng) -> Proposal:
    """Draw a neighbor of ``current`` by SWAP, REPLACE, ADD or REMOVE.

    The move type is uniform over the moves that are valid for the current
    length.  Rules for REPLACE and ADD are drawn from the rules not already
    in the list with probability proportional to their weight.
    """
    cur = tuple(current)
    L = len(cur)
    n = len(universe)
    moves = valid_moves(L, n)
    if not moves:
        raise ValueError("no valid move: the rule universe is empty")
    move = moves[int(rng.integers(len(moves)))]
    chosen = set(cur)

    if move == SWAP:
        i = int(rng.integers(L))
        j = int(rng.integers(L - 1))
        j += j >= i
        new = list(cur)
        new[i], new[j] = new[j], new[i]
        lq = math.log(2.0 / (L * (L - 1)))
        return Proposal(tuple(new), move, min(i, j), max(i, j),
                        lq - math.log(len(moves)), lq - math.log(len(moves)))

    if move == REPLACE:
        i = int(rng.integers(L))
        c = _draw_unchosen(chosen, universe, rng)
        new = cur[:i] + (c,) + cur[i + 1:]
        fwd = -math.log(L) + _log_pick(c, chosen, universe)
        rev = -math.log(L) + _log_pick(cur[i], set(new), universe)
        return Proposal(new, move, i, c, fwd - math.log(len(moves)), rev - math.log(len(moves)))

    if move == ADD:
        k = int(rng.integers(L + 1))
        c = _draw_unchosen(chosen, universe, rng)
        new = cur[:k] + (c,) + cur[k:]
        fwd = -math.log(L + 1) + _log_pick(c, chosen, universe) - math.log(len(moves))
        rev = -math.log(L + 1) - math.log(len(valid_moves(L + 1, n)))
        return Proposal(new, move, k, c, fwd, rev)

    i = int(rng.integers(L))
    new = cur[:i] + cur[i + 1:]
    fwd = -math.log(L) - math.log(len(moves))
    rev = (-math.log(L) + _log_pick(cur[i], set(new), universe)
           - math.log(len(valid_moves(L - 1, n))))
    return Proposal(new, move, i, cur[i], fwd, rev)


def log_proposal_probability(new: Sequence[int], old: Sequence[int], universe: RuleUniverse) -> float:
    """``log Q(new | old)`` for the kernel of :func:`propose_neighbor`; ``-inf`` if unreachable."""
    new, old = tuple(new), tuple(old)
    n = len(universe)
    L = len(old)
    moves = valid_moves(L, n)
    if not moves or len(set(new)) != len(new) or any(not 0 <= j < n for j in new):
        return -math.inf
    pick_move = -math.log(len(moves))
    chosen = set(old)
    if len(new) == L + 1 and ADD in moves:
        for k in range(L + 1):
            if new[:k] + new[k + 1:] == old:
                return pick_move - math.log(L + 1) + _log_pick(new[k], chosen, universe)
        return -math.inf
    if len(new) == L - 1 and REMOVE in moves:
        # the same list can arise from removing at most one position
        for i in range(L):
            if old[:i] + old[i + 1:] == new:
                return pick_move - math.log(L)
        return -math.inf
    if len(new) != L or new == old:
        return -math.inf
    diff = [i for i in range(L) if new[i] != old[i]]
    if len(diff) == 2 and SWAP in moves:
        i, j = diff
        if new[i] == old[j] and new[j] == old[i]:
            return pick_move + math.log(2.0 / (L * (L - 1)))
    if len(diff) == 1 and REPLACE in moves:
        i = diff[0]
        if new[i] not in chosen:
            return pick_move - math.log(L) + _log_pick(new[i], chosen, universe)
    return -math.inf


def proposal_probability(new: Sequence[int], old: Sequence[int], universe: RuleUniverse) -> float:
    return math.exp(log_proposal_probability(new, old, universe))


# --- inner continuous problem ----------------------------------------------

LOG_MAX = 50.0
LOG_K_MIN = -50.0


@dataclass(frozen=True)
class InnerOptResult:
    k_star: float
    gamma_star: tuple[float, ...]
    objective: float
    converged: bool
    sweeps: int
    grad_norm: float = 0.0

    def model(self, rule_indices) -> FallingRuleList:
        return FallingRuleList(tuple(rule_indices), self.gamma_star, self.k_star)


def pava_decreasing(values, weights):
    """Weighted least-squares fit of a non-increasing sequence (pool adjacent violators)."""
    blocks = []  # [mean, weight, size]
    for v, w in zip(values, weights):
        blocks.append([float(v), float(w), 1])
        while len(blocks) > 1 and blocks[-2][0] < blocks[-1][0]:
            m2, w2, s2 = blocks.pop()
            m1, w1, s1 = blocks.pop()
            tot = w1 + w2
            blocks.append([(m1 * w1 + m2 * w2) / tot, tot, s1 + s2])
    out = []
    for m, _, s in blocks:
        out.extend([m] * s)
    return np.array(out)


def initial_point(pos, neg):
    """Start in log coordinates ``(log gamma_0, ..., log gamma_{L-1}, log K)``.

    Laplace-smoothed segment rates, made non-increasing with PAVA, mapped to
    odds and then to ratios of adjacent odds.
    """
    pos = np.asarray(pos, dtype=float)
    neg = np.asarray(neg, dtype=float)
    rate = (pos + 1.0) / (pos + neg + 2.0)
    rate = pava_decreasing(rate, pos + neg + 2.0)
    logv = np.log(rate) - np.log1p(-rate)
    x = np.empty_like(logv)
    x[-1] = logv[-1]
    x[:-1] = np.maximum(logv[:-1] - logv[1:], 0.0)
    return x


class _Objective:
    """Log posterior of a fixed rule list as a concave function of log(gamma), log(K).

    Coordinates are ``x = (log gamma_0, ..., log gamma_{L-1}, log K)`` so that
    segment log-odds are reverse cumulative sums of ``x``.
    """

    def __init__(self, pos, neg, H: Hyperparameters, const: float):
        self.pos = np.asarray(pos, dtype=float)
        self.n = self.pos + np.asarray(neg, dtype=float)
        L = len(self.pos) - 1
        ab = [H.gamma_prior(l) for l in range(L)] + [(H.alpha_k, H.beta_k)]
        self.alpha = np.array([a for a, _ in ab])
        self.beta = np.array([b for _, b in ab])
        c = const + float(np.sum(self.alpha * np.log(self.beta) - special.gammaln(self.alpha)))
        c -= sum(_log_upper_mass(float(a), float(b), 1.0) for a, b in ab[:-1])
        self.const = c
        self.lo = np.zeros(L + 1)
        self.lo[-1] = LOG_K_MIN
        self.hi = np.full(L + 1, LOG_MAX)

    def value(self, x):
        r = np.cumsum(x[::-1])[::-1]
        ll = self.pos @ r - self.n @ np.logaddexp(0.0, r)
        pr = (self.alpha - 1.0) @ x - self.beta @ np.exp(x)
        return float(ll + pr + self.const)

    def full(self, x):
        r = np.cumsum(x[::-1])[::-1]
        p = special.expit(r)
        ex = np.exp(x)
        ll = self.pos @ r - self.n @ np.logaddexp(0.0, r)
        f = float(ll + (self.alpha - 1.0) @ x - self.beta @ ex + self.const)
        g = np.cumsum(self.pos - self.n * p) + (self.alpha - 1.0) - self.beta * ex
        c = np.cumsum(self.n * p * (1.0 - p))
        idx = np.arange(len(x))
        hess = -c[np.minimum.outer(idx, idx)]
        hess[idx, idx] -= self.beta * ex
        return f, g, hess

    def projected_gradient(self, x, g):
        pg = g.copy()
        pg[(x <= self.lo) & (g < 0)] = 0.0
        pg[(x >= self.hi) & (g > 0)] = 0.0
        return pg


def optimize_counts(pos, neg, H: Hyperparameters, structure_prior: float = 0.0, *,
                    x0=None, gtol: float = 1e-8, max_sweeps: int = 100) -> InnerOptResult:
    """Maximize the log posterior over ``(K, gamma)`` given per-segment label counts.

    The objective is concave in ``(log K, log gamma)`` with box constraints
    ``log gamma >= 0``.  We run projected Newton steps with an active set for
    coordinates pinned at a bound, backtracking on the objective, and fall
    back to a projected gradient step when Newton fails to improve.
    """
    obj = _Objective(pos, neg, H, structure_prior)
    x = np.clip(initial_point(pos, neg) if x0 is None else np.asarray(x0, dtype=float), obj.lo, obj.hi)
    f, g, hess = obj.full(x)
    converged = False
    it = 0
    for it in range(1, max_sweeps + 1):
        pg = obj.projected_gradient(x, g)
        if np.max(np.abs(pg), initial=0.0) <= gtol:
            converged = True
            it -= 1
            break
        free = pg != 0.0
        d = np.zeros_like(x)
        try:
            d[free] = np.linalg.solve(-hess[np.ix_(free, free)], g[free])
        except np.linalg.LinAlgError:
            d[free] = g[free]
        moved = False
        for direction in (d, pg):
            t = 1.0
            while t > 1e-12:
                xn = np.clip(x + t * direction, obj.lo, obj.hi)
                fn = obj.value(xn)
                if fn >= f + 1e-4 * (g @ (xn - x)) and fn >= f:
                    moved = True
                    break
                t *= 0.5
            if moved:
                break
        if not moved:
            converged = np.max(np.abs(pg)) <= 1e-6
            break
        step = np.max(np.abs(xn - x))
        x = xn
        f, g, hess = obj.full(x)
        if step < 1e-14:
            converged = np.max(np.abs(obj.projected_gradient(x, g))) <= 1e-6
            break
    pg = obj.projected_gradient(x, g)
    ex = np.exp(x)
    ex[:-1] = np.maximum(ex[:-1], 1.0)
    return InnerOptResult(float(ex[-1]), tuple(float(v) for v in ex[:-1]), f, bool(converged), it,
                          float(np.max(np.abs(pg), initial=0.0)))


def inner_objective(pos, neg, H: Hyperparameters, structure_prior: float, k, gamma) -> float:
    """Objective of :func:`optimize_counts` at a given ``(K, gamma)``; ``-inf`` outside support."""
    gamma = np.asarray(gamma, dtype=float)
    if k <= 0 or np.any(gamma < 1.0):
        return -math.inf
    obj = _Objective(pos, neg, H, structure_prior)
    return obj.value(np.append(np.log(gamma), math.log(k)))


def optimize_continuous(rule_indices: Sequence[int], data: BinaryDataset, universe: RuleUniverse,
                        H: Hyperparameters, matrix: RuleMatrix | None = None, **kwargs) -> InnerOptResult:
    """Best ``(K, gamma)`` for a fixed ordered rule list."""
    matrix = matrix or build_rule_matrix(data, universe)
    sp = structure_log_prior(rule_indices, universe, H)
    if sp == -math.inf:
        raise ValueError(f"rule list {tuple(rule_indices)} has zero prior probability")
    pos, neg = segment_counts(matrix.columns, data.labels, rule_indices)
    return optimize_counts(pos, neg, H, sp, **kwargs)


# --- annealing --------------------------------------------------------------

@dataclass(frozen=True)
class AnnealingConfig:
    """Annealing run length and temperature schedule.

    ``schedule="geometric"`` cools from ``t0`` to ``t_final`` by a constant
    factor per step, reaching ``t_final`` on the last step.
    """

    steps: int = 5000
    schedule: str = "constant"
    t0: float = 1.0
    t_final: float = 1.0
    seed: int | None = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.schedule not in ("constant", "geometric"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if not (self.t0 > 0 and self.t_final > 0):
            raise ValueError("temperatures must be positive")
        if self.schedule == "geometric" and not self.t_final < self.t0:
            raise ValueError("geometric schedule needs t_final < t0")

    def temperature(self, t: int) -> float:
        if self.schedule == "constant" or self.steps <= 1:
            return self.t0
        c = (self.t_final / self.t0) ** (1.0 / (self.steps - 1))
        return self.t0 * c ** t


@dataclass
class AnnealTrace:
    energy: np.ndarray
    best_objective: np.ndarray
    accepted: np.ndarray
    moves: list = field(default_factory=list)


@dataclass
class AnnealResult:
    rule_indices: tuple[int, ...]
    inner: InnerOptResult
    trace: AnnealTrace

    @property
    def model(self) -> FallingRuleList:
        return FallingRuleList(self.rule_indices, self.inner.gamma_star, self.inner.k_star)

    @property
    def objective(self) -> float:
        return self.inner.objective

    def __iter__(self):
        return iter((self.model, self.inner, self.trace))


def simulated_annealing(data: BinaryDataset, universe: RuleUniverse, H: Hyperparameters,
                        config: AnnealingConfig = AnnealingConfig(), *,
                        matrix: RuleMatrix | None = None, init: Sequence[int] = (),
                        rng=None, callback: Callable | None = None) -> AnnealResult:
    """Search for the MAP rule list.

    Each step proposes a neighbor and accepts it with probability
    ``min(1, exp(-(E_new - E_old) / T(t)))``.  The best list ever visited is
    returned (earliest one on ties).  ``callback(step, rules, inner)`` is
    called with every state the chain sits in after each step.
    """
    matrix = matrix or build_rule_matrix(data, universe)
    rng = np.random.default_rng(config.seed) if rng is None else rng
    y = data.labels
    cache = {}

    def evaluate(rules):
        res = cache.get(rules)
        if res is None:
            sp = structure_log_prior(rules, universe, H)
            pos, neg = segment_counts(matrix.columns, y, rules)
            res = optimize_counts(pos, neg, H, sp)
            cache[rules] = res
        return res

    cur = tuple(init)
    cur_res = evaluate(cur)
    best, best_res = cur, cur_res
    energy = np.empty(config.steps)
    best_obj = np.empty(config.steps)
    accepted = np.zeros(config.steps, dtype=bool)
    moves = []
    can_move = len(universe) > 0
    for t in range(config.steps):
        if can_move:
            prop = propose_neighbor(cur, universe, rng)
            new_res = evaluate(prop.rules)
            delta = new_res.objective - cur_res.objective  # = E_old - E_new
            temp = config.temperature(t)
            if delta >= 0 or rng.random() < math.exp(delta / temp):
                cur, cur_res = prop.rules, new_res
                accepted[t] = True
                if cur_res.objective > best_res.objective:
                    best, best_res = cur, cur_res
            moves.append(prop.move)
        energy[t] = -cur_res.objective
        best_obj[t] = best_res.objective
        if callback is not None:
            callback(t, cur, cur_res)
    return AnnealResult(best, best_res, AnnealTrace(energy, best_obj, accepted, moves))


def anneal_chains(data: BinaryDataset, universe: RuleUniverse, H: Hyperparameters,
                  config: AnnealingConfig = AnnealingConfig(), chains: int = 1,
                  matrix: RuleMatrix | None = None) -> AnnealResult:
    """Run independent annealing chains and keep the best result.

    Chain ``i`` uses the ``i``-th spawned child of ``SeedSequence(config.seed)``;
    with one chain the seed is used directly.
    """
    matrix = matrix or build_rule_matrix(data, universe)
    if chains == 1:
        return simulated_annealing(data, universe, H, config, matrix=matrix)
    children = np.random.SeedSequence(config.seed).spawn(chains)
    best = None
    for child in children:
        res = simulated_annealing(data, universe, H, config, matrix=matrix,
                                  rng=np.random.default_rng(child))
        if best is None or res.objective > best.objective:
            best = res
    return best
