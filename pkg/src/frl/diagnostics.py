"""
Sampler validation by joint-distribution (Geweke) testing.

Two simulators target the same joint law of parameters and labels:

* marginal-conditional: ``theta ~ prior`` then ``(zeta, U, y) ~ model``,
  independently each draw;
* successive-conditional: redraw ``(zeta, U, y)`` given the current
  ``theta``, then apply one full sampler sweep given the new labels.

If the sweep leaves the posterior invariant, any statistic of
``(theta, y)`` has the same mean under both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .mining import build_rule_matrix
from .model import BinaryDataset, Hyperparameters, RuleUniverse, assign_segments
from .sampler import ChainState, sample_augmented_prior, sample_prior, sweep

__all__ = ["STATISTICS", "joint_statistics", "forward_draws", "successive_draws",
           "batch_means_se", "GewekeResult", "geweke_test"]

STATISTICS = ("L", "K", "gamma0", "sum_y")


def joint_statistics(frl, y) -> np.ndarray:
    g0 = frl.gamma[0] if frl.length else 0.0
    return np.array([frl.length, frl.k_default, g0, float(np.sum(y))])


def forward_draws(features, universe: RuleUniverse, H: Hyperparameters, n: int, rng) -> np.ndarray:
    """``n`` independent draws of the statistics from the joint prior."""
    cols = build_rule_matrix(features, universe).columns
    out = np.empty((n, len(STATISTICS)))
    for i in range(n):
        frl = sample_prior(universe, H, rng)
        _, _, y = sample_augmented_prior(frl, assign_segments(cols, frl.rule_indices), rng)
        out[i] = joint_statistics(frl, y)
    return out


def successive_draws(features, universe: RuleUniverse, H: Hyperparameters, n: int, rng) -> np.ndarray:
    """``n`` consecutive states of the successive-conditional simulator."""
    features = np.asarray(features, dtype=bool)
    matrix = build_rule_matrix(features, universe)
    frl = sample_prior(universe, H, rng)
    z = assign_segments(matrix.columns, frl.rule_indices)
    state = ChainState(frl, z, np.zeros(len(z), dtype=np.int64), np.zeros(len(z)))
    out = np.empty((n, len(STATISTICS)))
    for i in range(n):
        zeta, u, y = sample_augmented_prior(state.frl, state.z, rng)
        state = replace(state, u=u, zeta=zeta)
        data = BinaryDataset(features, y)
        state, _ = sweep(state, data, universe, H, matrix, rng)
        out[i] = joint_statistics(state.frl, y)
    return out


def batch_means_se(x, n_batches: int = 50) -> float:
    """Standard error of the mean of a correlated series by non-overlapping batch means."""
    x = np.asarray(x, dtype=float)
    b = x.size // n_batches
    if b < 1:
        raise ValueError("series shorter than the number of batches")
    means = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


@dataclass
class GewekeResult:
    names: tuple
    forward_mean: np.ndarray
    successive_mean: np.ndarray
    z: np.ndarray

    def passed(self, bound: float = 4.0) -> bool:
        return bool(np.all(np.abs(self.z) < bound))


def geweke_test(features, universe: RuleUniverse, H: Hyperparameters, n: int, seed=0,
                n_batches: int = 50) -> GewekeResult:
    ss = np.random.SeedSequence(seed)
    rf, rs = (np.random.Generator(np.random.Philox(s)) for s in ss.spawn(2))
    fw = forward_draws(features, universe, H, n, rf)
    sc = successive_draws(features, universe, H, n, rs)
    se_f = fw.std(axis=0, ddof=1) / math.sqrt(n)
    se_s = np.array([batch_means_se(sc[:, j], n_batches) for j in range(sc.shape[1])])
    z = (fw.mean(axis=0) - sc.mean(axis=0)) / np.sqrt(se_f ** 2 + se_s ** 2)
    return GewekeResult(STATISTICS, fw.mean(axis=0), sc.mean(axis=0), z)
