"""
Frequent-itemset rule mining with FP-Growth.

Items are binary features that take the value 1.  The miner returns every
itemset of size at most ``max_cardinality`` whose support count reaches
``ceil(min_support * N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import BinaryDataset, RuleAntecedent, RuleUniverse

__all__ = ["FPTree", "fp_growth", "mine_rules", "min_support_count", "RuleMatrix", "build_rule_matrix"]


class _Node:
    __slots__ = ("item", "count", "parent", "children", "link")

    def __init__(self, item, parent):
        self.item = item
        self.count = 0
        self.parent = parent
        self.children = {}
        self.link = None


class FPTree:
    """Prefix tree of transactions with per-item header chains.

    Transactions must already be filtered to frequent items and sorted by the
    global item order.
    """

    def __init__(self):
        self.root = _Node(None, None)
        self.heads = {}
        self.tails = {}
        self.counts = {}

    def add(self, items, count=1):
        node = self.root
        for item in items:
            child = node.children.get(item)
            if child is None:
                child = _Node(item, node)
                node.children[item] = child
                if item in self.tails:
                    self.tails[item].link = child
                else:
                    self.heads[item] = child
                self.tails[item] = child
            child.count += count
            self.counts[item] = self.counts.get(item, 0) + count
            node = child

    def nodes(self, item):
        node = self.heads.get(item)
        while node is not None:
            yield node
            node = node.link

    def prefix_paths(self, item):
        """(path from root, count) pairs for every node holding ``item``."""
        for node in self.nodes(item):
            path = []
            up = node.parent
            while up.item is not None:
                path.append(up.item)
                up = up.parent
            path.reverse()
            yield path, node.count


def _conditional_tree(paths, min_count):
    counts = {}
    for path, c in paths:
        for item in path:
            counts[item] = counts.get(item, 0) + c
    tree = FPTree()
    for path, c in paths:
        kept = [i for i in path if counts[i] >= min_count]
        if kept:
            tree.add(kept, c)
    return tree


def fp_growth(transactions, min_count: int, max_size: int):
    """Yield ``(itemset, support)`` for all frequent itemsets up to ``max_size`` items.

    ``transactions`` is an iterable of item collections; items must be
    sortable.  Ties in item frequency are broken by item value so the tree
    shape is deterministic.
    """
    transactions = [list(t) for t in transactions]
    freq = {}
    for t in transactions:
        for item in t:
            freq[item] = freq.get(item, 0) + 1
    frequent = {i for i, c in freq.items() if c >= min_count}
    order = sorted(frequent, key=lambda i: (-freq[i], i))
    rank = {item: k for k, item in enumerate(order)}

    tree = FPTree()
    for t in transactions:
        kept = sorted((i for i in t if i in frequent), key=rank.__getitem__)
        if kept:
            tree.add(kept)

    def grow(tree, suffix):
        # least frequent first, as in the classic bottom-up traversal
        for item in sorted(tree.counts, key=rank.__getitem__, reverse=True):
            support = tree.counts[item]
            if support < min_count:
                continue
            itemset = (item,) + suffix
            yield itemset, support
            if len(itemset) < max_size:
                cond = _conditional_tree(list(tree.prefix_paths(item)), min_count)
                if cond.counts:
                    yield from grow(cond, itemset)

    if max_size >= 1 and min_count >= 0:
        yield from grow(tree, ())


def min_support_count(min_support: float, n: int) -> int:
    # rounding guards against 0.05 * 100 == 5.000000000000001
    return max(1, math.ceil(round(min_support * n, 9)))


def mine_rules(data: BinaryDataset, min_support: float = 0.05, max_cardinality: int = 2,
               weights=None) -> RuleUniverse:
    """Mine the candidate rule universe from ``data``.

    Parameters
    ----------
    data : BinaryDataset
    min_support : float
        Fraction of rows in (0, 1]; converted to a count by ceiling.
    max_cardinality : int
        Largest number of conditions per rule.
    weights : callable, optional
        Maps a mined ``RuleAntecedent`` to a positive selection weight.
        Defaults to uniform weights.

    Returns
    -------
    RuleUniverse
        Rules ordered by cardinality, then lexicographically by feature ids.
    """
    if not 0 < min_support <= 1:
        raise ValueError("min_support must lie in (0, 1]")
    if max_cardinality < 1:
        raise ValueError("max_cardinality must be >= 1")
    min_count = min_support_count(min_support, data.n)
    transactions = [np.flatnonzero(row).tolist() for row in data.features]
    found = {tuple(sorted(s)): c for s, c in fp_growth(transactions, min_count, max_cardinality)}
    keys = sorted(found, key=lambda s: (len(s), s))
    names = data.feature_names
    rules = tuple(RuleAntecedent(k, tuple(names[f] for f in k)) for k in keys)
    w = None if weights is None else tuple(weights(r) for r in rules)
    return RuleUniverse(rules, w, tuple(found[k] for k in keys))


@dataclass(frozen=True, eq=False)
class RuleMatrix:
    """Cached rule applicability for one dataset.

    ``applies[n, j]`` is True iff row ``n`` satisfies rule ``j``.  ``columns``
    is the transposed C-contiguous copy used by the search inner loops.
    """

    applies: np.ndarray
    universe_ref: int
    columns: np.ndarray

    @property
    def n_rules(self) -> int:
        return self.applies.shape[1]


def build_rule_matrix(data: BinaryDataset | np.ndarray, universe: RuleUniverse) -> RuleMatrix:
    X = data.features if isinstance(data, BinaryDataset) else np.asarray(data, dtype=bool)
    n, p = X.shape
    cols = np.ones((len(universe), n), dtype=bool)
    for j, rule in enumerate(universe.rules):
        if rule.feature_ids[-1] >= p:
            raise IndexError(f"rule {j} references feature {rule.feature_ids[-1]} but data has {p} columns")
        for f in rule.feature_ids:
            cols[j] &= X[:, f]
    cols.flags.writeable = False
    applies = cols.T
    return RuleMatrix(applies, id(universe), cols)
