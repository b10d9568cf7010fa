"""Capacity-indexed regression trees, random forests and L2-boosting.

Trees grow best-first: the leaf whose best split removes the most squared
error (summed over outputs) is split next, until ``max_leaves`` is reached
or no leaf can be split. Depth is unlimited. At each node ``mtry`` candidate
features are drawn at random from those not constant on the node, and every
midpoint between consecutive distinct values is a candidate threshold.
Rows with ``x[f] <= threshold`` go left.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .seeding import derive_seed


@dataclass(frozen=True)
class RegressionTree:
    feature: np.ndarray    # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray      # node mean, n_nodes x K

    @property
    def leaf_count(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def n_outputs(self) -> int:
        return self.value.shape[1]

    def apply(self, X) -> np.ndarray:
        """Index of the leaf each row of X lands in."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while np.any(active):
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active[rows] = self.feature[node[rows]] >= 0
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]


def default_mtry(d: int) -> int:
    return max(1, math.ceil(math.sqrt(d)))


def _best_split(X, Y, rows, features):
    """Best (gain, feature, threshold) over the given features, or None.

    Ties go to the lowest feature index, then the lowest threshold.
    """
    Yr = Y[rows]
    m = rows.shape[0]
    total = Yr.sum(axis=0)
    base = np.sum(total * total) / m
    counts = np.arange(1, m, dtype=np.float64)
    best = None
    for f in features:
        xcol = X[rows, f]
        order = np.argsort(xcol, kind="stable")
        xs = xcol[order]
        left = np.cumsum(Yr[order], axis=0)[:-1]
        right = total - left
        gain = (np.sum(left * left, axis=1) / counts
                + np.sum(right * right, axis=1) / counts[::-1] - base)
        gain[xs[1:] <= xs[:-1]] = -np.inf
        i = int(np.argmax(gain))
        if not np.isfinite(gain[i]):
            continue
        g = max(float(gain[i]), 0.0)
        if best is None or g > best[0]:
            lo, hi = xs[i], xs[i + 1]
            thr = 0.5 * (lo + hi)
            if not lo <= thr < hi:
                thr = lo
            best = (g, int(f), float(thr))
    return best


def fit_tree(X, Y, max_leaves: int, mtry: Optional[int] = None, seed: int = 0) -> RegressionTree:
    """Grow one regression tree with at most ``max_leaves`` leaves.

    A leaf whose rows are identical on every feature cannot be split.
    Zero-gain splits are taken only once no positive-gain split remains, so
    a tree given ``max_leaves = n`` on distinct rows always interpolates.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] == 0:
        raise ValueError("cannot fit a tree to empty data")
    if max_leaves < 1:
        raise ValueError("max_leaves must be at least 1")
    n, d = X.shape
    mtry = default_mtry(d) if mtry is None else int(mtry)
    if not 1 <= mtry <= d:
        raise ValueError(f"mtry must lie in [1, {d}]")
    rng = np.random.default_rng(seed)

    feature, threshold, left, right, value = [-1], [np.nan], [-1], [-1], [Y.mean(axis=0)]
    node_rows = {0: np.arange(n)}

    def candidates(rows):
        if rows.shape[0] < 2:
            return None
        Xr = X[rows]
        varying = np.flatnonzero(Xr.max(axis=0) > Xr.min(axis=0))
        if varying.size == 0:
            return None
        order = rng.permutation(d)
        picked = order[np.isin(order, varying)][:mtry]
        return _best_split(X, Y, rows, np.sort(picked))

    heap = []
    counter = 0
    split = candidates(node_rows[0])
    if split is not None:
        heap.append((-split[0], counter, 0, split))
    leaves = 1
    while heap and leaves < max_leaves:
        _, _, node, (_, f, thr) = heapq.heappop(heap)
        rows = node_rows.pop(node)
        mask = X[rows, f] <= thr
        feature[node], threshold[node] = f, thr
        for child_rows in (rows[mask], rows[~mask]):
            cid = len(feature)
            feature.append(-1)
            threshold.append(np.nan)
            left.append(-1)
            right.append(-1)
            value.append(Y[child_rows].mean(axis=0))
            node_rows[cid] = child_rows
            s = candidates(child_rows)
            if s is not None:
                counter += 1
                heapq.heappush(heap, (-s[0], counter, cid, s))
        left[node], right[node] = len(feature) - 2, len(feature) - 1
        leaves += 1

    return RegressionTree(np.asarray(feature, dtype=np.int64), np.asarray(threshold),
                          np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64),
                          np.vstack(value))


# --------------------------------------------------------------------------
# Forests
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Forest:
    trees: list
    bootstrap: bool = False

    def member_predictions(self, X) -> np.ndarray:
        return np.stack([t.predict(X) for t in self.trees])

    def predict(self, X) -> np.ndarray:
        return self.member_predictions(X).mean(axis=0)


def fit_forest(X, Y, n_tree: int, max_leaves: int, bootstrap: bool = False, seed: int = 0,
               mtry: Optional[int] = None) -> Forest:
    """Average of ``n_tree`` independently randomized trees.

    Without bootstrap every tree sees the full sample (a perfect random tree
    ensemble once ``max_leaves >= n``); with bootstrap each tree gets n rows
    drawn with replacement.
    """
    if n_tree < 1:
        raise ValueError("n_tree must be at least 1")
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    n = X.shape[0]
    trees = []
    for t in range(n_tree):
        tseed = derive_seed(seed, "tree", t)
        if bootstrap:
            rows = np.random.default_rng(derive_seed(tseed, "bootstrap")).integers(0, n, n)
            trees.append(fit_tree(X[rows], Y[rows], max_leaves, mtry, tseed))
        else:
            trees.append(fit_tree(X, Y, max_leaves, mtry, tseed))
    return Forest(trees, bootstrap)


# --------------------------------------------------------------------------
# L2-boosting
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BoostedSequence:
    init: np.ndarray
    trees: list
    shrinkage: float
    train_risk: np.ndarray = field(repr=False)  # squared risk after rounds 0..T

    def predict(self, X, rounds: Optional[int] = None) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.tile(self.init, (X.shape[0], 1))
        for tree in self.trees[:rounds]:
            out += self.shrinkage * tree.predict(X)
        return out


@dataclass(frozen=True)
class BoostedForest:
    forests: list
    shrinkage: float
    trees_per_forest: int

    def predict(self, X) -> np.ndarray:
        return np.mean([f.predict(X) for f in self.forests], axis=0)


def _squared_risk(P, Y) -> float:
    return float(np.mean(np.sum((P - Y) ** 2, axis=1)))


def fit_l2_boost(X, Y, n_tree: int, shrinkage: float, max_leaves: int = 10,
                 mtry: Optional[int] = None, n_forest: int = 1, seed: int = 0) -> BoostedForest:
    """Average of ``n_forest`` independently seeded L2-boosted tree sequences.

    Each sequence starts from the target mean and adds ``shrinkage * tree_t``
    where tree_t is fit to the current residuals.
    """
    if not 0.0 < shrinkage <= 1.0:
        raise ValueError("shrinkage must lie in (0, 1]")
    if n_tree < 1 or n_forest < 1:
        raise ValueError("n_tree and n_forest must be at least 1")
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    forests = []
    for k in range(n_forest):
        fseed = derive_seed(seed, "boost-forest", k)
        init = Y.mean(axis=0)
        fitted = np.tile(init, (X.shape[0], 1))
        risk = [_squared_risk(fitted, Y)]
        trees = []
        for t in range(n_tree):
            tree = fit_tree(X, Y - fitted, max_leaves, mtry, derive_seed(fseed, "round", t))
            fitted = fitted + shrinkage * tree.predict(X)
            trees.append(tree)
            risk.append(_squared_risk(fitted, Y))
        forests.append(BoostedSequence(init, trees, shrinkage, np.asarray(risk)))
    return BoostedForest(forests, shrinkage, n_tree)


def ensemble_capacity(n_members: int, max_leaves: int, trees_per_member: int = 1) -> int:
    """Hybrid capacity index: total leaf budget of the ensemble.

    A single tree is indexed by its leaf budget; averaging members (trees,
    or boosted forests of ``trees_per_member`` trees) multiplies it, so
    ensembles of interpolating trees sort after every single-tree capacity.
    """
    return int(n_members) * int(trees_per_member) * int(max_leaves)
