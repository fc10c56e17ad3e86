"""Variance-minimising regression trees and bagged ensembles.

Splits are chosen by exhaustive search over (feature, threshold) pairs,
minimising the summed within-child squared error.  Continuous features split
as ``x <= threshold`` with thresholds at midpoints between consecutive
distinct values.  Categorical features (integer codes) split one category
against the rest; the threshold is the category code.

Equal-cost splits are broken by lowest feature index, then lowest threshold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative tolerance for treating two split costs as equal.
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Tree:
    """Flat array representation; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    categorical: np.ndarray  # per-feature flags used when the tree was grown

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            r, n, f = rows[active], node[active], feat[active]
            x = X[r, f]
            thr = self.threshold[n]
            go_left = np.where(self.categorical[f], x == thr, x <= thr)
            node[r] = np.where(go_left, self.left[n], self.right[n])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
            "categorical": self.categorical.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.intp),
            threshold=np.asarray(d["threshold"], dtype=float),
            left=np.asarray(d["left"], dtype=np.intp),
            right=np.asarray(d["right"], dtype=np.intp),
            value=np.asarray(d["value"], dtype=float),
            n_samples=np.asarray(d["n_samples"], dtype=np.intp),
            categorical=np.asarray(d["categorical"], dtype=bool),
        )


def _continuous_candidates(Xc: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best split per continuous column: (score, threshold) arrays.

    ``score`` is ``S_L^2/n_L + S_R^2/n_R``; larger is better.  Columns with
    no admissible split get ``-inf``.
    """
    m, p = Xc.shape
    order = np.argsort(Xc, axis=0, kind="stable")
    xs = np.take_along_axis(Xc, order, axis=0)
    ys = y[order]
    csum = np.cumsum(ys, axis=0)[:-1]
    total = csum[-1] + ys[-1] if m > 1 else ys[0]
    n_left = np.arange(1, m, dtype=float)[:, None]
    n_right = m - n_left
    score = csum**2 / n_left + (total - csum) ** 2 / n_right
    valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    score = np.where(valid, score, -np.inf)
    best_pos = np.argmax(score, axis=0)  # first max = lowest threshold
    cols = np.arange(p)
    best_score = score[best_pos, cols]
    lo, hi = xs[best_pos, cols], xs[np.minimum(best_pos + 1, m - 1), cols]
    thr = lo + (hi - lo) / 2.0
    thr = np.where(thr >= hi, lo, thr)
    return best_score, thr, score, xs


def _categorical_candidates(codes: np.ndarray, y: np.ndarray, min_leaf: int, n_levels: int):
    """Score of every one-vs-rest split of a coded column, indexed by code."""
    m = y.size
    counts = np.bincount(codes, minlength=n_levels).astype(float)
    sums = np.bincount(codes, weights=y, minlength=n_levels)
    total = y.sum()
    rest = m - counts
    with np.errstate(divide="ignore", invalid="ignore"):
        score = sums**2 / counts + (total - sums) ** 2 / rest
    valid = (counts >= min_leaf) & (rest >= min_leaf)
    return np.where(valid, score, -np.inf)


def best_split(X: np.ndarray, y: np.ndarray, categorical: np.ndarray, n_levels, min_leaf: int = 1):
    """Exhaustive best split of one node.

    Returns ``(feature, threshold, sse)`` or ``None`` when no admissible
    split lowers the node's squared error.
    """
    m = y.size
    if m < 2 * min_leaf:
        return None
    sq = float(np.dot(y, y))
    node_sse = sq - y.sum() ** 2 / m
    tol = TIE_RTOL * max(sq, 1.0)

    candidates = []  # (feature, threshold, score)
    cont = np.flatnonzero(~categorical)
    if cont.size:
        best_score, thr, _, _ = _continuous_candidates(X[:, cont], y, min_leaf)
        for j, s, t in zip(cont, best_score, thr):
            if np.isfinite(s):
                candidates.append((int(j), float(t), float(s)))
    for j in np.flatnonzero(categorical):
        codes = X[:, j].astype(np.intp)
        score = _categorical_candidates(codes, y, min_leaf, n_levels[j])
        if np.isfinite(score).any():
            c = int(np.argmax(score))  # lowest code among exact maxima
            candidates.append((int(j), float(c), float(score[c])))
    if not candidates:
        return None
    top = max(s for _, _, s in candidates)
    if not sq - top < node_sse - tol:
        return None
    # Within tolerance of the best cost: lowest feature, then lowest threshold.
    near = [c for c in candidates if c[2] >= top - tol]
    j, t, s = min(near, key=lambda c: (c[0], c[1]))
    if categorical[j]:
        # ties inside one categorical column: lowest code within tolerance
        codes = X[:, j].astype(np.intp)
        score = _categorical_candidates(codes, y, min_leaf, n_levels[j])
        t = float(np.flatnonzero(score >= top - tol)[0])
        s = float(score[int(t)])
    else:
        t, s = _lowest_continuous_threshold(X[:, j], y, min_leaf, top - tol)
    return j, t, sq - s


def _lowest_continuous_threshold(x, y, min_leaf, floor):
    _, _, score, xs = _continuous_candidates(x[:, None], y, min_leaf)
    pos = int(np.flatnonzero(score[:, 0] >= floor)[0])
    lo, hi = xs[pos, 0], xs[pos + 1, 0]
    t = lo + (hi - lo) / 2.0
    if t >= hi:
        t = lo
    return float(t), float(score[pos, 0])


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    categorical,
    n_levels=None,
    max_depth: int = 5,
    min_samples_leaf: int = 2,
    max_features=None,
    rng=None,
) -> Tree:
    """Grow one tree greedily to ``max_depth`` (root has depth 0).

    ``max_features=None`` searches every feature at every node; an integer
    draws that many candidate features per node from ``rng``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    categorical = np.asarray(categorical, dtype=bool)
    if n_levels is None:
        n_levels = [int(X[:, j].max()) + 1 if categorical[j] else 0 for j in range(X.shape[1])]
    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        count.append(idx.size)
        return len(feature) - 1

    stack = [(np.arange(y.size), 0, None, None)]
    while stack:
        idx, depth, parent, side = stack.pop()
        node = new_node(idx)
        if parent is not None:
            (left if side == "L" else right)[parent] = node
        if depth >= max_depth:
            continue
        if max_features is None or max_features >= X.shape[1]:
            split = best_split(X[idx], y[idx], categorical, n_levels, min_samples_leaf)
        else:
            cols = np.sort(rng.choice(X.shape[1], max_features, replace=False))
            split = best_split(
                X[np.ix_(idx, cols)], y[idx], categorical[cols],
                [n_levels[c] for c in cols], min_samples_leaf,
            )
            if split is not None:
                split = (int(cols[split[0]]),) + split[1:]
        if split is None:
            continue
        j, t, _ = split
        x = X[idx, j]
        mask = x == t if categorical[j] else x <= t
        feature[node], threshold[node] = j, t
        # right pushed first so the left subtree is numbered first
        stack.append((idx[~mask], depth + 1, node, "R"))
        stack.append((idx[mask], depth + 1, node, "L"))

    return Tree(
        feature=np.asarray(feature, dtype=np.intp),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.intp),
        right=np.asarray(right, dtype=np.intp),
        value=np.asarray(value, dtype=float),
        n_samples=np.asarray(count, dtype=np.intp),
        categorical=categorical.copy(),
    )


def grow_forest(
    X,
    y,
    categorical,
    n_levels=None,
    n_trees: int = 50,
    max_depth: int = 5,
    min_samples_leaf: int = 2,
    bootstrap: bool = True,
    max_features=None,
    seed: int = 0,
) -> list:
    """Bag ``n_trees`` trees, each on an n-out-of-n resample.

    Every tree draws from its own generator spawned from ``seed``, so the
    result does not depend on the order in which trees are built.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    categorical = np.asarray(categorical, dtype=bool)
    if n_levels is None:
        n_levels = [int(X[:, j].max()) + 1 if categorical[j] else 0 for j in range(X.shape[1])]
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        idx = rng.integers(0, y.size, y.size) if bootstrap else np.arange(y.size)
        trees.append(
            grow_tree(
                X[idx], y[idx], categorical, n_levels, max_depth, min_samples_leaf,
                max_features=max_features, rng=rng,
            )
        )
    return trees
