"""Random forest of Gini-impurity decision trees.

Trees are stored as flat arrays (feature, threshold, left, right, leaf
class) so prediction walks every sample down a tree in lock-step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .base import FitError, child_seeds, make_rng

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # class code predicted at each node (meaningful at leaves)

    def apply(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f != LEAF
            if not inner.any():
                return node
            go_left = X[rows, np.where(inner, f, 0)] <= self.threshold[node]
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)

    def predict_codes(self, X):
        return self.value[self.apply(X)]

    @property
    def n_nodes(self):
        return self.feature.size

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=float),
                   np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                   np.array(d["value"], dtype=np.int64))


def _best_split(X, codes, n_classes, idx, candidates):
    """Best (gini, feature, threshold) over candidate features, or None."""
    n = idx.size
    best = None
    onehot = np.eye(n_classes)[codes[idx]]
    total = onehot.sum(axis=0)
    for f in candidates:
        x = X[idx, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        valid = xs[:-1] < xs[1:]
        if not valid.any():
            continue
        left = np.cumsum(onehot[order], axis=0)[:-1]
        n_left = np.arange(1, n, dtype=float)
        n_right = n - n_left
        right = total - left
        gini_l = 1.0 - ((left / n_left[:, None]) ** 2).sum(axis=1)
        gini_r = 1.0 - ((right / n_right[:, None]) ** 2).sum(axis=1)
        score = (n_left * gini_l + n_right * gini_r) / n
        score = np.where(valid, score, np.inf)
        i = int(np.argmin(score))
        if best is None or score[i] < best[0]:
            lo, hi = xs[i], xs[i + 1]
            thr = lo + (hi - lo) / 2.0
            if not lo <= thr < hi:
                thr = lo
            best = (score[i], int(f), float(thr))
    return best


def build_tree(X, codes, n_classes, rng, max_features, max_depth=None, min_samples_split=2):
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for lst, v in ((feature, LEAF), (threshold, 0.0), (left, LEAF), (right, LEAF), (value, 0)):
            lst.append(v)
        return len(feature) - 1

    d = X.shape[1]
    root = new_node()
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = np.bincount(codes[idx], minlength=n_classes)
        value[node] = int(np.argmax(counts))
        if (np.count_nonzero(counts) <= 1 or idx.size < min_samples_split
                or (max_depth is not None and depth >= max_depth)):
            continue
        order = rng.permutation(d)
        split = _best_split(X, codes, n_classes, idx, order[:max_features])
        if split is None and max_features < d:
            # every sampled feature was constant here; fall back to the rest
            split = _best_split(X, codes, n_classes, idx, order[max_features:])
        if split is None:
            continue
        _, f, thr = split
        mask = X[idx, f] <= thr
        l, r = new_node(), new_node()
        feature[node], threshold[node], left[node], right[node] = f, thr, l, r
        stack.append((r, idx[~mask], depth + 1))
        stack.append((l, idx[mask], depth + 1))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64), np.array(value, dtype=np.int64))


@dataclass
class ForestModel:
    classes: np.ndarray
    trees: list
    n_features: int
    hyper: dict = field(default_factory=dict)

    def predict(self, X):
        """Majority vote over trees; ties go to the lowest class index."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected (n, {self.n_features}) input, got {X.shape}")
        votes = np.zeros((X.shape[0], self.classes.size), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            np.add.at(votes, (rows, tree.predict_codes(X)), 1)
        return self.classes[np.argmax(votes, axis=1)]

    def to_dict(self):
        return {"classes": self.classes.tolist(), "n_features": self.n_features,
                "hyper": dict(self.hyper), "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["classes"]), [Tree.from_dict(t) for t in d["trees"]],
                   int(d["n_features"]), dict(d["hyper"]))


def fit_forest(X, y, n_trees=100, max_depth=None, max_features="sqrt", bootstrap=True,
               min_samples_split=2, seed=0):
    """Bagged Gini trees with ``ceil(sqrt(d))`` random features per split.

    Tree ``i`` draws from its own seeded stream, so the forest does not
    depend on the order trees are built in.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise FitError(f"X must be (n, d) matching y; got {X.shape} and {y.shape}")
    if X.shape[0] < 2:
        raise FitError("need at least two samples")
    if not np.all(np.isfinite(X)):
        raise FitError("features must be finite")
    classes, codes = np.unique(y, return_inverse=True)
    d = X.shape[1]
    m = math.ceil(math.sqrt(d)) if max_features == "sqrt" else int(max_features)
    m = max(1, min(m, d))
    trees = []
    for s in child_seeds(seed, n_trees):
        rng = make_rng(s)
        idx = rng.integers(0, X.shape[0], X.shape[0]) if bootstrap else np.arange(X.shape[0])
        trees.append(build_tree(X[idx], codes[idx], classes.size, rng, m, max_depth, min_samples_split))
    hyper = {"n_trees": n_trees, "max_depth": max_depth, "max_features": m,
             "bootstrap": bootstrap, "min_samples_split": min_samples_split, "seed": seed}
    return ForestModel(classes, trees, d, hyper)


def predict_forest(model: ForestModel, X):
    return model.predict(X)
