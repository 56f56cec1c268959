"""Two-level treatment classifier.

Level 1 assigns a daily window to a treatment pair (A: Control/PRR,
B: Salinity/Salinity+PRR) from the raw standardized series. Level 2 holds one
binary model per pair, trained only on that pair's windows using moment
features, and picks the treatment inside the pair chosen by level 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..domain import PAIR_MEMBERS, PAIRS, TREATMENTS, treatment_to_pair
from ..features import FeatureSetId, feature_matrix
from .base import FitError, Standardizer, child_seeds
from .forest import ForestModel, fit_forest
from .knn import KnnModel, fit_knn
from .linear import LinearModel, fit_logistic, fit_svm
from .resnet1d import ResNet1dModel, fit_resnet1d

LEVEL1_KINDS = ("resnet", "logistic")
LEVEL2_KINDS = ("forest", "knn", "svm")

# integer class ids index into domain.TREATMENTS / domain.PAIRS
TREATMENT_PAIR = np.array([PAIRS.index(treatment_to_pair(t)) for t in TREATMENTS])
PAIR_TREATMENTS = {PAIRS.index(p): [TREATMENTS.index(t) for t in PAIR_MEMBERS[p]] for p in PAIRS}


class FlatWindowLogistic:
    """Level-1 fallback: multinomial logistic regression on flattened windows."""

    def __init__(self, model: LinearModel):
        self.model = model

    def predict(self, windows):
        w = np.asarray(windows, dtype=float)
        return self.model.predict(w.reshape(w.shape[0], -1))


def fit_level2(kind, X, y, seed, hyper=None):
    hyper = dict(hyper or {})
    if kind == "forest":
        return fit_forest(X, y, seed=seed, **hyper)
    if kind == "knn":
        return fit_knn(X, y, standardize=True, **hyper)
    if kind == "svm":
        return fit_svm(X, y, seed=seed, **hyper)
    raise ValueError(f"unknown level-2 kind {kind!r}; choose from {LEVEL2_KINDS}")


@dataclass
class HierarchicalModel:
    level1: object
    level2: dict  # pair id -> model over feature vectors
    level1_kind: str = "resnet"
    level2_kind: str = "forest"
    feature_set: FeatureSetId = FeatureSetId.F2
    seed: int = 0
    hyper: dict = field(default_factory=dict)
    # training standard deviations: per window channel, and per pair per feature
    window_scale: np.ndarray = None
    feature_scale: dict = field(default_factory=dict)

    def predict_pairs(self, windows):
        return np.asarray(self.level1.predict(windows))

    def predict_detail(self, windows, noise_sigma=0.0, seed=0):
        """Return ``(pair_ids, treatment_ids)`` for stacked (n, 48, 2) windows.

        ``noise_sigma > 0`` adds Gaussian noise to each level's inputs in
        units of the training standard deviation of that input (robustness
        evaluation); the raw windows are left untouched.
        """
        windows = np.asarray(windows, dtype=float)
        rng = np.random.Generator(np.random.PCG64(seed))
        feats, _ = feature_matrix(windows, self.feature_set)
        if noise_sigma > 0:
            windows = windows + rng.normal(0, noise_sigma, windows.shape) * self.window_scale
        pairs = self.predict_pairs(windows)
        out = np.empty(windows.shape[0], dtype=np.int64)
        for p, model in self.level2.items():
            mask = pairs == p
            if mask.any():
                f = feats[mask]
                if noise_sigma > 0:
                    f = f + rng.normal(0, noise_sigma, f.shape) * self.feature_scale[p]
                out[mask] = model.predict(f)
        return pairs, out

    def predict(self, windows):
        return self.predict_detail(windows)[1]


def fit_hierarchical(windows, treatments, level1="resnet", level2="forest", feature_set="f2",
                     seed=0, level1_hyper=None, level2_hyper=None):
    """Train both levels.

    ``windows`` is (n, 48, 2); ``treatments`` holds indices into
    ``domain.TREATMENTS``. Every pair must be present in the training data.
    """
    windows = np.asarray(windows, dtype=float)
    y = np.asarray(treatments, dtype=np.int64)
    if windows.ndim != 3 or windows.shape[0] != y.size:
        raise FitError("windows must be (n, length, channels) aligned with labels")
    pair_y = TREATMENT_PAIR[y]
    for p in PAIR_TREATMENTS:
        if not np.any(pair_y == p):
            raise FitError(f"pair {PAIRS[p]} absent from training data")
    if level1 not in LEVEL1_KINDS:
        raise ValueError(f"unknown level-1 kind {level1!r}; choose from {LEVEL1_KINDS}")
    fset = FeatureSetId.parse(feature_set)
    s1, s2a, s2b = child_seeds(seed, 3)
    h1 = dict(level1_hyper or {})
    if level1 == "resnet":
        l1 = fit_resnet1d(windows, pair_y, seed=s1, **h1)
    else:
        l1 = FlatWindowLogistic(fit_logistic(windows.reshape(len(windows), -1), pair_y, seed=s1, **h1))
    feats, _ = feature_matrix(windows, fset)
    l2 = {}
    fscale = {}
    for p, s in zip(sorted(PAIR_TREATMENTS), (s2a, s2b)):
        mask = pair_y == p
        if np.unique(y[mask]).size < 2:
            raise FitError(f"pair {PAIRS[p]} needs both of its treatments in training data")
        l2[p] = fit_level2(level2, feats[mask], y[mask], s, level2_hyper)
        fscale[p] = Standardizer.fit(feats[mask]).scale
    hyper = {"level1": h1, "level2": dict(level2_hyper or {})}
    wscale = Standardizer.fit(windows.reshape(-1, windows.shape[2])).scale
    return HierarchicalModel(l1, l2, level1, level2, fset, seed, hyper, wscale, fscale)


def predict_hierarchical(model: HierarchicalModel, windows):
    """Treatment ids for one (48, 2) window or a stack of them."""
    w = np.asarray(windows, dtype=float)
    if w.ndim == 2:
        return int(model.predict(w[None])[0])
    return model.predict(w)


def fit_flat(kind, windows, treatments, feature_set="f2", seed=0, hyper=None):
    """Single-level 4-class baseline on moment features."""
    feats, _ = feature_matrix(np.asarray(windows, dtype=float), feature_set)
    return fit_level2(kind, feats, np.asarray(treatments), seed, hyper)


def predict_flat(model, windows, feature_set="f2"):
    feats, _ = feature_matrix(np.asarray(windows, dtype=float), feature_set)
    return model.predict(feats)


__all__ = [
    "HierarchicalModel", "fit_hierarchical", "predict_hierarchical", "fit_flat", "predict_flat",
    "FlatWindowLogistic", "Standardizer", "ForestModel", "KnnModel", "ResNet1dModel",
]
