"""Metrics, cross-validation, permutation tests, cluster validity, robustness."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .domain import SoilReading
from .learn.base import FitError

log = logging.getLogger(__name__)


class StratificationError(ValueError):
    pass


# -- classification metrics ---------------------------------------------------

def confusion_matrix(y_true, y_pred, n_classes=None):
    """Counts with rows = true class, columns = predicted class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if n_classes is None:
        n_classes = int(max(y_true.max(initial=-1), y_pred.max(initial=-1))) + 1
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def binary_metrics(tp, tn, fp, fn):
    """Accuracy, precision, recall and F1 from the four binary counts.

    Precision (recall) with no predicted (actual) positives is 0; so is F1
    when precision + recall is 0.
    """
    total = tp + tn + fp + fn
    if total <= 0:
        raise ValueError("empty confusion counts")
    accuracy = (tp + tn) / total
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return accuracy, precision, recall, f1


def metrics(cm):
    """Accuracy plus per-class, weighted and macro precision/recall/F1.

    Each class is scored one-vs-rest; weighted averages use the true class
    support, so weighted recall equals accuracy.
    """
    cm = np.asarray(cm, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] == 0:
        raise ValueError("confusion matrix must be square and non-empty")
    total = int(cm.sum())
    if total <= 0:
        raise ValueError("confusion matrix is empty")
    tp = np.diag(cm).astype(float)
    pred_pos = cm.sum(axis=0).astype(float)
    support = cm.sum(axis=1).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(pred_pos > 0, tp / pred_pos, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    weights = support / total
    out = {
        "accuracy": float(tp.sum() / total),
        "per_class": {"precision": precision.tolist(), "recall": recall.tolist(),
                      "f1": f1.tolist(), "support": support.astype(int).tolist()},
        "weighted": {"precision": float(weights @ precision), "recall": float(weights @ recall),
                     "f1": float(weights @ f1)},
        "macro": {"precision": float(precision.mean()), "recall": float(recall.mean()),
                  "f1": float(f1.mean())},
    }
    if cm.shape[0] == 2:
        (tn, fp), (fn, tp1) = cm.tolist()
        a, p, r, f = binary_metrics(tp1, tn, fp, fn)
        out["binary"] = {"accuracy": a, "precision": p, "recall": r, "f1": f}
    return out


@dataclass
class EvalReport:
    confusion: np.ndarray
    scores: dict
    seed: int | None = None
    split: str = ""
    model: str = ""
    p_value: float | None = None
    class_names: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_predictions(cls, y_true, y_pred, n_classes, **kw):
        cm = confusion_matrix(y_true, y_pred, n_classes)
        return cls(cm, metrics(cm), **kw)

    @property
    def accuracy(self):
        return self.scores["accuracy"]

    def to_dict(self):
        return {
            "model": self.model,
            "split": self.split,
            "seed": self.seed,
            "class_names": list(self.class_names),
            "confusion": self.confusion.tolist(),
            "accuracy": self.scores["accuracy"],
            "weighted": self.scores["weighted"],
            "macro": self.scores["macro"],
            "per_class": self.scores["per_class"],
            "p_value": self.p_value,
            "extra": self.extra,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


# -- cross-validation and permutation testing --------------------------------

def stratified_kfold(labels, k=5, seed=0):
    """Split indices into ``k`` folds with per-class counts within one of n_c/k.

    Members of each class are shuffled and dealt round-robin; the dealing
    position carries over between classes so fold sizes stay balanced too.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    classes, counts = np.unique(labels, return_counts=True)
    if counts.size and counts.min() < k:
        raise StratificationError(
            f"class {classes[np.argmin(counts)]!r} has {counts.min()} members, fewer than k={k}")
    rng = np.random.Generator(np.random.PCG64(seed))
    folds = [[] for _ in range(k)]
    pos = 0
    for c in classes:
        members = rng.permutation(np.flatnonzero(labels == c))
        for i, idx in enumerate(members):
            folds[(pos + i) % k].append(idx)
        pos = (pos + members.size) % k
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def cv_accuracy(fit_predict, X, y, k=5, seed=0):
    """Mean held-out accuracy over stratified folds.

    ``fit_predict(X_train, y_train, X_test)`` returns predicted labels.
    """
    y = np.asarray(y)
    folds = stratified_kfold(y, k, seed)
    accs = []
    for test in folds:
        train = np.setdiff1d(np.arange(y.size), test, assume_unique=True)
        pred = fit_predict(X[train], y[train], X[test])
        accs.append(np.mean(np.asarray(pred) == y[test]))
    return float(np.mean(accs))


@dataclass
class PermutationResult:
    observed: float
    p_value: float
    null: np.ndarray
    n_failed: int = 0

    def to_dict(self):
        return {"observed": self.observed, "p_value": self.p_value,
                "n_permutations": int(self.null.size), "n_failed": self.n_failed,
                "null_mean": float(self.null.mean()) if self.null.size else None,
                "null": self.null.tolist()}


def permutation_test(fit_predict, X, y, n_perm=1000, seed=0, k=5, n_jobs=1):
    """Label-shuffling significance test of cross-validated accuracy.

    The observed score is the mean stratified k-fold accuracy on the true
    labels. Each permutation shuffles the labels with its own seeded stream
    and repeats the full cross-validation (folds re-drawn for the shuffled
    labels). ``p = (1 + #{null >= observed}) / (1 + n_perm)``.
    A permutation whose fit fails scores chance level (1 / n_classes).
    """
    if n_perm < 1:
        raise ValueError("n_perm must be >= 1")
    X = np.asarray(X)
    y = np.asarray(y)
    base, *perm_seeds = np.random.SeedSequence(seed).spawn(n_perm + 1)
    cv_seed = int(base.generate_state(1, np.uint64)[0])
    observed = cv_accuracy(fit_predict, X, y, k, cv_seed)
    chance = 1.0 / np.unique(y).size

    def one(ss):
        rng = np.random.Generator(np.random.PCG64(ss))
        yp = rng.permutation(y)
        try:
            return cv_accuracy(fit_predict, X, yp, k, int(rng.integers(2 ** 63))), False
        except (FitError, StratificationError) as exc:
            log.warning("permutation fit failed (%s); scoring chance level", exc)
            return chance, True

    if n_jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(n_jobs) as pool:
            results = list(pool.map(one, perm_seeds))
    else:
        results = [one(ss) for ss in perm_seeds]
    null = np.array([r[0] for r in results])
    failed = sum(r[1] for r in results)
    p = (1 + np.count_nonzero(null >= observed - 1e-12)) / (1 + n_perm)
    return PermutationResult(observed, float(p), null, failed)


# -- cluster validity ---------------------------------------------------------

def _check_clusters(X, labels):
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] != labels.size:
        raise ValueError("X must be (n, d) aligned with labels")
    classes, codes = np.unique(labels, return_inverse=True)
    if classes.size < 2:
        raise ValueError("need at least two clusters")
    return X, codes, classes.size


def silhouette(X, labels):
    """Mean silhouette with Euclidean distance; singleton clusters score 0."""
    X, codes, k = _check_clusters(X, labels)
    diff = X[:, None, :] - X[None, :, :]
    D = np.sqrt((diff ** 2).sum(axis=2))
    onehot = np.eye(k)[codes]
    sums = D @ onehot  # n x k
    sizes = onehot.sum(axis=0)
    own = sizes[codes]
    n = X.shape[0]
    rows = np.arange(n)
    a = np.where(own > 1, sums[rows, codes] / np.maximum(own - 1, 1), 0.0)
    other = sums / sizes
    other[rows, codes] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def chi(X, labels):
    """Calinski-Harabasz index: [tr(B)/(k-1)] / [tr(W)/(n-k)]."""
    X, codes, k = _check_clusters(X, labels)
    n = X.shape[0]
    if n <= k:
        raise ValueError("need more points than clusters")
    grand = X.mean(axis=0)
    tr_b = 0.0
    tr_w = 0.0
    for c in range(k):
        pts = X[codes == c]
        centre = pts.mean(axis=0)
        tr_b += pts.shape[0] * np.sum((centre - grand) ** 2)
        tr_w += np.sum((pts - centre) ** 2)
    if tr_w == 0:
        return float("inf") if tr_b > 0 else 0.0
    return float((tr_b / (k - 1)) / (tr_w / (n - k)))


# -- robustness ---------------------------------------------------------------

def mask_readings(readings, fraction, seed=0):
    """Drop each reading independently with probability ``fraction``."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError("mask fraction must be in [0, 1)")
    if fraction == 0:
        return list(readings)
    rng = np.random.Generator(np.random.PCG64(seed))
    keep = rng.random(len(readings)) >= fraction
    return [r for r, k in zip(readings, keep) if k]


def add_feature_noise(values, sigma, seed=0, scale=None, axis=None):
    """Add N(0, sigma^2) noise on the standardized scale of ``values``.

    ``scale`` is the per-channel standard deviation that defines one unit;
    by default it is taken from ``values`` over every axis except the last.
    """
    x = np.asarray(values, dtype=float)
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return x.copy()
    if scale is None:
        axes = tuple(range(x.ndim - 1)) if axis is None else axis
        scale = x.std(axis=axes)
    rng = np.random.Generator(np.random.PCG64(seed))
    return x + rng.normal(0.0, sigma, x.shape) * scale


def perturb(dataset, mask_fraction=0.0, noise_sigma=0.0, seed=0):
    """Robustness perturbation.

    For soil readings, masking drops raw samples before preprocessing so the
    interpolation refills them; noise is added to each channel in units of
    that channel's standard deviation. For a stacked window or feature array,
    masking does not apply and only the noise is added.
    """
    if not 0.0 <= mask_fraction < 1.0:
        raise ValueError("mask_fraction must be in [0, 1)")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    mask_seed, noise_seed = (int(s.generate_state(1, np.uint64)[0])
                             for s in np.random.SeedSequence(seed).spawn(2))
    if isinstance(dataset, np.ndarray):
        if mask_fraction:
            raise ValueError("masking needs raw readings, not an array")
        return add_feature_noise(dataset, noise_sigma, noise_seed)
    out = mask_readings(dataset, mask_fraction, mask_seed)
    if noise_sigma and out:
        arr = np.array([(r.moisture, r.ec) for r in out])
        noisy = add_feature_noise(arr, noise_sigma, noise_seed)
        out = [SoilReading(r.timestamp, r.plant_id, float(m), float(e))
               for r, (m, e) in zip(out, noisy)]
    return out


def period_stability(predict, periods, n_classes, class_names=(), model="", seed=None):
    """Evaluate one fitted predictor on chronologically ordered test periods.

    ``periods`` is a list of ``(name, X, y)``; empty periods are skipped.
    """
    reports = []
    for name, X, y in periods:
        if len(y) == 0:
            log.warning("period %s is empty; skipped", name)
            continue
        reports.append(EvalReport.from_predictions(y, predict(X), n_classes, seed=seed,
                                                   split=str(name), model=model,
                                                   class_names=list(class_names)))
    return reports
