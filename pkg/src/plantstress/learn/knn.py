from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import FitError, Standardizer


@dataclass
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    classes: np.ndarray
    k: int = 5
    scaler: Standardizer | None = None
    hyper: dict = field(default_factory=dict)

    def predict(self, Q, chunk=512):
        """Majority vote of the k Euclidean-nearest training points.

        Vote ties go to the class with the smaller mean distance among its
        voters, then to the lowest class index. Distance ties at the k-th
        neighbour keep the earlier training row.
        """
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[1] != self.X.shape[1]:
            raise ValueError(f"expected (n, {self.X.shape[1]}) input, got {Q.shape}")
        if self.scaler is not None:
            Q = self.scaler.transform(Q)
        codes = np.searchsorted(self.classes, self.y)
        n_cls = self.classes.size
        out = np.empty(Q.shape[0], dtype=self.classes.dtype)
        for s in range(0, Q.shape[0], chunk):
            q = Q[s:s + chunk]
            d2 = ((q[:, None, :] - self.X[None, :, :]) ** 2).sum(axis=2)
            nn = np.argsort(d2, axis=1, kind="stable")[:, :self.k]
            dist = np.sqrt(np.take_along_axis(d2, nn, axis=1))
            onehot = np.eye(n_cls)[codes[nn]]  # q x k x classes
            votes = onehot.sum(axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                mean_d = (onehot * dist[:, :, None]).sum(axis=1) / votes
            best = votes == votes.max(axis=1, keepdims=True)
            mean_d = np.where(best, mean_d, np.inf)
            closest = mean_d == mean_d.min(axis=1, keepdims=True)
            out[s:s + chunk] = self.classes[np.argmax(closest & best, axis=1)]
        return out

    def to_dict(self):
        return {"X": self.X.tolist(), "y": self.y.tolist(), "classes": self.classes.tolist(),
                "k": self.k, "scaler": None if self.scaler is None else self.scaler.to_dict(),
                "hyper": dict(self.hyper)}

    @classmethod
    def from_dict(cls, d):
        scaler = None if d["scaler"] is None else Standardizer.from_dict(d["scaler"])
        return cls(np.array(d["X"], dtype=float), np.array(d["y"]), np.array(d["classes"]),
                   int(d["k"]), scaler, dict(d["hyper"]))


def fit_knn(X, y, k=5, standardize=False):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise FitError("X must be a non-empty (n, d) array matching y")
    if not 1 <= k <= X.shape[0]:
        raise FitError(f"k must be in [1, {X.shape[0]}], got {k}")
    scaler = Standardizer.fit(X) if standardize else None
    Xs = scaler.transform(X) if scaler is not None else X
    return KnnModel(Xs, y.copy(), np.unique(y), k, scaler, {"k": k, "standardize": standardize})


def predict_knn(model: KnnModel, X):
    return model.predict(X)
