"""Linear classifiers: one-vs-rest Pegasos SVM and multinomial logistic regression."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import FitError, Standardizer, check_xy, make_rng


@dataclass
class LinearModel:
    kind: str  # "svm" or "logistic"
    classes: np.ndarray
    weights: np.ndarray  # (n_classes, d)
    bias: np.ndarray  # (n_classes,)
    scaler: Standardizer | None = None
    hyper: dict = field(default_factory=dict)

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.weights.shape[1]:
            raise ValueError(f"expected (n, {self.weights.shape[1]}) input, got {X.shape}")
        if self.scaler is not None:
            X = self.scaler.transform(X)
        return X @ self.weights.T + self.bias

    def predict(self, X):
        # np.argmax returns the first maximum, i.e. the lowest class index on ties
        return self.classes[np.argmax(self.decision_function(X), axis=1)]

    def to_dict(self):
        return {
            "kind": self.kind,
            "classes": self.classes.tolist(),
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
            "hyper": dict(self.hyper),
        }

    @classmethod
    def from_dict(cls, d):
        scaler = None if d["scaler"] is None else Standardizer.from_dict(d["scaler"])
        return cls(d["kind"], np.array(d["classes"]), np.array(d["weights"], dtype=float),
                   np.array(d["bias"], dtype=float), scaler, dict(d["hyper"]))


def fit_svm(X, y, lam=1e-3, epochs=100, batch_size=32, seed=0, standardize=True,
            average_from=0.5):
    """One-vs-rest linear SVM trained with mini-batch Pegasos.

    Each class gets an L2-regularised hinge-loss separator; the bias is an
    appended constant feature. Step size at update ``t`` is ``1 / (lam * t)``
    followed by projection onto the ball of radius ``1 / sqrt(lam)``. The
    returned weights average the iterates after the first ``average_from``
    share of updates (0 averages all, 1 keeps only the last iterate).
    """
    X, y, classes = check_xy(X, y)
    scaler = Standardizer.fit(X) if standardize else None
    Z = scaler.transform(X) if scaler is not None else X
    n, d = Z.shape
    Za = np.hstack([Z, np.ones((n, 1))])
    Y = np.where(y[:, None] == classes[None, :], 1.0, -1.0)
    W = np.zeros((classes.size, d + 1))
    rng = make_rng(seed)
    radius = 1.0 / np.sqrt(lam)
    b = max(1, min(batch_size, n))
    total_steps = epochs * -(-n // b)
    start_avg = min(int(average_from * total_steps), total_steps - 1)
    W_sum = np.zeros_like(W)
    t = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, b):
            idx = order[start:start + b]
            t += 1
            eta = 1.0 / (lam * t)
            Xb, Yb = Za[idx], Y[idx]
            active = (Yb * (Xb @ W.T)) < 1.0
            W *= 1.0 - eta * lam
            W += (eta / idx.size) * ((active * Yb).T @ Xb)
            norms = np.linalg.norm(W, axis=1, keepdims=True)
            W *= np.minimum(1.0, radius / np.maximum(norms, 1e-300))
            if t > start_avg:
                W_sum += W
    W = W_sum / (total_steps - start_avg)
    hyper = {"lam": lam, "epochs": epochs, "batch_size": batch_size, "seed": seed,
             "standardize": standardize, "average_from": average_from}
    return LinearModel("svm", classes, W[:, :-1].copy(), W[:, -1].copy(), scaler, hyper)


def predict_svm(model: LinearModel, X):
    return model.predict(X)


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def logistic_loss_grad(W, b, X, Y, lam):
    """Mean multinomial cross-entropy + ``lam/2 * ||W||^2`` and its gradient.

    ``Y`` is one-hot (n, k). Returns ``(loss, dW, db)``.
    """
    n = X.shape[0]
    logits = X @ W.T + b
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -np.sum(Y * logp) / n + 0.5 * lam * np.sum(W * W)
    G = (np.exp(logp) - Y) / n
    return loss, G.T @ X + lam * W, G.sum(axis=0)


def fit_logistic(X, y, lam=1e-4, epochs=300, lr=0.5, seed=0, standardize=True):
    """Multinomial logistic regression by full-batch gradient descent.

    Weights start from N(0, 0.01^2) draws of a seeded generator.
    """
    X, y, classes = check_xy(X, y)
    scaler = Standardizer.fit(X) if standardize else None
    Z = scaler.transform(X) if scaler is not None else X
    Y = (y[:, None] == classes[None, :]).astype(float)
    rng = make_rng(seed)
    W = rng.normal(0, 0.01, (classes.size, Z.shape[1]))
    b = np.zeros(classes.size)
    for _ in range(epochs):
        _, dW, db = logistic_loss_grad(W, b, Z, Y, lam)
        W -= lr * dW
        b -= lr * db
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
        raise FitError("logistic regression diverged")
    hyper = {"lam": lam, "epochs": epochs, "lr": lr, "seed": seed, "standardize": standardize}
    return LinearModel("logistic", classes, W, b, scaler, hyper)


def predict_proba(model: LinearModel, X):
    return _softmax(model.decision_function(X))
