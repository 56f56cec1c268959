from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FitError(ValueError):
    """Training data cannot support the requested model."""


@dataclass
class Standardizer:
    """Per-column z-scoring with statistics frozen at fit time."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X, axis=0):
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=axis)
        scale = X.std(axis=axis)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def to_dict(self):
        return {"mean": np.asarray(self.mean).tolist(), "scale": np.asarray(self.scale).tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["mean"], dtype=float), np.array(d["scale"], dtype=float))


def check_xy(X, y, min_classes=2):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise FitError(f"X must be (n, d) matching y; got {X.shape} and {y.shape}")
    if not np.all(np.isfinite(X)):
        raise FitError("features must be finite")
    classes = np.unique(y)
    if classes.size < min_classes:
        raise FitError(f"need at least {min_classes} classes, got {classes.size}")
    return X, y, classes


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def child_seeds(seed, n):
    """Independent integer seeds derived from one parent seed."""
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(n)]
