"""Per-window statistical moment features.

Moments are population (biased) estimates and kurtosis is reported as
excess kurtosis, so a Gaussian sample scores about 0.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

CHANNELS = ("moisture", "ec")


class FeatureSetId(enum.Enum):
    F4 = "f4"
    F2 = "f2"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        return cls(str(text).strip().lower())

    @property
    def metrics(self):
        return ("mean", "std", "skew", "kurt") if self is FeatureSetId.F4 else ("skew", "kurt")

    @property
    def names(self):
        return [f"{ch}_{m}" for ch in CHANNELS for m in self.metrics]


_METRIC_INDEX = {"mean": 0, "std": 1, "skew": 2, "kurt": 3}


@dataclass(frozen=True)
class FeatureVector:
    plant_id: str
    date: object
    values: np.ndarray = field(repr=False)
    degenerate: bool = False


def moments(x):
    """Return ``(mean, std, skewness, excess_kurtosis, degenerate)``.

    Near-constant input (m2 < 1e-12 * (1 + mean**2)) has undefined shape, so
    skewness and kurtosis are reported as 0 and ``degenerate`` is set.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("moments need a 1-D sample of length >= 2")
    mean = x.mean()
    d = x - mean
    m2 = np.mean(d * d)
    if m2 < 1e-12 * (1.0 + mean * mean):
        return float(mean), float(np.sqrt(m2)), 0.0, 0.0, True
    m3 = np.mean(d ** 3)
    m4 = np.mean(d ** 4)
    return float(mean), float(np.sqrt(m2)), float(m3 / m2 ** 1.5), float(m4 / m2 ** 2 - 3.0), False


def moment_matrix(windows):
    """Vectorized moments for an (n, slots, channels) array.

    Returns ``(stats, degenerate)`` with stats shaped (n, channels, 4).
    """
    x = np.asarray(windows, dtype=float)
    mean = x.mean(axis=1)
    d = x - mean[:, None, :]
    m2 = np.mean(d * d, axis=1)
    m3 = np.mean(d ** 3, axis=1)
    m4 = np.mean(d ** 4, axis=1)
    degenerate = m2 < 1e-12 * (1.0 + mean * mean)
    safe = np.where(degenerate, 1.0, m2)
    skew = np.where(degenerate, 0.0, m3 / safe ** 1.5)
    kurt = np.where(degenerate, 0.0, m4 / safe ** 2 - 3.0)
    return np.stack([mean, np.sqrt(m2), skew, kurt], axis=-1), degenerate


def feature_matrix(windows, fset=FeatureSetId.F2):
    """Feature rows for stacked windows, channel-major (moisture then EC)."""
    fset = FeatureSetId.parse(fset)
    stats, degenerate = moment_matrix(windows)
    cols = [_METRIC_INDEX[m] for m in fset.metrics]
    return stats[:, :, cols].reshape(len(stats), -1), degenerate.any(axis=1)


def feature_vector(window, fset=FeatureSetId.F2) -> FeatureVector:
    values, degenerate = feature_matrix(window.values[None], fset)
    return FeatureVector(window.plant_id, window.date, values[0], bool(degenerate[0]))


def write_features_csv(vectors, fset, fh, labels=None):
    """Write one row per vector; ``labels`` optionally maps plant_id -> PlantMeta."""
    fset = FeatureSetId.parse(fset)
    w = csv.writer(fh, lineterminator="\n")
    extra = ["rootstock", "treatment"] if labels is not None else []
    w.writerow(["plant_id", "date"] + fset.names + ["degenerate"] + extra)
    for v in vectors:
        row = [v.plant_id, v.date.isoformat()] + [repr(float(x)) for x in v.values] + [int(v.degenerate)]
        if labels is not None:
            m = labels[v.plant_id]
            row += [m.rootstock.value, m.treatment.value]
        w.writerow(row)
