"""Shared vocabulary: plant labels, sensor records, day windows, splits."""

from __future__ import annotations

import datetime as dt
import enum
import math
from dataclasses import dataclass, field

import numpy as np

N_SLOTS = 48
N_CHANNELS = 288


class DomainError(ValueError):
    """A value violates the physical or mathematical domain of an operation."""


class Rootstock(enum.Enum):
    THOMAS = "Thomas"
    PP40 = "PP40"
    PP45 = "PP45"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Rootstock":
        for member in cls:
            if member.value.lower() == text.strip().lower():
                return member
        raise DomainError(f"unknown rootstock {text!r}")


class Treatment(enum.Enum):
    CONTROL = "Control"
    SALINITY = "Salinity"
    PRR = "PRR"
    SALINITY_PRR = "SalinityPRR"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Treatment":
        for member in cls:
            if member.value.lower() == text.strip().lower():
                return member
        raise DomainError(f"unknown treatment {text!r}")

    @property
    def has_salinity(self) -> bool:
        return self in (Treatment.SALINITY, Treatment.SALINITY_PRR)

    @property
    def has_prr(self) -> bool:
        return self in (Treatment.PRR, Treatment.SALINITY_PRR)


class PairLabel(enum.Enum):
    PAIR_A = "PairA"
    PAIR_B = "PairB"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, text: str) -> "PairLabel":
        for member in cls:
            if member.value.lower() == text.strip().lower():
                return member
        raise DomainError(f"unknown pair {text!r}")


# Fixed class orderings; integer class ids everywhere are indices into these.
TREATMENTS = tuple(Treatment)
PAIRS = tuple(PairLabel)
PAIR_MEMBERS = {
    PairLabel.PAIR_A: (Treatment.CONTROL, Treatment.PRR),
    PairLabel.PAIR_B: (Treatment.SALINITY, Treatment.SALINITY_PRR),
}


def treatment_to_pair(t: Treatment) -> PairLabel:
    """Control/PRR share pair A; the two salinity treatments share pair B."""
    return PairLabel.PAIR_B if t.has_salinity else PairLabel.PAIR_A


def leaf_ec(r2: float, l: float, a: float) -> float:
    """Leaf conductivity ``l / (r2 * a)``.

    With ``l`` in cm and ``a`` in cm^2 the result is in S/cm.
    """
    for name, value in (("r2", r2), ("l", l), ("a", a)):
        if not (math.isfinite(value) and value > 0):
            raise DomainError(f"{name} must be positive and finite, got {value!r}")
    return l / (r2 * a)


@dataclass(frozen=True)
class PlantMeta:
    plant_id: str
    rootstock: Rootstock
    treatment: Treatment

    @property
    def pair(self) -> PairLabel:
        return treatment_to_pair(self.treatment)


@dataclass(frozen=True, slots=True)
class SoilReading:
    """One soil sample. Physical ranges are checked by ``ingest.range_filter``."""

    timestamp: float
    plant_id: str
    moisture: float
    ec: float

    def __post_init__(self):
        if not (math.isfinite(self.timestamp) and self.timestamp > 0):
            raise DomainError(f"timestamp must be positive, got {self.timestamp!r}")
        if not (math.isfinite(self.moisture) and math.isfinite(self.ec)):
            raise DomainError("moisture and ec must be finite")


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SpectralSample:
    plant_id: str
    session_date: dt.date
    leaf_id: int
    reflectance: np.ndarray = field(repr=False)

    def __post_init__(self):
        r = _frozen(self.reflectance)
        if r.shape != (N_CHANNELS,):
            raise DomainError(f"expected {N_CHANNELS} reflectance values, got {r.shape}")
        if not np.all(np.isfinite(r)) or np.any(r < 0):
            raise DomainError("reflectance must be finite and non-negative")
        object.__setattr__(self, "reflectance", r)


@dataclass(frozen=True)
class DailyWindow:
    """One day of half-hourly (moisture, EC) samples, shape (48, 2)."""

    plant_id: str
    date: dt.date
    values: np.ndarray = field(repr=False)
    degenerate_flags: tuple = (False, False)

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != (N_SLOTS, 2):
            raise DomainError(f"window must be {N_SLOTS}x2, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("window contains non-finite values")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "degenerate_flags", tuple(bool(f) for f in self.degenerate_flags))


@dataclass(frozen=True)
class SplitSpec:
    """Half-open train and test date ranges; training must precede testing."""

    train_period: tuple
    test_period: tuple

    def __post_init__(self):
        (a, b), (c, d) = self.train_period, self.test_period
        if not (a < b and c < d):
            raise DomainError("each period must have start < end")
        if b > c:
            raise DomainError("train period must end at or before the test period starts")

    def in_train(self, day: dt.date) -> bool:
        return self.train_period[0] <= day < self.train_period[1]

    def in_test(self, day: dt.date) -> bool:
        return self.test_period[0] <= day < self.test_period[1]


def stack_windows(windows) -> np.ndarray:
    """Stack windows into an (n, 48, 2) float array."""
    if not windows:
        return np.zeros((0, N_SLOTS, 2))
    return np.stack([w.values for w in windows])
