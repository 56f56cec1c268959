"""Regridding, gap filling, smoothing and day windowing of soil readings."""

from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from itertools import groupby

import numpy as np

from .domain import N_SLOTS, DailyWindow, DomainError
from .ingest import day_start, local_date

log = logging.getLogger(__name__)

WINDOWS_HEADER = ["plant_id", "date", "slot", "moisture", "ec"]


@dataclass(frozen=True)
class PreprocessConfig:
    grid_step: int = 1800
    smoothing_window: int = 20
    max_missing_fraction_per_day: float = 0.5
    utc_offset_hours: float = 0.0

    def __post_init__(self):
        if self.grid_step <= 0:
            raise ValueError("grid_step must be positive")
        if self.smoothing_window < 1:
            raise ValueError("smoothing_window must be >= 1")
        if not 0.0 <= self.max_missing_fraction_per_day <= 1.0:
            raise ValueError("max_missing_fraction_per_day must be in [0, 1]")


@dataclass
class GriddedSeries:
    """A plant's readings on a whole-day aligned grid.

    ``values`` is (n_slots, 2); ``observed`` marks slots holding a real reading
    before gap filling.
    """

    plant_id: str
    first_day: dt.date
    values: np.ndarray
    observed: np.ndarray


@dataclass
class DropReport:
    days_dropped: int = 0
    plants_skipped: list = field(default_factory=list)
    dropped_days: list = field(default_factory=list)

    def to_dict(self):
        return {
            "days_dropped": self.days_dropped,
            "plants_skipped": list(self.plants_skipped),
            "dropped_days": [[p, d.isoformat()] for p, d in self.dropped_days],
        }


def regrid_interpolate(readings, cfg: PreprocessConfig = PreprocessConfig()):
    """Place one plant's readings on the half-hour grid and fill the gaps.

    The grid spans whole local days from the first to the last reading.
    Interior gaps are linearly interpolated between the nearest real slots;
    slots before the first or after the last reading hold the edge value.
    Returns None when fewer than two readings are available.
    """
    if len(readings) < 2:
        pid = readings[0].plant_id if readings else "?"
        log.warning("plant %s has fewer than 2 readings; skipped", pid)
        return None
    slots_per_day = int(round(86400 / cfg.grid_step))
    first_day = local_date(readings[0].timestamp, cfg.utc_offset_hours)
    last_day = local_date(readings[-1].timestamp, cfg.utc_offset_hours)
    origin = day_start(first_day, cfg.utc_offset_hours)
    n = ((last_day - first_day).days + 1) * slots_per_day

    raw = np.full((n, 2), np.nan)
    for r in readings:
        k = int(round((r.timestamp - origin) / cfg.grid_step))
        if 0 <= k < n and np.isnan(raw[k, 0]):
            raw[k] = (r.moisture, r.ec)
    observed = ~np.isnan(raw[:, 0])
    known = np.flatnonzero(observed)
    if known.size < 2:
        log.warning("plant %s has fewer than 2 grid slots; skipped", readings[0].plant_id)
        return None
    slots = np.arange(n)
    # np.interp holds the end values outside the known range
    values = np.column_stack([np.interp(slots, known, raw[known, c]) for c in range(2)])
    return GriddedSeries(readings[0].plant_id, first_day, values, observed)


def moving_average(series, w: int):
    """Trailing mean over the last ``w`` samples, shrinking at the start."""
    if w < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(series, dtype=float)
    if x.shape[0] < 1:
        raise ValueError("series must be non-empty")
    if w == 1:
        return x.copy()
    csum = np.cumsum(np.concatenate([np.zeros((1,) + x.shape[1:]), x]), axis=0)
    idx = np.arange(1, x.shape[0] + 1)
    lo = np.maximum(idx - w, 0)
    counts = (idx - lo).reshape((-1,) + (1,) * (x.ndim - 1))
    out = (csum[idx] - csum[lo]) / counts
    # clamp away rounding drift of the cumulative sum
    return np.clip(out, x.min(axis=0), x.max(axis=0))


def windowize(series: GriddedSeries, cfg: PreprocessConfig = PreprocessConfig(), report=None):
    """Cut a smoothed grid series into per-day windows.

    Days whose pre-interpolation missing fraction exceeds the configured
    threshold are dropped (and recorded in ``report`` if given).
    """
    slots_per_day = int(round(86400 / cfg.grid_step))
    if slots_per_day != N_SLOTS:
        raise ValueError(f"grid step yields {slots_per_day} slots per day, windows need {N_SLOTS}")
    n_days = series.values.shape[0] // N_SLOTS
    out = []
    for d in range(n_days):
        sl = slice(d * N_SLOTS, (d + 1) * N_SLOTS)
        day = series.first_day + dt.timedelta(days=d)
        missing = 1.0 - series.observed[sl].mean()
        if missing > cfg.max_missing_fraction_per_day:
            if report is not None:
                report.days_dropped += 1
                report.dropped_days.append((series.plant_id, day))
            continue
        vals = series.values[sl]
        flags = tuple(bool(np.ptp(vals[:, c]) == 0.0) for c in range(2))
        out.append(DailyWindow(series.plant_id, day, vals, flags))
    return out


def preprocess_plant(readings, cfg: PreprocessConfig = PreprocessConfig(), report=None):
    series = regrid_interpolate(readings, cfg)
    if series is None:
        if report is not None and readings:
            report.plants_skipped.append(readings[0].plant_id)
        return []
    series.values = np.column_stack(
        [moving_average(series.values[:, c], cfg.smoothing_window) for c in range(2)])
    return windowize(series, cfg, report)


def preprocess(readings, cfg: PreprocessConfig = PreprocessConfig()):
    """Full recipe for cleaned readings of many plants.

    Input must be sorted by (plant_id, timestamp) and deduplicated.
    Returns ``(windows, DropReport)`` ordered by (plant_id, date).
    """
    report = DropReport()
    windows = []
    for _, group in groupby(readings, key=lambda r: r.plant_id):
        windows.extend(preprocess_plant(list(group), cfg, report))
    windows.sort(key=lambda w: (w.plant_id, w.date))
    return windows, report


def write_windows_csv(windows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(WINDOWS_HEADER)
    for win in windows:
        d = win.date.isoformat()
        for slot in range(N_SLOTS):
            w.writerow([win.plant_id, d, slot, repr(float(win.values[slot, 0])),
                        repr(float(win.values[slot, 1]))])


def read_windows_csv(fh):
    """Inverse of ``write_windows_csv``.

    A missing channel column is a DomainError (the data cannot feed a model);
    other layout problems are ValueError.
    """
    reader = csv.reader(fh)
    header = [h.strip() for h in next(reader, [])]
    if header != WINDOWS_HEADER:
        missing = [h for h in WINDOWS_HEADER if h not in header]
        if {"moisture", "ec"} & set(missing):
            raise DomainError(f"windows CSV lacks channel column(s): {missing}")
        raise ValueError(f"windows CSV header mismatch; missing columns: {missing or header}")
    rows = {}
    for row in reader:
        if not row:
            continue
        key = (row[0], dt.date.fromisoformat(row[1]))
        buf = rows.setdefault(key, np.full((N_SLOTS, 2), np.nan))
        buf[int(row[2])] = (float(row[3]), float(row[4]))
    out = []
    for (pid, day), vals in sorted(rows.items()):
        if np.isnan(vals).any():
            raise ValueError(f"incomplete window for {pid} on {day}")
        flags = tuple(bool(np.ptp(vals[:, c]) == 0.0) for c in range(2))
        out.append(DailyWindow(pid, day, vals, flags))
    return out
