"""Repeated-run inference benchmark: wall time, process CPU share, peak memory.

Each benchmark runs one untimed warm-up pass over the whole test set, then
``repeats`` timed passes. Inference is pinned to one BLAS thread. Peak
memory is the tracemalloc high-water mark of Python/numpy allocations made
during a timed pass. Power draw needs an external meter and is reported as
not measured.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import statistics
import time
import tracemalloc
from dataclasses import asdict, dataclass

import numpy as np
from threadpoolctl import threadpool_limits

UNSTABLE_CV = 0.20


@dataclass
class BenchReport:
    model: str
    n_windows: int
    window_shape: list
    repeats: int
    wall_mean: float
    wall_min: float
    wall_max: float
    wall_std: float
    wall_cv: float
    unstable: bool
    per_window_latency: float
    cpu_utilization: float
    peak_memory: int | None
    memory_source: str
    prediction_hash: str
    hashes_identical: bool
    power: str = "not measured"

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def prediction_hash(pred) -> str:
    arr = np.ascontiguousarray(np.asarray(pred))
    return hashlib.sha256(arr.dtype.str.encode() + arr.tobytes()).hexdigest()


def bench_model(predict, windows, repeats=20, name="model", measure_memory=True):
    """Benchmark ``predict(windows)`` over the full window set.

    Raises whatever ``predict`` raises. Timing varies between repeats but the
    predictions must not; ``hashes_identical`` records whether they matched.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    windows = np.asarray(windows)
    if windows.shape[0] < 1:
        raise ValueError("need at least one window")
    walls, cpus, hashes = [], [], []
    peak = None
    with threadpool_limits(limits=1):
        hashes.append(prediction_hash(predict(windows)))  # warm-up, untimed
        for _ in range(repeats):
            w0, c0 = time.perf_counter(), time.process_time()
            pred = predict(windows)
            walls.append(time.perf_counter() - w0)
            cpus.append(time.process_time() - c0)
            hashes.append(prediction_hash(pred))
        if measure_memory:
            # separate traced pass: tracing overhead must not pollute the timings
            tracemalloc.start()
            try:
                predict(windows)
                peak = tracemalloc.get_traced_memory()[1]
            finally:
                tracemalloc.stop()
    mean = statistics.fmean(walls)
    std = statistics.pstdev(walls) if len(walls) > 1 else 0.0
    cv = std / mean if mean > 0 else 0.0
    return BenchReport(
        model=name,
        n_windows=int(windows.shape[0]),
        window_shape=list(windows.shape[1:]),
        repeats=repeats,
        wall_mean=mean,
        wall_min=min(walls),
        wall_max=max(walls),
        wall_std=std,
        wall_cv=cv,
        unstable=cv > UNSTABLE_CV,
        per_window_latency=mean / windows.shape[0],
        cpu_utilization=100.0 * sum(cpus) / sum(walls) if sum(walls) > 0 else 0.0,
        peak_memory=peak,
        memory_source="tracemalloc" if peak is not None else "unavailable",
        prediction_hash=hashes[0],
        hashes_identical=len(set(hashes)) == 1,
    )


COMPARE_FIELDS = ["rank", "model", "n_windows", "per_window_latency", "wall_mean", "wall_cv",
                  "cpu_utilization", "peak_memory", "memory_source", "power"]


def compare(reports):
    """Rank reports by per-window latency; returns ``(rows, csv_text, json_text)``.

    A missing memory measurement is shown as "unavailable", never as zero.
    """
    if len(reports) < 2:
        raise ValueError("compare needs at least two reports")
    rows = []
    for rank, r in enumerate(sorted(reports, key=lambda r: r.per_window_latency), start=1):
        d = r.to_dict()
        row = {k: d.get(k) for k in COMPARE_FIELDS if k != "rank"}
        row["rank"] = rank
        if row["peak_memory"] is None:
            row["peak_memory"] = "unavailable"
        rows.append(row)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COMPARE_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return rows, buf.getvalue(), json.dumps(rows, indent=2, sort_keys=True) + "\n"
