"""CSV parsing, deduplication, range filtering and period slicing.

Formats (comma separated, ``\\n`` line endings, ISO-8601 times, ``.`` decimals)::

    soil:     timestamp,plant_id,moisture,ec
    spectral: session_date,plant_id,leaf_id,r0,...,r287
    labels:   plant_id,rootstock,treatment
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

from .domain import (
    N_CHANNELS,
    DomainError,
    PlantMeta,
    Rootstock,
    SoilReading,
    SpectralSample,
    Treatment,
)

log = logging.getLogger(__name__)

SOIL_HEADER = ["timestamp", "plant_id", "moisture", "ec"]
SPECTRAL_HEADER = ["session_date", "plant_id", "leaf_id"] + [f"r{i}" for i in range(N_CHANNELS)]
LABELS_HEADER = ["plant_id", "rootstock", "treatment"]


class FormatError(ValueError):
    """Input file does not follow the expected CSV layout."""


@dataclass
class IngestReport:
    accepted: int = 0
    rejected_out_of_range: int = 0
    rejected_malformed: int = 0
    duplicates_dropped: int = 0

    @property
    def total(self) -> int:
        return (self.accepted + self.rejected_out_of_range
                + self.rejected_malformed + self.duplicates_dropped)

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected_out_of_range": self.rejected_out_of_range,
            "rejected_malformed": self.rejected_malformed,
            "duplicates_dropped": self.duplicates_dropped,
        }


@dataclass(frozen=True)
class RangeSpec:
    """Inclusive nominal bounds per channel. EC in uS/cm."""

    moisture_min: float = 0.0
    moisture_max: float = 100.0
    ec_min: float = 0.0
    ec_max: float = 20000.0

    def __post_init__(self):
        if not (self.moisture_min < self.moisture_max and self.ec_min < self.ec_max):
            raise DomainError("range bounds must satisfy min < max")

    def contains(self, r: SoilReading) -> bool:
        return (self.moisture_min <= r.moisture <= self.moisture_max
                and self.ec_min <= r.ec <= self.ec_max)


# -- time helpers -------------------------------------------------------------

def parse_timestamp(text: str) -> float:
    """ISO-8601 -> UTC epoch seconds. Naive times are taken as UTC."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    stamp = dt.datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=dt.timezone.utc)
    return stamp.timestamp()


def format_timestamp(seconds: float) -> str:
    stamp = dt.datetime.fromtimestamp(seconds, tz=dt.timezone.utc)
    return stamp.strftime("%Y-%m-%dT%H:%M:%SZ")


def local_date(seconds: float, utc_offset_hours: float = 0.0) -> dt.date:
    """Calendar date of a UTC timestamp in a fixed-offset zone."""
    return (dt.datetime.fromtimestamp(seconds, tz=dt.timezone.utc)
            + dt.timedelta(hours=utc_offset_hours)).date()


def day_start(day: dt.date, utc_offset_hours: float = 0.0) -> float:
    """UTC epoch seconds of local midnight for ``day``."""
    midnight = dt.datetime(day.year, day.month, day.day, tzinfo=dt.timezone.utc)
    return midnight.timestamp() - utc_offset_hours * 3600.0


# -- parsing ------------------------------------------------------------------

def _text_stream(stream):
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(stream.decode("utf-8"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8", newline="")


def _read_header(reader, expected, what):
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError(f"{what} CSV is empty (missing header)") from None
    header = [h.strip() for h in header]
    if header != expected:
        shown = ",".join(header[:6]) + (",..." if len(header) > 6 else "")
        raise FormatError(f"bad {what} CSV header: {shown!r}")


def _float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("non-finite")
    return value


def parse_soil_csv(stream):
    """Parse soil readings. Unparseable rows are counted, not fatal.

    Returns ``(readings, report)`` with readings sorted by (plant_id, timestamp).
    """
    reader = csv.reader(_text_stream(stream))
    _read_header(reader, SOIL_HEADER, "soil")
    report = IngestReport()
    readings = []
    for row in reader:
        if not row:
            continue
        try:
            if len(row) != 4 or not row[1].strip():
                raise ValueError("wrong field count")
            readings.append(SoilReading(parse_timestamp(row[0]), row[1].strip(),
                                        _float(row[2]), _float(row[3])))
        except (ValueError, DomainError):
            report.rejected_malformed += 1
    readings.sort(key=lambda r: (r.plant_id, r.timestamp))
    report.accepted = len(readings)
    return readings, report


def parse_spectral_csv(stream):
    """Parse leaf spectra; rows without exactly 288 channels are malformed."""
    reader = csv.reader(_text_stream(stream))
    _read_header(reader, SPECTRAL_HEADER, "spectral")
    report = IngestReport()
    samples = []
    for row in reader:
        if not row:
            continue
        try:
            if len(row) != 3 + N_CHANNELS:
                raise ValueError("wrong field count")
            day = dt.date.fromisoformat(row[0].strip())
            values = [_float(v) for v in row[3:]]
            leaf = int(row[2])
            plant = row[1].strip()
            if not plant:
                raise ValueError("empty plant id")
        except ValueError:
            report.rejected_malformed += 1
            continue
        if min(values) < 0:
            report.rejected_out_of_range += 1
            continue
        samples.append(SpectralSample(plant, day, leaf, values))
    samples.sort(key=lambda s: (s.plant_id, s.session_date, s.leaf_id))
    report.accepted = len(samples)
    return samples, report


def parse_labels_csv(stream):
    """Parse ``plant_id,rootstock,treatment``; any bad row is fatal."""
    reader = csv.reader(_text_stream(stream))
    _read_header(reader, LABELS_HEADER, "labels")
    metas = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise FormatError(f"labels line {lineno}: expected 3 fields")
        metas.append(PlantMeta(row[0].strip(), Rootstock.parse(row[1]), Treatment.parse(row[2])))
    return metas


# -- writers ------------------------------------------------------------------

def write_soil_csv(readings, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SOIL_HEADER)
    for r in readings:
        w.writerow([format_timestamp(r.timestamp), r.plant_id, repr(r.moisture), repr(r.ec)])


def write_spectral_csv(samples, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SPECTRAL_HEADER)
    for s in samples:
        w.writerow([s.session_date.isoformat(), s.plant_id, s.leaf_id]
                   + [repr(float(v)) for v in s.reflectance])


def write_labels_csv(metas, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(LABELS_HEADER)
    for m in metas:
        w.writerow([m.plant_id, m.rootstock.value, m.treatment.value])


# -- cleaning -----------------------------------------------------------------

def dedup(readings):
    """Keep the first reading per (plant_id, timestamp). Input must be sorted."""
    out = []
    seen = None
    for r in readings:
        key = (r.plant_id, r.timestamp)
        if key == seen:
            continue
        seen = key
        out.append(r)
    return out, len(readings) - len(out)


def range_filter(readings, spec: RangeSpec = RangeSpec()):
    kept = [r for r in readings if spec.contains(r)]
    return kept, len(readings) - len(kept)


def ingest_soil(stream, spec: RangeSpec = RangeSpec()):
    """Parse, range-check and deduplicate a soil CSV in one pass.

    Range filtering runs before deduplication so that an out-of-range first
    copy does not shadow a valid retransmission.
    """
    readings, report = parse_soil_csv(stream)
    readings, report.rejected_out_of_range = range_filter(readings, spec)
    readings, report.duplicates_dropped = dedup(readings)
    report.accepted = len(readings)
    return readings, report


def slice_periods(readings, boundaries, utc_offset_hours: float = 0.0):
    """Split readings into half-open date periods ``[b_i, b_{i+1})``.

    Readings outside ``[b_0, b_last)`` are excluded.
    """
    boundaries = list(boundaries)
    if len(boundaries) < 2:
        raise ValueError("need at least two boundaries")
    if any(b >= c for b, c in zip(boundaries, boundaries[1:])):
        raise ValueError("period boundaries must be strictly increasing")
    periods = [[] for _ in boundaries[:-1]]
    for r in readings:
        day = local_date(r.timestamp, utc_offset_hours) if isinstance(r, SoilReading) else _record_date(r)
        for i in range(len(periods)):
            if boundaries[i] <= day < boundaries[i + 1]:
                periods[i].append(r)
                break
    return periods


def _record_date(record):
    for attr in ("date", "session_date"):
        if hasattr(record, attr):
            return getattr(record, attr)
    raise TypeError(f"cannot determine date of {type(record).__name__}")


class Labeled(NamedTuple):
    record: object
    rootstock: Rootstock
    treatment: Treatment


def index_metas(metas):
    """Map plant_id -> PlantMeta; duplicate ids are fatal."""
    index = {}
    for m in metas:
        if m.plant_id in index:
            raise DomainError(f"duplicate plant_id {m.plant_id!r} in labels")
        index[m.plant_id] = m
    return index


def join_labels(records, metas):
    """Attach rootstock/treatment from the design table.

    Returns ``(labeled, dropped)``; records with unknown plant ids are dropped.
    """
    index = index_metas(metas)
    labeled = []
    for rec in records:
        meta = index.get(rec.plant_id)
        if meta is None:
            continue
        labeled.append(Labeled(rec, meta.rootstock, meta.treatment))
    dropped = len(records) - len(labeled)
    if dropped:
        log.warning("dropped %d records with unlabeled plant ids", dropped)
    return labeled, dropped
