"""Outage event extraction, resilience metrics and peak weather features.

Bins are grid indices. Spans are half-open ``(start, end)`` index pairs, so
an event covers bins ``start .. end - 1`` and ``end`` is the first bin
back below the threshold (or the series length for a censored event).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError
from .timegrid import STEP, STEP_MINUTES, TimeGrid, format_number, format_time

BIN_HOURS = STEP_MINUTES / 60.0
TABLE_COLUMNS = (
    "event_id", "peak_wind_gust", "peak_air_temp", "precip_flag",
    "auc_customer_hours", "norm_customers_out",
)


def _group(active: np.ndarray, gap_bins: int) -> list[tuple[int, int]]:
    """Group active bins whose successive distance is below ``gap_bins``.

    Returns ``(first, last + 1)`` per group.
    """
    idx = np.flatnonzero(active)
    if not len(idx):
        return []
    breaks = np.flatnonzero(np.diff(idx) >= gap_bins)
    firsts = np.r_[idx[0], idx[breaks + 1]]
    lasts = np.r_[idx[breaks], idx[-1]]
    return [(int(a), int(b) + 1) for a, b in zip(firsts, lasts)]


def gap_bins(gap_hours: float) -> int:
    """Smallest bin distance that counts as a break: ``d * 15 min >= gap``."""
    if not gap_hours > 0:
        raise ConfigError(f"gap_hours must be > 0, got {gap_hours}")
    return int(np.ceil(gap_hours * 60 / STEP_MINUTES - 1e-9))


def group_pre_events(outages: np.ndarray, gap_hours: float = 3.0) -> list[tuple[int, int]]:
    """Maximal spans of nonzero activity with internal gaps under ``gap_hours``.

    Two nonzero bins ``i < j`` with only zeros between them share a span
    when ``(j - i) * 15 min < gap_hours``.
    """
    return _group(np.asarray(outages) > 0, gap_bins(gap_hours))


@dataclass
class OutageEvent:
    start_index: int
    end_index: int
    start: datetime
    end: datetime
    curve: np.ndarray
    censored: bool = False
    left_censored: bool = False
    auc_customer_hours: float | None = None
    peak_customers_out: int | None = None
    norm_customers_out: float | None = None
    cumulative_customers_out: int | None = None
    peak_wind_gust: float | None = None
    peak_air_temp: float | None = None
    precip_flag: int | None = None

    @property
    def n_bins(self) -> int:
        return self.end_index - self.start_index

    def curve_points(self) -> list[tuple[datetime, float]]:
        return [(self.start + k * STEP, float(v)) for k, v in enumerate(self.curve)]


def filter_significant(spans: Sequence[tuple[int, int]], outages: np.ndarray, grid_start: datetime,
                       magnitude: float = 50, gap_hours: float = 3.0) -> list[OutageEvent]:
    """Threshold excursions inside each pre-event.

    A bin is above threshold when ``customers_out > magnitude``. Within a
    span, above-threshold bins closer than ``gap_hours`` merge into one
    event, which starts at its first above-threshold bin and ends at the
    first bin back at or below the threshold. An event still above the
    threshold at the end of the series is closed there and flagged
    ``censored``; one above threshold at bin 0 is flagged ``left_censored``.
    """
    if not magnitude >= 0:
        raise ConfigError(f"magnitude threshold must be >= 0, got {magnitude}")
    outages = np.asarray(outages, dtype=float)
    gap = gap_bins(gap_hours)
    events = []
    for lo, hi in spans:
        above = outages[lo:hi] > magnitude
        for a, b in _group(above, gap):
            s, e = lo + a, lo + b
            # ``e`` is one past the last above-threshold bin, which lies
            # inside the span, so it is the first bin back below unless the
            # series has ended.
            events.append(OutageEvent(
                start_index=s,
                end_index=e,
                start=grid_start + s * STEP,
                end=grid_start + e * STEP,
                curve=outages[s:e].copy(),
                censored=e == len(outages),
                left_censored=s == 0,
            ))
    return events


def extract_events(outages: np.ndarray, grid_start: datetime, magnitude: float = 50,
                   gap_hours: float = 3.0) -> list[OutageEvent]:
    spans = group_pre_events(outages, gap_hours)
    return filter_significant(spans, outages, grid_start, magnitude, gap_hours)


def auc_customer_hours(curve) -> float:
    """Left-step integral of a 15-minute curve, in customer-hours.

    Counts are integers, so the sum is exact; one multiplication by 0.25
    (a power of two) keeps it exact.
    """
    counts = np.asarray(curve, dtype=np.float64)
    if np.all(counts == np.round(counts)):
        total = float(int(np.sum(counts.astype(np.int64))))
    else:
        total = math.fsum(counts.tolist())
    return total * BIN_HOURS


def compute_metrics(event: OutageEvent, county_total_customers: int, measure: str = "peak") -> OutageEvent:
    """Fill AUC, peak, normalised customer-out and cumulative count in place.

    ``measure`` selects what ``norm_customers_out`` normalises: the peak
    concurrent count (default) or the cumulative count.
    """
    if not county_total_customers > 0:
        raise ConfigError(f"county_total_customers must be > 0, got {county_total_customers}")
    if measure not in ("peak", "cumulative"):
        raise ConfigError(f"customer-out measure must be 'peak' or 'cumulative', got {measure!r}")
    curve = event.curve
    event.auc_customer_hours = auc_customer_hours(curve)
    peak = int(np.max(curve)) if len(curve) else 0
    event.peak_customers_out = peak
    # Sum of the positive increments: customers newly out, counting
    # re-outages again. A sensitivity variant of the peak measure.
    rises = np.diff(np.r_[0.0, curve])
    event.cumulative_customers_out = int(np.sum(rises[rises > 0]))
    count = peak if measure == "peak" else event.cumulative_customers_out
    event.norm_customers_out = count / county_total_customers
    return event


def attach_weather_features(event: OutageEvent, weather: TimeGrid, temperature: str = "max") -> OutageEvent:
    """Peak gust, peak (or minimum) temperature and precipitation flag over the event bins."""
    lo, hi = event.start_index, event.end_index
    if lo < 0 or hi > weather.length or hi <= lo:
        first = weather.start
        last = weather.timestamp(weather.length)
        raise DataError(
            f"weather grid {first:%Y-%m-%d %H:%M}..{last:%Y-%m-%d %H:%M} does not cover "
            f"event {event.start:%Y-%m-%d %H:%M}..{event.end:%Y-%m-%d %H:%M}"
        )
    if temperature not in ("max", "min"):
        raise ConfigError(f"temperature feature must be 'max' or 'min', got {temperature!r}")
    s = weather.series
    event.peak_wind_gust = float(np.max(s["wind_gust"][lo:hi]))
    temps = s["air_temp"][lo:hi]
    event.peak_air_temp = float(np.max(temps) if temperature == "max" else np.min(temps))
    event.precip_flag = int(np.any(s["precip_occ"][lo:hi] > 0))
    return event


@dataclass
class EventFeatureTable:
    """Regression dataset: one row per significant event."""

    event_id: np.ndarray
    peak_wind_gust: np.ndarray
    peak_air_temp: np.ndarray
    precip_flag: np.ndarray
    auc_customer_hours: np.ndarray
    norm_customers_out: np.ndarray
    extra: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.event_id)
        for name in TABLE_COLUMNS + tuple(self.extra):
            col = self[name]
            if len(col) != n:
                raise ValueError(f"column {name!r} has {len(col)} rows, expected {n}")
            if name != "event_id" and not np.all(np.isfinite(np.asarray(col, dtype=float))):
                raise DataError(f"column {name!r} has missing or non-finite cells")

    def __len__(self) -> int:
        return len(self.event_id)

    def __getitem__(self, name: str) -> np.ndarray:
        if name in TABLE_COLUMNS:
            return getattr(self, name)
        if name in self.extra:
            return self.extra[name]
        raise KeyError(name)

    @property
    def columns(self) -> tuple[str, ...]:
        return TABLE_COLUMNS + tuple(self.extra)

    def take(self, rows) -> "EventFeatureTable":
        rows = np.asarray(rows, dtype=int)
        return EventFeatureTable(
            *(np.asarray(self[c])[rows] for c in TABLE_COLUMNS),
            extra={k: np.asarray(v)[rows] for k, v in self.extra.items()},
        )

    def where(self, mask) -> "EventFeatureTable":
        return self.take(np.flatnonzero(mask))

    @classmethod
    def from_events(cls, events: Sequence[OutageEvent]) -> "EventFeatureTable":
        for e in events:
            if None in (e.auc_customer_hours, e.norm_customers_out, e.peak_wind_gust,
                        e.peak_air_temp, e.precip_flag):
                raise DataError(f"event at {e.start} lacks metrics or weather features")
        return cls(
            event_id=np.arange(len(events)),
            peak_wind_gust=np.array([e.peak_wind_gust for e in events], dtype=float),
            peak_air_temp=np.array([e.peak_air_temp for e in events], dtype=float),
            precip_flag=np.array([e.precip_flag for e in events], dtype=int),
            auc_customer_hours=np.array([e.auc_customer_hours for e in events], dtype=float),
            norm_customers_out=np.array([e.norm_customers_out for e in events], dtype=float),
        )

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for i in range(len(self)):
                w.writerow([format_number(self[c][i]) for c in self.columns])

    @classmethod
    def from_csv(cls, path: str | Path) -> "EventFeatureTable":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in TABLE_COLUMNS if c not in header]
            if missing:
                raise DataError(f"{path}: event table lacks column(s) {missing}")
            rows = list(reader)
        cols = {}
        for c in header:
            try:
                cols[c] = np.array([float(r[c]) if r[c] != "" else np.nan for r in rows])
            except ValueError as exc:
                raise DataError(f"{path}: column {c!r}: {exc}") from None
        return cls(
            event_id=cols["event_id"].astype(int),
            peak_wind_gust=cols["peak_wind_gust"],
            peak_air_temp=cols["peak_air_temp"],
            precip_flag=cols["precip_flag"].astype(int),
            auc_customer_hours=cols["auc_customer_hours"],
            norm_customers_out=cols["norm_customers_out"],
            extra={c: cols[c] for c in header if c not in TABLE_COLUMNS},
        )


def events_to_csv(path: str | Path, events: Sequence[OutageEvent]) -> None:
    """Event boundaries and metrics, one row per event."""
    fields = ["event_id", "start", "end", "n_bins", "censored", "left_censored",
              "peak_customers_out", "cumulative_customers_out", "auc_customer_hours",
              "norm_customers_out", "peak_wind_gust", "peak_air_temp", "precip_flag"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for i, e in enumerate(events):
            w.writerow([
                i, format_time(e.start), format_time(e.end), e.n_bins, int(e.censored), int(e.left_censored),
                e.peak_customers_out, e.cumulative_customers_out, format_number(e.auc_customer_hours),
                format_number(e.norm_customers_out), format_number(e.peak_wind_gust),
                format_number(e.peak_air_temp), e.precip_flag,
            ])
