"""Uniform 15-minute grid carrying aligned outage and weather series.

Outages are resampled by sample-and-hold with a bounded forward fill;
weather is reduced to the per-bin maximum over all stations and gaps are
filled from the temporally nearest bin with data.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .ingestion import OutageRecord, StudyWindow, WeatherObservation, parse_timestamp

STEP = timedelta(minutes=15)
STEP_MINUTES = 15
WEATHER_VARIABLES = ("wind_speed", "wind_gust", "air_temp")


@dataclass
class TimeGrid:
    """Bins ``start + k * step`` for ``k < length``, with named series.

    ``missing_mask[name][k]`` is True where bin ``k`` of ``name`` had no
    direct observation and its value was imputed.
    """

    start: datetime
    length: int
    series: dict[str, np.ndarray] = field(default_factory=dict)
    missing_mask: dict[str, np.ndarray] = field(default_factory=dict)
    step: timedelta = STEP

    def __post_init__(self):
        if self.step != STEP:
            raise ValueError("grid step is fixed at 15 minutes")
        if self.length < 0:
            raise ValueError("grid length must be >= 0")
        for name, arr in {**self.series, **self.missing_mask}.items():
            if len(arr) != self.length:
                raise ValueError(f"series {name!r} has length {len(arr)}, grid has {self.length}")

    @classmethod
    def covering(cls, window: StudyWindow) -> "TimeGrid":
        """Empty grid whose bins cover ``window``; start is floored to the step."""
        start = _floor(window.start)
        length = math.ceil((window.end - start) / STEP)
        return cls(start, length)

    def empty_like(self) -> "TimeGrid":
        return TimeGrid(self.start, self.length)

    def timestamp(self, k: int) -> datetime:
        return self.start + k * self.step

    def timestamps(self) -> list[datetime]:
        return [self.timestamp(k) for k in range(self.length)]

    def minutes(self, times: Iterable[datetime]) -> np.ndarray:
        """Whole minutes of each time after the grid start."""
        return np.array([(t - self.start) // timedelta(minutes=1) for t in times], dtype=np.int64)

    def merged(self, other: "TimeGrid") -> "TimeGrid":
        if (other.start, other.length) != (self.start, self.length):
            raise ValueError("grids do not share the same axis")
        return TimeGrid(
            self.start, self.length,
            {**self.series, **other.series},
            {**self.missing_mask, **other.missing_mask},
        )

    def to_csv(self, path: str | Path) -> None:
        """Timestamp, one column per series, then one ``<name>_missing`` column per mask."""
        names = list(self.series)
        masks = list(self.missing_mask)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["timestamp"] + names + [f"{m}_missing" for m in masks])
            for k in range(self.length):
                w.writerow(
                    [format_time(self.timestamp(k))]
                    + [format_number(self.series[n][k]) for n in names]
                    + [int(self.missing_mask[m][k]) for m in masks]
                )

    @classmethod
    def from_csv(cls, path: str | Path) -> "TimeGrid":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if not body:
            raise DataError(f"{path}: grid dump has no rows")
        start = parse_timestamp(body[0][0])
        series, masks = {}, {}
        for j, name in enumerate(header[1:], start=1):
            col = [r[j] for r in body]
            if name.endswith("_missing"):
                masks[name[: -len("_missing")]] = np.array([v == "1" for v in col])
            else:
                series[name] = np.array([float(v) for v in col])
        return cls(start, len(body), series, masks)


def _floor(t: datetime) -> datetime:
    t = t.astimezone(timezone.utc)
    return t.replace(minute=t.minute - t.minute % STEP_MINUTES, second=0, microsecond=0)


def format_time(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def format_number(x) -> str:
    """Shortest round-tripping text for a number; integers lose the ``.0``."""
    x = float(x)
    if math.isnan(x):
        return ""
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def resample_outages(records: Sequence[OutageRecord], grid: TimeGrid, ffill_limit: int = 3) -> TimeGrid:
    """Sample-and-hold ``customers_out`` onto ``grid``.

    A record at time ``t`` is observed by the first bin whose timestamp is
    at or after ``t``; the bin holds the latest such record. Bins without a
    new record repeat the last observed value for up to ``ffill_limit``
    consecutive bins. Beyond that, and before the first record, the bin is
    0 and flagged in ``missing_mask["customers_out"]``.
    """
    n = grid.length
    values = np.zeros(n)
    observed = np.zeros(n, dtype=bool)
    if records:
        minutes = grid.minutes(r.timestamp for r in records)
        counts = np.array([r.customers_out for r in records], dtype=float)
        if np.any(np.diff(minutes) < 0):
            raise ValueError("outage records must be sorted by time")
        k = -(-minutes // STEP_MINUTES)  # ceil
        keep = (k >= 0) & (k < n)
        k, counts = k[keep], counts[keep]
        if len(k):
            last = np.flatnonzero(np.r_[k[1:] != k[:-1], True])
            values[k[last]] = counts[last]
            observed[k[last]] = True

    idx = np.arange(n)
    last_obs = np.maximum.accumulate(np.where(observed, idx, -1)) if n else idx
    gap = idx - last_obs
    held = (last_obs >= 0) & (gap <= ffill_limit)
    filled = np.where(held, values[np.maximum(last_obs, 0)], 0.0) if n else values
    imputed_zero = ~held
    out = grid.empty_like()
    out.series["customers_out"] = filled
    out.missing_mask["customers_out"] = imputed_zero
    return out


def nearest_fill(values: np.ndarray) -> np.ndarray:
    """Fill NaNs from the nearest non-NaN entry; ties go to the earlier one."""
    values = np.asarray(values, dtype=float)
    ok = ~np.isnan(values)
    if ok.all() or not ok.any():
        return values.copy()
    idx = np.arange(len(values))
    left = np.maximum.accumulate(np.where(ok, idx, -1))
    right = np.minimum.accumulate(np.where(ok, idx, len(values))[::-1])[::-1]
    dl = np.where(left >= 0, idx - left, np.iinfo(np.int64).max)
    dr = np.where(right < len(values), right - idx, np.iinfo(np.int64).max)
    src = np.where(dl <= dr, left, right)
    return values[src]


def align_weather(obs: Sequence[WeatherObservation], grid: TimeGrid) -> TimeGrid:
    """Per-bin station maxima of wind speed, gust and temperature, plus ``precip_occ``.

    Bins are half-open ``[t_k, t_k + 15 min)``. A bin with no gust report
    takes its wind speed; bins still empty take the value of the nearest
    bin with data (earlier bin on ties). ``precip_occ`` is 1 where any
    positive precipitation depth was reported in the bin, else 0.
    """
    n = grid.length
    raw = {v: np.full(n, np.nan) for v in WEATHER_VARIABLES}
    precip = np.zeros(n)
    if obs:
        k = grid.minutes(o.timestamp for o in obs) // STEP_MINUTES
        keep = (k >= 0) & (k < n)
        for var in WEATHER_VARIABLES:
            vals = np.array([np.nan if getattr(o, var) is None else getattr(o, var) for o in obs])
            sel = keep & ~np.isnan(vals)
            np.fmax.at(raw[var], k[sel], vals[sel])
        depth = np.array([0.0 if o.precip_depth is None else o.precip_depth for o in obs])
        sel = keep & (depth > 0)
        precip[k[sel]] = 1.0

    gust_from_speed = np.isnan(raw["wind_gust"]) & ~np.isnan(raw["wind_speed"])
    raw["wind_gust"] = np.where(gust_from_speed, raw["wind_speed"], raw["wind_gust"])

    out = grid.empty_like()
    for var in WEATHER_VARIABLES:
        missing = np.isnan(raw[var])
        if n and missing.all():
            raise DataError(f"no {var} observations anywhere in the study window")
        out.series[var] = nearest_fill(raw[var])
        out.missing_mask[var] = missing | (gust_from_speed if var == "wind_gust" else False)
    out.series["precip_occ"] = precip
    out.missing_mask["precip_occ"] = np.zeros(n, dtype=bool)
    return out


def grid_observations(grid: TimeGrid, station_id: str = "grid") -> list[WeatherObservation]:
    """Express an aligned weather grid as one observation per bin."""
    return [
        WeatherObservation(
            station_id, grid.timestamp(k),
            float(grid.series["wind_speed"][k]),
            float(grid.series["wind_gust"][k]),
            float(grid.series["air_temp"][k]),
            float(grid.series["precip_occ"][k]),
        )
        for k in range(grid.length)
    ]
