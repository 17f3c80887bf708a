"""Parse raw outage and weather CSV files into validated records.

Both parsers work row by row: a malformed row goes to a rejects list with
its line number and raw text, and parsing continues. Timestamps are
normalised to UTC at parse time and truncated to the minute.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, replace
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator, Union
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

from .errors import ConfigError, DataError

Source = Union[str, os.PathLike, bytes, IO]


@dataclass(frozen=True)
class OutageRecord:
    timestamp: datetime
    state: str
    county: str
    customers_out: int


@dataclass(frozen=True)
class WeatherObservation:
    """One station report. ``None`` marks a missing field."""

    station_id: str
    timestamp: datetime
    wind_speed: float | None
    wind_gust: float | None
    air_temp: float | None
    precip_depth: float | None


@dataclass(frozen=True)
class Reject:
    line_number: int
    reason: str
    raw_line: str


@dataclass(frozen=True)
class OutageColumns:
    """Header names of the outage file (EAGLE-I defaults)."""

    timestamp: str = "run_start_time"
    state: str = "state"
    county: str = "county"
    customers_out: str = "customers_out"


@dataclass(frozen=True)
class WeatherColumns:
    """Header names of the weather file (IEM ASOS defaults)."""

    station: str = "station"
    timestamp: str = "valid"
    wind_speed: str = "sknt"
    wind_gust: str = "gust"
    air_temp: str = "tmpf"
    precip_depth: str = "p01i"


@dataclass
class OutageParse:
    records: list[OutageRecord]
    rejects: list[Reject]
    n_rows: int = 0
    n_filtered: int = 0  # valid rows for other counties or outside the window
    n_merged: int = 0  # duplicate timestamps folded into another record


@dataclass
class WeatherParse:
    observations: list[WeatherObservation]
    rejects: list[Reject]
    n_rows: int = 0
    n_filtered: int = 0


@dataclass(frozen=True)
class StudyWindow:
    """Half-open UTC interval ``[start, end)``."""

    start: datetime
    end: datetime

    def __post_init__(self):
        if not self.start < self.end:
            raise ConfigError(f"study window start {self.start} is not before end {self.end}")

    @classmethod
    def from_dates(cls, start: date | str, end: date | str) -> "StudyWindow":
        """Window from the first instant of ``start`` to the last instant of ``end`` (inclusive days)."""
        s = date.fromisoformat(start) if isinstance(start, str) else start
        e = date.fromisoformat(end) if isinstance(end, str) else end
        s_dt = datetime(s.year, s.month, s.day, tzinfo=timezone.utc)
        e_dt = datetime(e.year, e.month, e.day, tzinfo=timezone.utc)
        return cls(s_dt, e_dt + timedelta(days=1))

    def __contains__(self, t: datetime) -> bool:
        return self.start <= t < self.end


def get_zone(name: str):
    if name.upper() == "UTC":
        return timezone.utc
    try:
        return ZoneInfo(name)
    except (ZoneInfoNotFoundError, ValueError) as exc:
        raise ConfigError(f"unknown time zone {name!r}") from exc


def parse_timestamp(text: str, zone=timezone.utc) -> datetime:
    """Parse an ISO-like timestamp; naive values are read in ``zone``.

    Returns an aware UTC datetime truncated to the minute.
    """
    s = text.strip()
    if not s:
        raise ValueError("empty timestamp")
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    t = datetime.fromisoformat(s)
    if t.tzinfo is None:
        t = t.replace(tzinfo=zone)
    return t.astimezone(timezone.utc).replace(second=0, microsecond=0)


def _open_text(source: Source) -> IO[str]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8-sig")
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8-sig"), newline="")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8-sig", newline="")


class _LineTracker:
    """Feeds lines to ``csv.reader`` and remembers the raw text of each record."""

    def __init__(self, stream: Iterable[str]):
        self._it = iter(stream)
        self.consumed: list[str] = []
        self.line = 0

    def __iter__(self) -> Iterator[str]:
        return self

    def __next__(self) -> str:
        line = next(self._it)
        self.line += 1
        self.consumed.append(line)
        return line

    def take(self) -> tuple[int, str]:
        """First line number and raw text of the record just read."""
        raw = "".join(self.consumed).rstrip("\r\n")
        first = self.line - len(self.consumed) + 1
        self.consumed = []
        return first, raw


def _rows(source: Source):
    """Yield ``(header, None, None)`` once, then ``(line_number, raw, fields)``."""
    stream = _open_text(source)
    close = isinstance(source, (str, os.PathLike))
    try:
        tracker = _LineTracker(stream)
        reader = csv.reader(tracker)
        header = None
        for fields in reader:
            line_no, raw = tracker.take()
            if header is None:
                if not any(f.strip() for f in fields):
                    continue
                header = [f.strip() for f in fields]
                yield header, None, None
                continue
            if not any(f.strip() for f in fields):
                continue
            yield line_no, raw, fields
    finally:
        if close:
            stream.close()


def _column_index(header: list[str], wanted: dict[str, str], what: str) -> dict[str, int]:
    lower = {h.lower(): i for i, h in enumerate(header)}
    missing = [name for name in wanted.values() if name.lower() not in lower]
    if missing:
        raise DataError(f"{what} header {header} lacks column(s) {missing}")
    return {key: lower[name.lower()] for key, name in wanted.items()}


def _number(text: str, missing: frozenset[str]) -> float | None:
    s = text.strip()
    if s in missing:
        return None
    value = float(s)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {s!r}")
    return value


def parse_outages(source: Source, county: str, state: str, columns: OutageColumns = OutageColumns(),
                  tz: str = "UTC", window: StudyWindow | None = None) -> OutageParse:
    """Outage records for one county, sorted by time, duplicates folded to the max.

    County and state match case-insensitively after trimming. Valid rows
    for other counties or outside ``window`` are counted in ``n_filtered``.
    """
    zone = get_zone(tz)
    rows = _rows(source)
    try:
        header = next(rows)[0]
    except StopIteration:
        raise DataError("outage file is empty (no header)") from None
    idx = _column_index(header, vars(columns), "outage")
    want_county, want_state = county.strip().lower(), state.strip().lower()

    by_time: dict[datetime, OutageRecord] = {}
    rejects: list[Reject] = []
    n_rows = n_filtered = n_merged = 0
    for line_no, raw, fields in rows:
        n_rows += 1
        try:
            if len(fields) != len(header):
                raise ValueError(f"expected {len(header)} fields, got {len(fields)}")
            t = parse_timestamp(fields[idx["timestamp"]], zone)
            text = fields[idx["customers_out"]].strip()
            count = float(text)
            if not count.is_integer():
                raise ValueError(f"customers_out {text!r} is not an integer")
            if count < 0:
                raise ValueError(f"customers_out {text!r} is negative")
            rec = OutageRecord(t, fields[idx["state"]].strip(), fields[idx["county"]].strip(), int(count))
        except ValueError as exc:
            rejects.append(Reject(line_no, str(exc), raw))
            continue
        if rec.county.lower() != want_county or rec.state.lower() != want_state:
            n_filtered += 1
            continue
        if window is not None and t not in window:
            n_filtered += 1
            continue
        prev = by_time.get(t)
        if prev is not None:
            n_merged += 1
            if prev.customers_out >= rec.customers_out:
                continue
        by_time[t] = rec
    if not by_time:
        where = f" within {window.start:%Y-%m-%d}..{window.end:%Y-%m-%d}" if window else ""
        raise DataError(f"no outage rows match county={county!r} state={state!r}{where}")
    records = [by_time[t] for t in sorted(by_time)]
    return OutageParse(records, rejects, n_rows, n_filtered, n_merged)


def parse_weather(source: Source, columns: WeatherColumns = WeatherColumns(), tz: str = "UTC",
                  missing: Iterable[str] = ("", "M"), window: StudyWindow | None = None) -> WeatherParse:
    """One observation per valid row; missing fields stay ``None``.

    Values listed in ``missing`` (after trimming) mark a field missing. IEM
    trace precipitation ("T") is not measurable and is read as missing
    unless listed otherwise by the caller. A file with no header yields no
    observations.
    """
    zone = get_zone(tz)
    missing = frozenset(missing) | {"T"}
    rows = _rows(source)
    try:
        header = next(rows)[0]
    except StopIteration:
        return WeatherParse([], [])
    idx = _column_index(header, vars(columns), "weather")

    out: list[WeatherObservation] = []
    rejects: list[Reject] = []
    n_rows = n_filtered = 0
    for line_no, raw, fields in rows:
        n_rows += 1
        try:
            if len(fields) != len(header):
                raise ValueError(f"expected {len(header)} fields, got {len(fields)}")
            station = fields[idx["station"]].strip()
            if not station:
                raise ValueError("empty station id")
            t = parse_timestamp(fields[idx["timestamp"]], zone)
            values = {}
            for key in ("wind_speed", "wind_gust", "air_temp", "precip_depth"):
                try:
                    values[key] = _number(fields[idx[key]], missing)
                except ValueError:
                    raise ValueError(f"{key} {fields[idx[key]]!r} is not a number") from None
            for key in ("wind_speed", "wind_gust", "precip_depth"):
                if values[key] is not None and values[key] < 0:
                    raise ValueError(f"{key} {values[key]} is negative")
        except ValueError as exc:
            rejects.append(Reject(line_no, str(exc), raw))
            continue
        if window is not None and t not in window:
            n_filtered += 1
            continue
        out.append(WeatherObservation(station, t, **values))
    return WeatherParse(out, rejects, n_rows, n_filtered)


# Linear unit maps onto a base unit per quantity: (scale, offset) so that
# base = value * scale + offset.
UNITS = {
    "speed": {"knots": (0.514444, 0.0), "mph": (0.44704, 0.0), "m/s": (1.0, 0.0), "km/h": (1 / 3.6, 0.0)},
    "temperature": {"degF": (5 / 9, -32 * 5 / 9), "degC": (1.0, 0.0), "K": (1.0, -273.15)},
    "length": {"inches": (25.4, 0.0), "mm": (1.0, 0.0)},
}
FIELD_QUANTITY = {"wind_speed": "speed", "wind_gust": "speed", "air_temp": "temperature",
                  "precip_depth": "length"}


def unit_converter(quantity: str, source: str, target: str):
    """Function mapping a value in ``source`` units to ``target`` units."""
    table = UNITS[quantity]
    for unit in (source, target):
        if unit not in table:
            raise ConfigError(f"unknown {quantity} unit {unit!r}; choose from {sorted(table)}")
    (s1, o1), (s2, o2) = table[source], table[target]
    return lambda v: ((v * s1 + o1) - o2) / s2


def convert_units(observations: Iterable[WeatherObservation], source: dict[str, str],
                  target: dict[str, str]) -> list[WeatherObservation]:
    """Observations with each field in ``target`` converted from its ``source`` unit.

    Both maps are keyed by field name (``wind_speed``, ``wind_gust``,
    ``air_temp``, ``precip_depth``); fields absent from ``target`` keep
    their source units. Missing values stay missing.
    """
    converters = {}
    for name, unit in target.items():
        if name not in FIELD_QUANTITY:
            raise ConfigError(f"cannot convert unknown field {name!r}")
        if name not in source:
            raise ConfigError(f"source unit of {name!r} is not declared")
        converters[name] = unit_converter(FIELD_QUANTITY[name], source[name], unit)
    out = []
    for o in observations:
        changes = {k: f(getattr(o, k)) for k, f in converters.items() if getattr(o, k) is not None}
        out.append(replace(o, **changes))
    return out


def write_rejects(path: str | Path, rejects: Iterable[Reject]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["line_number", "reason", "raw_line"])
        for r in rejects:
            writer.writerow([r.line_number, r.reason, r.raw_line])


def read_rejects(path: str | Path) -> list[Reject]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [Reject(int(row["line_number"]), row["reason"], row["raw_line"]) for row in csv.DictReader(fh)]
