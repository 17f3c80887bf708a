"""Synthetic outage and weather files for demos and end-to-end tests.

The generator places storm events at known times, drives each event's peak
outage through a multiplicative gust/temperature relation, and writes
files in the EAGLE-I and IEM ASOS layouts, including a few malformed rows
and rows for another county.
"""

from __future__ import annotations

import argparse
import csv
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

COUNTY, STATE, TOTAL = "Toy", "Illinois", 100_000
START = datetime(2021, 6, 1, tzinfo=timezone.utc)
LN_A, B1, B2 = -9.0, 0.05, 0.03


@dataclass
class ToyTruth:
    starts: list[datetime]
    gusts: list[float]
    temps: list[float]
    precip: list[int]
    peaks: list[int]


def _fmt(t: datetime) -> str:
    return t.strftime("%Y-%m-%d %H:%M:%S")


def make_toy(out_dir: str | Path, seed: int = 0, days: int = 30, n_events: int = 40,
             write_config: bool = True) -> ToyTruth:
    """Write ``outages.csv``, ``weather.csv`` and ``config.yaml`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    step = timedelta(minutes=15)
    n_bins = days * 96
    spacing = n_bins // (n_events + 1)

    outages = np.zeros(n_bins, dtype=np.int64)
    gust = rng.uniform(4.0, 12.0, n_bins)
    hours = np.arange(n_bins) / 4.0
    temp = 55.0 + 8.0 * np.sin(2 * math.pi * (hours - 9.0) / 24.0) + rng.normal(0, 1.0, n_bins)
    rain = np.zeros(n_bins)
    truth = ToyTruth([], [], [], [], [])

    for k in range(n_events):
        s = (k + 1) * spacing + int(rng.integers(-spacing // 4, spacing // 4))
        g = rng.uniform(15.0, 50.0)
        t = rng.uniform(40.0, 90.0)
        p = int(rng.random() < 0.45)
        peak = TOTAL * math.exp(LN_A + B1 * g + B2 * t) * math.exp(rng.normal(0, 0.1))
        rise, fall = int(rng.integers(1, 5)), int(rng.integers(6, 20))
        curve = np.r_[np.linspace(peak / (rise + 1), peak, rise), peak * np.exp(-np.arange(1, fall + 1) / 4.0)]
        curve = np.round(curve).astype(np.int64)
        curve = curve[curve > 60]  # stop once the decay nears the threshold
        e = s + len(curve)
        outages[s:e] = curve
        outages[e] = rng.integers(1, 20)  # a report below threshold closes the event
        # Weather for the storm: gust and temperature peaks inside the event window.
        gust[s:e] = np.minimum(g, g * rng.uniform(0.8, 1.0, e - s))
        gust[s + min(rise, e - s - 1)] = g
        temp[s:e] = t - rng.uniform(0.0, 2.0, e - s)
        temp[s] = t
        if p:
            rain[s + int(rng.integers(0, e - s))] = round(float(rng.uniform(0.01, 0.5)), 2)
        truth.starts.append(START + s * step)
        truth.gusts.append(round(g, 1))
        truth.temps.append(round(t, 1))
        truth.precip.append(p)
        truth.peaks.append(int(curve.max()))

    # Small background outages, well below the threshold.
    for s in rng.integers(0, n_bins - 8, size=days * 2):
        if outages[s:s + 8].max() == 0:
            outages[s:s + int(rng.integers(1, 8))] = rng.integers(1, 20)

    with open(out / "outages.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fips_code", "county", "state", "customers_out", "run_start_time"])
        for i in range(n_bins):
            when = _fmt(START + i * step)
            if outages[i] > 0 and rng.random() > 0.03:  # a few dropped scrapes
                w.writerow(["17999", COUNTY, STATE, int(outages[i]), when])
            if i % 97 == 0:
                w.writerow(["17998", "Other", STATE, int(rng.integers(0, 500)), when])
        w.writerow(["17999", COUNTY, STATE, "-5", _fmt(START)])
        w.writerow(["17999", COUNTY, STATE, "12.5", _fmt(START)])
        w.writerow(["17999", COUNTY, STATE, "7"])

    with open(out / "weather.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["station", "valid", "lon", "lat", "tmpf", "sknt", "p01i", "gust"])
        for i in range(n_bins):
            when = START + i * step + timedelta(minutes=int(rng.integers(0, 15)))
            gust_text = "M" if gust[i] < 8 and rng.random() < 0.5 else f"{gust[i]:.1f}"
            precip_text = f"{rain[i]:.2f}" if rain[i] > 0 else ("T" if rng.random() < 0.01 else "0.00")
            w.writerow(["TOY", when.strftime("%Y-%m-%d %H:%M"), "-87.9", "41.9",
                        f"{temp[i]:.1f}", f"{0.6 * gust[i]:.1f}", precip_text, gust_text])
        w.writerow(["TOY", "not-a-time", "-87.9", "41.9", "50", "5", "0.00", "M"])

    if write_config:
        end = START + timedelta(days=days - 1)
        (out / "config.yaml").write_text(TOY_CONFIG.format(
            county=COUNTY, state=STATE, total=TOTAL, start=START.date(), end=end.date()), encoding="utf-8")
    return truth


TOY_CONFIG = """\
# Synthetic 30-day fixture; regenerate with `python -m resilience.toy <dir>`.
paths:
  outages: outages.csv
  weather: [weather.csv]
  out_dir: out
county: {county}
state: {state}
county_total_customers: {total}
window_start: "{start}"
window_end: "{end}"
timezone: UTC
seed: 7
thresholds:
  gap_hours: 3
  magnitude: 50
  forward_fill_limit: 3
mcmc:
  n_chains: 4
  n_warmup: 1000
  n_draws: 1000
evidence:
  n_rungs: 32
  ladder: power
  n_warmup: 500
  n_draws: 2000
contour:
  n_points: 25
"""


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description="Write the synthetic toy fixture.")
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    truth = make_toy(args.out_dir, args.seed)
    print(f"wrote {len(truth.starts)} storm events to {args.out_dir}")


if __name__ == "__main__":
    main()
