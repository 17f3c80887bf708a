"""Pearson correlation between weather features and resilience metrics."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .timegrid import format_number

log = logging.getLogger(__name__)

WEATHER_FEATURES = ("peak_wind_gust", "peak_air_temp", "precip_flag")
METRICS = ("auc_customer_hours", "norm_customers_out")


@dataclass
class CorrelationMatrix:
    variable_names: tuple[str, ...]
    values: np.ndarray
    n_events: int
    constant: tuple[str, ...] = field(default_factory=tuple)

    def r(self, a: str, b: str) -> float:
        return float(self.values[self.variable_names.index(a), self.variable_names.index(b)])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([""] + list(self.variable_names))
            for name, row in zip(self.variable_names, self.values):
                w.writerow([name] + [format_number(v) for v in row])

    @classmethod
    def from_csv(cls, path: str | Path, n_events: int = 0) -> "CorrelationMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        names = tuple(rows[0][1:])
        values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        return cls(names, values, n_events)


def pearson_matrix(table, columns: Sequence[str]) -> CorrelationMatrix:
    """Pearson product-moment coefficients between ``columns`` of ``table``.

    A constant column has correlation 0 with every other column (and 1 with
    itself); such columns are listed in ``constant`` and logged.
    """
    columns = tuple(columns)
    data = np.column_stack([np.asarray(table[c], dtype=float) for c in columns])
    n = data.shape[0]
    if n < 3:
        raise DataError(f"correlation needs at least 3 events, got {n}")
    if not np.all(np.isfinite(data)):
        raise DataError("correlation input has non-finite cells")
    centered = data - data.mean(axis=0)
    scale = np.sqrt(np.einsum("ij,ij->j", centered, centered))
    constant = scale == 0
    k = len(columns)
    values = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            if constant[i] or constant[j]:
                r = 0.0
            else:
                r = float(centered[:, i] @ centered[:, j]) / (scale[i] * scale[j])
                r = min(1.0, max(-1.0, r))
            values[i, j] = values[j, i] = r
    flagged = tuple(c for c, flag in zip(columns, constant) if flag)
    if flagged:
        log.warning("constant column(s) %s: correlations set to 0", list(flagged))
    return CorrelationMatrix(columns, values, n, flagged)


def dominant_predictors(matrix: CorrelationMatrix, metric_names: Sequence[str],
                        k: int | None = None, predictors: Sequence[str] | None = None
                        ) -> list[tuple[str, float]]:
    """Weather variables ranked by their largest |r| against any metric.

    Each entry is ``(variable, r)`` where ``r`` is the signed coefficient
    that attains the maximum. Ties keep input order.
    """
    names = matrix.variable_names
    missing = [m for m in metric_names if m not in names]
    if missing:
        raise DataError(f"metrics {missing} not in correlation matrix")
    if predictors is None:
        predictors = [v for v in names if v not in metric_names]
    ranked = []
    for v in predictors:
        rs = [matrix.r(v, m) for m in metric_names]
        best = max(range(len(rs)), key=lambda i: abs(rs[i]))
        ranked.append((v, rs[best]))
    if all(r == 0 for _, r in ranked):
        log.warning("all predictor correlations are zero; ranking keeps input order")
    ranked.sort(key=lambda item: -abs(item[1]))  # stable: ties keep input order
    return ranked if k is None else ranked[:k]
