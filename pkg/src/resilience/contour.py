"""Prediction surfaces over two weather variables, for contour plots."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .inference.models import ModelSpec, model_predict
from .inference.sampler import PosteriorResult
from .timegrid import format_number

log = logging.getLogger(__name__)


@dataclass
class ContourGrid:
    """``z[i, j]`` is the prediction at ``(w1_axis[j], w2_axis[i])``."""

    w1_axis: np.ndarray
    w2_axis: np.ndarray
    z: np.ndarray
    precip_flag: int
    model_id: str
    w1_name: str = "w1"
    w2_name: str = "w2"

    def __post_init__(self):
        self.w1_axis = np.asarray(self.w1_axis, dtype=float)
        self.w2_axis = np.asarray(self.w2_axis, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        if self.z.shape != (len(self.w2_axis), len(self.w1_axis)):
            raise ValueError(f"z has shape {self.z.shape}, expected {(len(self.w2_axis), len(self.w1_axis))}")
        for name, axis in (("w1", self.w1_axis), ("w2", self.w2_axis)):
            if len(axis) > 1 and not np.all(np.diff(axis) > 0):
                raise ValueError(f"{name} axis must be strictly increasing")

    def to_csv(self, path: str | Path) -> None:
        """Wide layout: header row holds the w1 axis, first column the w2 axis."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"{self.w2_name}\\{self.w1_name}"] + [format_number(v) for v in self.w1_axis])
            for y, row in zip(self.w2_axis, self.z):
                w.writerow([format_number(y)] + [format_number(v) for v in row])

    @classmethod
    def from_csv(cls, path: str | Path, precip_flag: int = 0, model_id: str = "") -> "ContourGrid":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        w2_name, w1_name = rows[0][0].split("\\", 1)
        w1 = np.array([float(v) for v in rows[0][1:]])
        w2 = np.array([float(r[0]) for r in rows[1:]])
        z = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        return cls(w1, w2, z, precip_flag, model_id, w1_name, w2_name)


def axis(values, n: int, bounds=None) -> np.ndarray:
    """``n`` evenly spaced points over ``bounds`` or the data range."""
    values = np.asarray(values, dtype=float)
    lo, hi = bounds if bounds is not None else (values.min(), values.max())
    if not hi > lo:
        # A constant predictor still needs an increasing axis.
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, n)


def emit_contour(posterior: PosteriorResult, spec: ModelSpec, w1_axis, w2_axis, precip_flag: int,
                 natural_scale: bool = True) -> ContourGrid:
    """Posterior-mean-parameter prediction over the ``w1 x w2`` grid.

    With ``natural_scale`` the prediction is mapped back through the
    inverse response transform (a no-op for untransformed responses).
    """
    if len(spec.predictors) != 2:
        raise DataError(f"{spec.name}: contour surfaces need a two-predictor model")
    w1_axis = np.asarray(w1_axis, dtype=float)
    w2_axis = np.asarray(w2_axis, dtype=float)
    W1, W2 = np.meshgrid(w1_axis, w2_axis)
    X = np.column_stack([W1.ravel(), W2.ravel()])
    z = model_predict(spec, posterior.mean_params(), X)
    if natural_scale:
        z = spec.inverse_transform(z)
    return ContourGrid(w1_axis, w2_axis, np.asarray(z).reshape(W1.shape), int(precip_flag), spec.name,
                       spec.predictors[0], spec.predictors[1])


def write_points(path: str | Path, table, spec: ModelSpec) -> None:
    """Original event coordinates for overlay on a surface."""
    w1, w2 = spec.predictors
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event_id", w1, w2, spec.response])
        for i in range(len(table)):
            w.writerow([int(table["event_id"][i]), format_number(table[w1][i]),
                        format_number(table[w2][i]), format_number(table[spec.response][i])])
