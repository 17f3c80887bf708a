"""Posterior predictive bands and fitted-curve export."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..timegrid import format_number
from .models import ModelSpec, check_finite, predict_counted
from .sampler import PosteriorResult


@dataclass
class PredictiveBand:
    features: np.ndarray  # (m, k)
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    level: float = 0.95

    def to_csv(self, path: str | Path, names: tuple[str, ...]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(names) + ["mean", "lo95", "hi95"])
            for x, m, lo, hi in zip(self.features, self.mean, self.lo, self.hi):
                w.writerow([format_number(v) for v in x] + [format_number(m), format_number(lo), format_number(hi)])


def posterior_predictive(result: PosteriorResult, spec: ModelSpec, features_grid, rng: np.random.Generator,
                         level: float = 0.95, sigma_scale: float = 1.0) -> PredictiveBand:
    """Predictive mean and central band at each grid point.

    Every posterior draw is pushed through the model and perturbed with a
    Gaussian noise draw of that draw's sigma (multiplied by
    ``sigma_scale``). The band is the empirical quantile range, on the
    transformed response scale of ``spec``.
    """
    X = np.asarray(features_grid, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    check_finite(X, "feature")
    draws = result.flat()
    mu, _ = predict_counted(spec.form, draws, X)  # (n_draws, m)
    sigma = draws[:, -1:] * sigma_scale
    y = mu + sigma * rng.standard_normal(mu.shape)
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(y, [tail, 1.0 - tail], axis=0)
    return PredictiveBand(X, y.mean(axis=0), lo, hi, level)


def coverage(band: PredictiveBand, y) -> float:
    """Fraction of observed responses inside the band."""
    y = np.asarray(y, dtype=float)
    return float(np.mean((y >= band.lo) & (y <= band.hi)))


def curve_grid(values, n: int = 100) -> np.ndarray:
    """``n`` evenly spaced points from the minimum to the maximum of ``values``."""
    values = np.asarray(values, dtype=float)
    return np.linspace(values.min(), values.max(), n)
