"""Model evidence, Bayes factors, data splits and held-out error metrics."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, InsufficientDataError
from .inference.evidence import EvidenceEstimate, SteppingStoneConfig, stepping_stone
from .inference.models import ModelSpec, RegressionTarget, predict_counted
from .inference.sampler import PosteriorResult
from .timegrid import format_number

log = logging.getLogger(__name__)

SPLIT_FRACTIONS = {"test": 0.20, "val": 0.16, "train": 0.64}
MIN_SPLIT_ROWS = 10
MIN_STRATUM = 3

# (lower bound on BF for the favoured model, label), strongest first.
BANDS = ((100.0, "decisive"), (10.0, "strong"), (3.0, "substantial"))


def log_marginal_likelihood(spec: ModelSpec, table, config: SteppingStoneConfig | None = None,
                            sigma_scale: float | None = None) -> EvidenceEstimate:
    """Stepping-stone estimate of ``log p(data | model)`` on ``table``.

    ``sigma_scale`` fixes the noise prior; pass the same value for every
    model compared on one table so their priors on sigma agree.
    """
    target = RegressionTarget.from_table(spec, table, sigma_scale)
    return stepping_stone(target, config)


def interpret(log_bf_12: float) -> str:
    """Evidence label for a log Bayes factor of model 1 over model 2."""
    if abs(log_bf_12) < math.log(3.0):
        return "inconclusive"
    favoured = "Model 1" if log_bf_12 > 0 else "Model 2"
    for bound, label in BANDS:
        if abs(log_bf_12) >= math.log(bound):
            return f"{label} evidence for {favoured}"
    raise AssertionError("unreachable")


@dataclass
class ModelComparison:
    model_1: str
    model_2: str
    log_bf_12: float
    bf_12: float
    interpretation: str
    mc_error: float
    lml_1: float | None = None
    lml_2: float | None = None
    mc_error_1: float | None = None
    mc_error_2: float | None = None

    def to_json(self, path: str | Path) -> None:
        d = asdict(self)
        if not math.isfinite(d["bf_12"]):
            d["bf_12"] = None  # overflow; log_bf_12 carries the value
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(d, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str | Path) -> "ModelComparison":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        if d["bf_12"] is None:
            d["bf_12"] = math.inf if d["log_bf_12"] > 0 else 0.0
        return cls(**d)


def bayes_factor(lml_1: float, lml_2: float, mc_error_1: float = 0.0, mc_error_2: float = 0.0,
                 model_1: str = "model_1", model_2: str = "model_2") -> ModelComparison:
    log_bf = float(lml_1) - float(lml_2)
    try:
        bf = math.exp(log_bf)
    except OverflowError:
        bf = math.inf
    return ModelComparison(
        model_1=model_1,
        model_2=model_2,
        log_bf_12=log_bf,
        bf_12=bf,
        interpretation=interpret(log_bf),
        mc_error=math.hypot(mc_error_1, mc_error_2),
        lml_1=float(lml_1),
        lml_2=float(lml_2),
        mc_error_1=float(mc_error_1),
        mc_error_2=float(mc_error_2),
    )


def compare_models(spec_1: ModelSpec, spec_2: ModelSpec, table, config: SteppingStoneConfig | None = None,
                   sigma_scale: float | None = None) -> ModelComparison:
    """Bayes factor of ``spec_1`` over ``spec_2`` on the same table."""
    if spec_1.response != spec_2.response or spec_1.response_transform != spec_2.response_transform:
        raise DataError("models compared by Bayes factor must share the response and its transform")
    e1 = log_marginal_likelihood(spec_1, table, config, sigma_scale)
    e2 = log_marginal_likelihood(spec_2, table, config, sigma_scale)
    return bayes_factor(e1.log_evidence, e2.log_evidence, e1.mc_error, e2.mc_error, spec_1.name, spec_2.name)


def largest_remainder(n: int, fractions: Sequence[float]) -> list[int]:
    """Integer counts summing to ``n`` in the given proportions.

    Floors first, then hands the leftover units to the largest fractional
    parts (earlier entries win ties).
    """
    fractions = np.asarray(fractions, dtype=float)
    quotas = n * fractions / fractions.sum()
    counts = np.floor(quotas + 1e-9).astype(int)
    remainders = quotas - counts
    order = sorted(range(len(counts)), key=lambda i: (-round(remainders[i], 9), i))
    for i in order[: n - counts.sum()]:
        counts[i] += 1
    return [int(c) for c in counts]


def _allocate(total: int, sizes: list[int]) -> list[int]:
    """Split ``total`` across strata proportionally, one per eligible stratum if possible."""
    if total == 0 or sum(sizes) == 0:
        return [0] * len(sizes)
    counts = largest_remainder(total, sizes)
    for i, size in enumerate(sizes):
        if counts[i] == 0 and size >= 2 and total >= len(sizes):
            donor = max(range(len(sizes)), key=lambda j: (counts[j], -j))
            counts[donor] -= 1
            counts[i] += 1
    return [min(c, s) for c, s in zip(counts, sizes)]


@dataclass
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    stratified: bool

    @property
    def sizes(self) -> dict[str, int]:
        return {"train": len(self.train), "val": len(self.val), "test": len(self.test)}


def split_data(table, seed: int, fractions: dict[str, float] | None = None, stratify: str | None = "precip_flag") -> Split:
    """Disjoint train/validation/test row indices.

    The test share is held out first and the rest divided between
    validation and training, giving 64/16/20 by default. Counts use the
    largest-remainder rule. With ``stratify`` set, each split draws from
    both values of that column in proportion, and every split receives at
    least one row of each when the stratum allows; a stratum under three
    rows turns stratification off with a warning.
    """
    fr = dict(SPLIT_FRACTIONS if fractions is None else fractions)
    n = n_rows(table)
    if n < MIN_SPLIT_ROWS:
        raise InsufficientDataError(f"splitting needs at least {MIN_SPLIT_ROWS} rows, got {n}")
    n_test, n_rest = largest_remainder(n, [fr["test"], fr["val"] + fr["train"]])
    n_val, n_train = largest_remainder(n_rest, [fr["val"], fr["train"]])

    rng = np.random.default_rng(seed)
    strata = [np.arange(n)]
    stratified = False
    if stratify is not None:
        flag = np.asarray(table[stratify])
        groups = [np.flatnonzero(flag == v) for v in np.unique(flag)]
        if len(groups) > 1 and min(len(g) for g in groups) >= MIN_STRATUM:
            strata, stratified = groups, True
        else:
            log.warning("stratification by %s disabled: a stratum has fewer than %d rows", stratify, MIN_STRATUM)

    sizes = [len(s) for s in strata]
    test_k = _allocate(n_test, sizes)
    rest = [s - t for s, t in zip(sizes, test_k)]
    val_k = _allocate(n_val, rest)
    parts = {"train": [], "val": [], "test": []}
    for rows, t, v in zip(strata, test_k, val_k):
        perm = rows[rng.permutation(len(rows))]
        parts["test"].append(perm[:t])
        parts["val"].append(perm[t:t + v])
        parts["train"].append(perm[t + v:])
    out = {k: np.sort(np.concatenate(v)).astype(int) for k, v in parts.items()}
    return Split(out["train"], out["val"], out["test"], stratified)


def n_rows(table) -> int:
    if hasattr(table, "take"):
        return len(table)
    return len(next(iter(table.values())))


def _rows(table, idx: np.ndarray):
    if hasattr(table, "take"):
        return table.take(idx)
    return {k: np.asarray(v)[idx] for k, v in table.items()}


def subset(table, idx) -> object:
    """Rows ``idx`` of an ``EventFeatureTable`` or a dict of arrays."""
    return _rows(table, np.asarray(idx, dtype=int))


def point_prediction(spec: ModelSpec, posterior: PosteriorResult, X: np.ndarray, point: str = "mean_params") -> np.ndarray:
    """Posterior-mean-parameter prediction, or the posterior predictive mean."""
    if point == "mean_params":
        pred, _ = predict_counted(spec.form, posterior.mean_params(), X)
        return pred
    if point == "predictive_mean":
        pred, _ = predict_counted(spec.form, posterior.flat(), X)
        return pred.mean(axis=0)
    raise ValueError(f"unknown point prediction {point!r}")


def errors(spec: ModelSpec, posterior: PosteriorResult, table, point: str = "mean_params") -> tuple[float, float]:
    """(RMSE, MAE) of point predictions on the model's (transformed) response scale."""
    X, y = spec.design(table)
    if len(y) == 0:
        raise DataError(f"{spec.name}: cannot evaluate on an empty split")
    resid = y - point_prediction(spec, posterior, X, point)
    rmse = math.sqrt(float(np.mean(resid**2)))
    mae = float(np.mean(np.abs(resid)))
    return max(rmse, mae), mae  # guard the rounding case where all |residuals| are equal


@dataclass
class EvalReport:
    model_id: str
    split_sizes: dict[str, int]
    rmse_val: float
    mae_val: float
    rmse_test: float
    mae_test: float


def evaluate(spec: ModelSpec, posterior: PosteriorResult, table, split: Split, point: str = "mean_params") -> EvalReport:
    """Validation and test errors of a posterior fitted on ``split.train``."""
    rmse_val, mae_val = errors(spec, posterior, subset(table, split.val), point)
    rmse_test, mae_test = errors(spec, posterior, subset(table, split.test), point)
    return EvalReport(spec.name, split.sizes, rmse_val, mae_val, rmse_test, mae_test)


def write_eval_csv(path: str | Path, reports: Sequence[EvalReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "split", "n", "rmse", "mae"])
        for r in reports:
            w.writerow([r.model_id, "val", r.split_sizes["val"], format_number(r.rmse_val), format_number(r.mae_val)])
            w.writerow([r.model_id, "test", r.split_sizes["test"], format_number(r.rmse_test), format_number(r.mae_test)])


def read_eval_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            {"model": r["model"], "split": r["split"], "n": int(r["n"]), "rmse": float(r["rmse"]), "mae": float(r["mae"])}
            for r in csv.DictReader(fh)
        ]
