"""Posterior export: JSON summaries plus a CSV of raw draws, and readers for both."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..timegrid import format_number
from .models import ModelSpec
from .sampler import MCMCConfig, PosteriorResult


def _clean(x):
    """JSON-safe copy: non-finite floats become None."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def posterior_dict(result: PosteriorResult) -> dict:
    return _clean({
        "model": result.spec.to_dict() if result.spec else None,
        "parameters": list(result.names),
        "summaries": result.summaries(),
        "diagnostics": result.diagnostics,
        "acceptance_rate": result.acceptance_rate,
        "chain_acceptance": list(result.chain_acceptance),
        "converged": result.converged,
        "max_rhat": result.max_rhat,
        "sigma_scale": result.sigma_scale,
        "n_rows": result.n_rows,
        "n_clamped": result.n_clamped,
        "log_marginal_likelihood": result.log_marginal_likelihood,
        "lml_mc_error": result.lml_mc_error,
        "mcmc": asdict(result.config),
    })


def write_posterior(result: PosteriorResult, json_path: str | Path, draws_path: str | Path) -> None:
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(posterior_dict(result), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(draws_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["chain", "draw", *result.names, "loglik"])
        for c in range(result.samples.shape[0]):
            for d in range(result.samples.shape[1]):
                w.writerow([c, d, *(format_number(v) for v in result.samples[c, d]),
                            format_number(result.loglik[c, d])])


def read_posterior(json_path: str | Path, draws_path: str | Path) -> PosteriorResult:
    """Rebuild a ``PosteriorResult``; diagnostics are taken from the JSON."""
    with open(json_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    names = tuple(meta["parameters"])
    with open(draws_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["chain", "draw", *names, "loglik"]:
            raise DataError(f"{draws_path}: header {header} does not match {json_path}")
        rows = np.array([[float(v) if v != "" else np.nan for v in r] for r in reader])
    n_chains = int(rows[:, 0].max()) + 1
    samples = rows[:, 2:-1].reshape(n_chains, -1, len(names))
    loglik = rows[:, -1].reshape(n_chains, -1)
    diagnostics = {k: {s: (np.nan if v is None else v) for s, v in d.items()}
                   for k, d in meta["diagnostics"].items()}
    return PosteriorResult(
        names=names,
        samples=samples,
        loglik=loglik,
        chain_acceptance=meta["chain_acceptance"],
        config=MCMCConfig(**meta["mcmc"]),
        spec=ModelSpec.from_dict(meta["model"]) if meta["model"] else None,
        sigma_scale=meta["sigma_scale"],
        n_rows=meta["n_rows"],
        n_clamped=meta["n_clamped"],
        log_marginal_likelihood=meta["log_marginal_likelihood"],
        lml_mc_error=meta["lml_mc_error"],
        diagnostics=diagnostics,
    )
