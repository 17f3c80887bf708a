"""End-to-end run: ingest, align, extract, correlate, fit, compare, evaluate, contour.

Every stage reads its inputs from memory when an earlier stage of the same
run produced them, and otherwise from the contract files in the output
directory, so stages can be rerun one at a time.
"""

from __future__ import annotations

import json
import logging
import platform
import zlib
from importlib import metadata as importlib_metadata
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .contour import axis, emit_contour, write_points
from .correlation import METRICS, WEATHER_FEATURES, dominant_predictors, pearson_matrix
from .errors import DataError, InsufficientDataError, ResilienceError
from .events import (
    EventFeatureTable, attach_weather_features, compute_metrics, events_to_csv, extract_events,
)
from .ingestion import (
    OutageColumns, WeatherColumns, convert_units, parse_outages, parse_weather, write_rejects,
)
from .inference.evidence import stepping_stone
from .inference.export import posterior_dict, read_posterior, write_posterior
from .inference.models import PARAMETERS, Form, ModelSpec, RegressionTarget, resolve_sigma_scale
from .inference.predictive import curve_grid, posterior_predictive
from .inference.sampler import MIN_ROWS, PosteriorResult, run_mcmc
from .selection import Split, bayes_factor, evaluate, split_data, write_eval_csv
from .timegrid import TimeGrid, align_weather, format_number, resample_outages

log = logging.getLogger(__name__)

STAGES = ("ingest", "events", "correlate", "fit", "compare", "evaluate", "contour")
PARTIAL = ".partial"
METADATA = "run_metadata.json"
THRESHOLD_NOTE = (
    "a bin is above the magnitude threshold when customers_out > magnitude; "
    "equality counts as below"
)


def stage_seed(seed: int, name: str) -> int:
    """Independent sub-stream seed for a named stage."""
    state = np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]).generate_state(1)
    return int(state[0])


def software_version() -> str:
    try:
        return importlib_metadata.version("artifact")
    except importlib_metadata.PackageNotFoundError:
        return __version__


class Pipeline:
    def __init__(self, config: RunConfig, force: bool = False):
        self.config = config
        self.force = force
        self.out = config.out_dir
        self.grid: TimeGrid | None = None
        self.table: EventFeatureTable | None = None
        self.split: Split | None = None
        self.posteriors: dict[str, PosteriorResult] = {}
        self.seeds: dict[str, int] = {}
        self.counts: dict[str, object] = {}
        self.completed: list[str] = []

    # -- helpers ---------------------------------------------------------

    def path(self, name: str) -> Path:
        return self.out / name

    def seed(self, name: str) -> int:
        s = stage_seed(self.config.seed, name)
        self.seeds[name] = s
        return s

    def specs(self) -> list[tuple[str, ModelSpec, ModelSpec]]:
        return [(r, *self.config.model_specs(r)) for r in self.config.models.responses]

    def load_grid(self) -> TimeGrid:
        if self.grid is None:
            p = self.path("grid.csv")
            if not p.exists():
                raise DataError(f"{p} not found; run the ingest stage first")
            self.grid = TimeGrid.from_csv(p)
        return self.grid

    def load_table(self) -> EventFeatureTable:
        if self.table is None:
            p = self.path("event_table.csv")
            if not p.exists():
                raise DataError(f"{p} not found; run the events stage first")
            self.table = EventFeatureTable.from_csv(p)
        return self.table

    def load_split(self) -> Split:
        if self.split is None:
            table = self.load_table()
            if len(table) < MIN_ROWS:
                raise InsufficientDataError(
                    f"insufficient events: {len(table)} event(s), model fitting needs at least {MIN_ROWS}"
                )
            s = self.config.split
            self.split = split_data(table, self.seed("split"), s.fractions, s.stratify)
            self.counts["split"] = {**self.split.sizes, "stratified": self.split.stratified}
        return self.split

    def load_posterior(self, name: str) -> PosteriorResult:
        if name not in self.posteriors:
            j, d = self.path(f"posterior_{name}.json"), self.path(f"draws_{name}.csv")
            if not j.exists():
                raise DataError(f"{j} not found; run the fit stage first")
            self.posteriors[name] = read_posterior(j, d)
        return self.posteriors[name]

    # -- stages ----------------------------------------------------------

    def ingest(self) -> None:
        c = self.config
        window = c.window
        parsed = parse_outages(c.paths.outages, c.county, c.state, OutageColumns(**c.outage_columns),
                               c.timezone, window)
        write_rejects(self.path("rejects_outages.csv"), parsed.rejects)
        obs, weather_counts = [], []
        for k, p in enumerate(c.paths.weather):
            wp = parse_weather(p, WeatherColumns(**c.weather_columns), c.weather_timezone,
                               c.missing_tokens, window)
            write_rejects(self.path(f"rejects_weather_{k}.csv"), wp.rejects)
            obs.extend(convert_units(wp.observations, c.units, c.convert_units))
            weather_counts.append({"file": Path(p).name, "rows": wp.n_rows, "rejected": len(wp.rejects),
                                   "filtered": wp.n_filtered, "kept": len(wp.observations)})
        grid = TimeGrid.covering(window)
        outages = resample_outages(parsed.records, grid, c.thresholds.forward_fill_limit)
        self.grid = outages.merged(align_weather(obs, grid))
        if c.write_grid:
            self.grid.to_csv(self.path("grid.csv"))
        self.counts["outages"] = {"rows": parsed.n_rows, "rejected": len(parsed.rejects),
                                  "filtered": parsed.n_filtered, "merged": parsed.n_merged,
                                  "kept": len(parsed.records)}
        self.counts["weather"] = weather_counts
        self.counts["grid_bins"] = self.grid.length

    def events(self) -> None:
        c = self.config
        grid = self.load_grid()
        events = extract_events(grid.series["customers_out"], grid.start, c.thresholds.magnitude,
                                c.thresholds.gap_hours)
        for e in events:
            compute_metrics(e, c.county_total_customers, c.customer_out_measure)
            attach_weather_features(e, grid, c.temperature_feature)
        events_to_csv(self.path("events.csv"), events)
        self.table = EventFeatureTable.from_events(events)
        self.table.to_csv(self.path("event_table.csv"))
        self.counts["events"] = {
            "n": len(events),
            "censored": sum(e.censored for e in events),
            "left_censored": sum(e.left_censored for e in events),
            "with_precip": int(np.sum(self.table.precip_flag)),
        }
        if not events:
            log.warning("no events exceed the magnitude threshold %s", c.thresholds.magnitude)

    def correlate(self) -> None:
        table = self.load_table()
        if len(table) < 3:
            log.warning("correlation skipped: %d event(s)", len(table))
            return
        matrix = pearson_matrix(table, WEATHER_FEATURES + METRICS)
        matrix.to_csv(self.path("correlation.csv"))
        ranking = dominant_predictors(matrix, METRICS, predictors=WEATHER_FEATURES)
        with open(self.path("predictor_ranking.csv"), "w", encoding="utf-8") as fh:
            fh.write("variable,r\n")
            for name, r in ranking:
                fh.write(f"{name},{format_number(r)}\n")

    def fit(self) -> None:
        table = self.load_table()
        split = self.load_split()
        train = table.take(split.train)
        with open(self.path("split.csv"), "w", encoding="utf-8") as fh:
            fh.write("event_id,split\n")
            labels = {int(i): name for name in ("train", "val", "test") for i in getattr(split, name)}
            for i in range(len(table)):
                fh.write(f"{int(table.event_id[i])},{labels[i]}\n")
        for response, *specs in self.specs():
            for spec in specs:
                config = self.config.mcmc.build(self.seed(f"fit:{spec.name}"))
                result = run_mcmc(spec, train, config, force=self.force)
                self.posteriors[spec.name] = result
                write_posterior(result, self.path(f"posterior_{spec.name}.json"),
                                self.path(f"draws_{spec.name}.csv"))
                if len(spec.predictors) == 1:
                    grid = curve_grid(train[spec.predictors[0]])
                    rng = np.random.default_rng(self.seed(f"curve:{spec.name}"))
                    band = posterior_predictive(result, spec, grid, rng)
                    band.to_csv(self.path(f"curve_{spec.name}.csv"), spec.predictors)

    def compare(self) -> None:
        table = self.load_table()
        train = table.take(self.load_split().train)
        for response, single, joint in self.specs():
            y = single.transform(train[response])
            scale = resolve_sigma_scale(single, y)  # one noise prior for both models
            estimates = {}
            for spec in (single, joint):
                ss = self.config.evidence.build(self.config.mcmc, self.seed(f"evidence:{spec.name}"))
                est = stepping_stone(RegressionTarget.from_table(spec, train, scale), ss)
                estimates[spec.name] = est
                posterior_json = self.path(f"posterior_{spec.name}.json")
                if posterior_json.exists():
                    # Record the evidence alongside the fitted posterior.
                    result = self.load_posterior(spec.name)
                    result.log_marginal_likelihood = est.log_evidence
                    result.lml_mc_error = est.mc_error
                    with open(posterior_json, "w", encoding="utf-8") as fh:
                        json.dump(posterior_dict(result), fh, indent=2, sort_keys=True)
                        fh.write("\n")
            e1, e2 = estimates[single.name], estimates[joint.name]
            comparison = bayes_factor(e1.log_evidence, e2.log_evidence, e1.mc_error, e2.mc_error,
                                      single.name, joint.name)
            comparison.to_json(self.path(f"comparison_{response}.json"))

    def evaluate(self) -> None:
        table = self.load_table()
        split = self.load_split()
        reports = []
        for response, *specs in self.specs():
            for spec in specs:
                report = evaluate(spec, self.load_posterior(spec.name), table, split, self.config.models.point)
                reports.append(report)
        write_eval_csv(self.path("evaluation.csv"), reports)

    def contour(self) -> None:
        c = self.config
        table = self.load_table()
        w1_name, w2_name = c.contour.predictors
        if not len(table):
            log.warning("contour skipped: no events")
            return
        w1 = axis(table[w1_name], c.contour.n_points, c.contour.w1_range)
        w2 = axis(table[w2_name], c.contour.n_points, c.contour.w2_range)
        priors = {k: tuple(v) for k, v in c.models.priors.items() if k in PARAMETERS[Form.MULTIPLICATIVE]}
        for response in c.models.responses:
            for flag in (1, 0):
                subset = table.where(table.precip_flag == flag)
                tag = f"{response}_precip{flag}"
                if len(subset) == 0 or (len(subset) < MIN_ROWS and not self.force):
                    log.warning("contour %s skipped: %d event(s) in regime", tag, len(subset))
                    continue
                regime = ModelSpec(Form.MULTIPLICATIVE, (w1_name, w2_name), response, priors,
                                   c.models.sigma_scale, c.models.transforms.get(response, "identity"),
                                   name=f"contour_{tag}")
                config = c.mcmc.build(self.seed(f"contour:{tag}"))
                result = run_mcmc(regime, subset, config, force=self.force)
                write_posterior(result, self.path(f"posterior_contour_{tag}.json"),
                                self.path(f"draws_contour_{tag}.csv"))
                grid = emit_contour(result, regime, w1, w2, flag)
                grid.to_csv(self.path(f"contour_{tag}.csv"))
                write_points(self.path(f"contour_{tag}_points.csv"), subset, regime)

    # -- orchestration ---------------------------------------------------

    def metadata(self) -> dict:
        c = self.config
        return {
            "software": {
                "package": "resilience",
                "version": software_version(),
                "python": platform.python_version(),
                "numpy": np.__version__,
            },
            "config": c.to_dict(),
            "seeds": {"top": c.seed, "stages": dict(sorted(self.seeds.items()))},
            "units": {**c.units, **c.convert_units},
            "source_units": dict(c.units),
            "notes": {
                "threshold": THRESHOLD_NOTE,
                "response_transforms": {r: c.models.transforms.get(r, "identity") for r in c.models.responses},
                "errors_scale": "RMSE and MAE are on each model's (transformed) response scale",
                "contour_scale": "contour z is mapped back to the natural response scale",
                "point_prediction": c.models.point,
                "customer_out": f"norm_customers_out is the {c.customer_out_measure} count over county customers",
            },
            "counts": self.counts,
            "stages_completed": list(self.completed),
        }

    def write_metadata(self, merge: bool) -> None:
        meta = self.metadata()
        path = self.path(METADATA)
        if merge and path.exists():
            with open(path, encoding="utf-8") as fh:
                old = json.load(fh)
            meta["seeds"]["stages"] = dict(sorted({**old.get("seeds", {}).get("stages", {}),
                                                   **meta["seeds"]["stages"]}.items()))
            meta["counts"] = {**old.get("counts", {}), **meta["counts"]}
            done = old.get("stages_completed", [])
            meta["stages_completed"] = [s for s in STAGES if s in done or s in self.completed]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def run(self, stages=STAGES) -> None:
        """Run ``stages`` in order; on failure leave a ``.partial`` marker naming the stage."""
        self.out.mkdir(parents=True, exist_ok=True)
        marker = self.path(PARTIAL)
        marker.unlink(missing_ok=True)
        full = tuple(stages) == STAGES
        for stage in stages:
            try:
                getattr(self, stage)()
            except ResilienceError as exc:
                marker.write_text(f"stage: {stage}\nerror: {exc}\n", encoding="utf-8")
                self.write_metadata(merge=not full)
                log.error("stage %s failed: %s", stage, exc)
                raise type(exc)(f"stage {stage}: {exc}") from exc
            self.completed.append(stage)
        self.write_metadata(merge=not full)


def run_pipeline(config: RunConfig, force: bool = False) -> Path:
    """Run every stage; returns the output directory."""
    Pipeline(config, force).run()
    return config.out_dir
