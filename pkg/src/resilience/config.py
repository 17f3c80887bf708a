"""Declarative run configuration loaded from YAML.

Precedence, lowest to highest: dataclass defaults, the YAML file, then
command-line flags. Relative paths in the file resolve against the file's
own directory.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .ingestion import FIELD_QUANTITY, OutageColumns, StudyWindow, WeatherColumns, get_zone, unit_converter
from .inference.evidence import SteppingStoneConfig
from .inference.models import PARAMETERS, Form, ModelSpec
from .inference.sampler import MCMCConfig


@dataclass
class Paths:
    outages: str = ""
    weather: list[str] = field(default_factory=list)
    out_dir: str = "out"


@dataclass
class Thresholds:
    gap_hours: float = 3.0
    magnitude: float = 50.0
    forward_fill_limit: int = 3


@dataclass
class ModelConfig:
    responses: list[str] = field(default_factory=lambda: ["norm_customers_out", "auc_customer_hours"])
    transforms: dict[str, str] = field(default_factory=lambda: {"auc_customer_hours": "log1p"})
    single: list[str] = field(default_factory=lambda: ["peak_wind_gust"])
    joint: list[str] = field(default_factory=lambda: ["peak_wind_gust", "peak_air_temp"])
    joint_form: str = "multiplicative"
    priors: dict[str, list[float]] = field(default_factory=dict)
    sigma_scale: float | None = None
    point: str = "mean_params"


@dataclass
class SamplerSettings:
    n_chains: int = 4
    n_warmup: int = 2000
    n_draws: int = 2000
    target_accept: float = 0.234
    adapt: str = "full"
    rhat_max: float = 1.1
    n_init: int = 100
    collapse: bool = True
    jump_prob: float = 0.3

    def build(self, seed: int) -> MCMCConfig:
        return MCMCConfig(seed=seed, **dataclasses.asdict(self))


@dataclass
class EvidenceSettings:
    n_rungs: int = 32
    ladder: str = "geometric"
    beta_min: float = 1e-6
    n_warmup: int = 1000
    n_draws: int = 2000

    def build(self, sampler: SamplerSettings, seed: int) -> SteppingStoneConfig:
        mcmc = sampler.build(seed).replace(n_warmup=self.n_warmup, n_draws=self.n_draws)
        return SteppingStoneConfig(self.n_rungs, self.ladder, self.beta_min, mcmc=mcmc)


@dataclass
class SplitSettings:
    test: float = 0.20
    val: float = 0.16
    train: float = 0.64
    stratify: str | None = "precip_flag"

    @property
    def fractions(self) -> dict[str, float]:
        return {"test": self.test, "val": self.val, "train": self.train}


@dataclass
class ContourSettings:
    predictors: list[str] = field(default_factory=lambda: ["peak_wind_gust", "peak_air_temp"])
    n_points: int = 100
    w1_range: list[float] | None = None
    w2_range: list[float] | None = None


@dataclass
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    county: str = ""
    state: str = ""
    county_total_customers: int = 0
    window_start: str = ""
    window_end: str = ""
    timezone: str = "UTC"
    weather_timezone: str = "UTC"
    thresholds: Thresholds = field(default_factory=Thresholds)
    units: dict[str, str] = field(default_factory=lambda: {
        "wind_speed": "knots", "wind_gust": "knots", "air_temp": "degF", "precip_depth": "inches",
    })
    convert_units: dict[str, str] = field(default_factory=dict)  # field -> target unit
    customer_out_measure: str = "peak"
    outage_columns: dict[str, str] = field(default_factory=dict)
    weather_columns: dict[str, str] = field(default_factory=dict)
    missing_tokens: list[str] = field(default_factory=lambda: ["", "M"])
    temperature_feature: str = "max"
    write_grid: bool = True
    seed: int = 0
    models: ModelConfig = field(default_factory=ModelConfig)
    mcmc: SamplerSettings = field(default_factory=SamplerSettings)
    evidence: EvidenceSettings = field(default_factory=EvidenceSettings)
    split: SplitSettings = field(default_factory=SplitSettings)
    contour: ContourSettings = field(default_factory=ContourSettings)

    def validate(self) -> "RunConfig":
        t = self.thresholds
        if not (t.gap_hours > 0 and t.magnitude > 0 and t.forward_fill_limit > 0):
            raise ConfigError("thresholds must be positive")
        if not self.county or not self.state:
            raise ConfigError("county and state are required")
        if not self.county_total_customers > 0:
            raise ConfigError("county_total_customers must be > 0")
        self.window  # start < end
        get_zone(self.timezone)
        get_zone(self.weather_timezone)
        for name, unit in self.convert_units.items():
            if name not in FIELD_QUANTITY:
                raise ConfigError(f"convert_units: unknown field {name!r}")
            if name not in self.units:
                raise ConfigError(f"convert_units: source unit of {name!r} missing from units")
            unit_converter(FIELD_QUANTITY[name], self.units[name], unit)
        if self.customer_out_measure not in ("peak", "cumulative"):
            raise ConfigError("customer_out_measure must be 'peak' or 'cumulative'")
        if self.temperature_feature not in ("max", "min"):
            raise ConfigError("temperature_feature must be 'max' or 'min'")
        if self.models.point not in ("mean_params", "predictive_mean"):
            raise ConfigError("models.point must be 'mean_params' or 'predictive_mean'")
        if not self.contour.n_points >= 2:
            raise ConfigError("contour.n_points must be >= 2")
        for r in (self.contour.w1_range, self.contour.w2_range):
            if r is not None and not (len(r) == 2 and r[0] < r[1]):
                raise ConfigError(f"contour range {r} must be [low, high] with low < high")
        if self.split.stratify not in (None, "precip_flag"):
            raise ConfigError("split.stratify must be precip_flag or null")
        known = {p for names in PARAMETERS.values() for p in names}
        unknown = set(self.models.priors) - known
        if unknown:
            raise ConfigError(f"models.priors: unknown parameter(s) {sorted(unknown)}")
        # Build once so model, sampler and ladder settings fail early.
        self.model_specs("norm_customers_out")
        self.mcmc.build(self.seed)
        self.evidence.build(self.mcmc, self.seed)
        OutageColumns(**self.outage_columns)
        WeatherColumns(**self.weather_columns)
        return self

    @property
    def window(self) -> StudyWindow:
        try:
            return StudyWindow.from_dates(str(self.window_start), str(self.window_end))
        except ValueError as exc:
            raise ConfigError(f"bad study window: {exc}") from None

    @property
    def out_dir(self) -> Path:
        return Path(self.paths.out_dir)

    def model_specs(self, response: str) -> tuple[ModelSpec, ModelSpec]:
        """(single, joint) specs for one response."""
        m = self.models
        priors = {k: tuple(v) for k, v in m.priors.items()}
        transform = m.transforms.get(response, "identity")

        def spec(form: Form, predictors, label):
            own = {k: v for k, v in priors.items() if k in PARAMETERS[form]}
            return ModelSpec(form, tuple(predictors), response, own, m.sigma_scale, transform,
                             name=f"{label}_{response}")

        try:
            return (spec(Form.SINGLE_EXP, m.single, "single"),
                    spec(Form(m.joint_form), m.joint, "joint"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, data: Any, where: str):
    if not dataclasses.is_dataclass(cls):
        return data
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        nested = _nested_type(fields[name])
        kwargs[name] = _build(nested, value, f"{where}.{name}".lstrip(".")) if nested else value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from None


def _nested_type(f: dataclasses.Field):
    for cls in (Paths, Thresholds, ModelConfig, SamplerSettings, EvidenceSettings, SplitSettings, ContourSettings):
        if f.type == cls.__name__ or f.type is cls:
            return cls
    return None


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Read YAML at ``path`` (or start from defaults), apply ``overrides``, validate.

    ``overrides`` maps dotted keys such as ``"paths.out_dir"`` to values.
    """
    data: dict = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            with open(path, encoding="utf-8") as fh:
                data = yaml.safe_load(fh) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from None
        base = path.resolve().parent
    for key, value in (overrides or {}).items():
        node = data
        *parents, leaf = key.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    config = _build(RunConfig, data, "")
    _resolve_paths(config, base)
    return config.validate()


def _resolve_paths(config: RunConfig, base: Path) -> None:
    def resolve(p: str) -> str:
        return str(p) if not p or Path(p).is_absolute() else str(base / p)

    config.paths.outages = resolve(config.paths.outages)
    if isinstance(config.paths.weather, str):
        config.paths.weather = [config.paths.weather]
    config.paths.weather = [resolve(p) for p in config.paths.weather]
    config.paths.out_dir = resolve(config.paths.out_dir)
