"""Experiment configuration: one seed-complete file drives every command.

A persisted config is the single source of truth for a run — converter
operating point, simulation grid, dataset generation, model architecture,
training, optimizers, failure thresholds, and benchmark sizing all live in
one JSON document, so re-running any command from the same file reproduces
the same numbers. ``config_hash`` fingerprints the canonical serialization
for report provenance.

The JSON layout mirrors the dataclass tree: one object per section, field
names identical to the dataclass fields, tuples as arrays. A machine-
readable description ships as ``schemas/config.schema.json``. Unknown keys
are rejected rather than ignored so a typo cannot silently fall back to a
default.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field, replace

from .converter import ConverterParams, SimConfig, table_defaults
from .degradation import DegradationConstants, NoiseSpec, StressRanges, default_constants
from .errors import ValidationError
from .failure import FailureThresholds
from .forest import RfConfig
from .mlp import TrainConfig
from .pso import PsoConfig
from .smo import SmoConfig

CONFIG_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class DatasetConfig:
    """Synthetic degradation dataset settings (seed lives in noise.seed)."""

    n: int = 10_000
    coupling: float = 0.999
    min_fraction: float = 0.1
    ranges: StressRanges = field(default_factory=StressRanges)
    constants: DegradationConstants = field(default_factory=default_constants)
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def validate(self):
        if self.n < 1:
            raise ValidationError(f"dataset n must be >= 1, got {self.n}")
        if not 0.0 <= self.coupling <= 1.0:
            raise ValidationError(
                f"coupling must be in [0, 1], got {self.coupling}"
            )
        if not 0.0 < self.min_fraction < 1.0:
            raise ValidationError(
                f"min_fraction must be in (0, 1), got {self.min_fraction}"
            )
        self.ranges.validate()
        self.constants.validate()
        self.noise.validate()


@dataclass(frozen=True)
class ModelConfig:
    """Network shape and initialization for the regression model."""

    layer_sizes: tuple[int, ...] = (6, 64, 128, 64, 5)
    dropout: tuple[float, ...] = (0.2, 0.2, 0.0)
    init_scale: float = 0.1
    seed: int = 0

    def validate(self):
        if len(self.layer_sizes) < 2 or any(s < 1 for s in self.layer_sizes):
            raise ValidationError(
                f"layer_sizes needs >= 2 positive sizes, got {self.layer_sizes}"
            )
        if len(self.dropout) != len(self.layer_sizes) - 2:
            raise ValidationError(
                f"dropout needs one rate per hidden layer "
                f"({len(self.layer_sizes) - 2}), got {len(self.dropout)}"
            )
        if any(not 0.0 <= r < 1.0 for r in self.dropout):
            raise ValidationError(f"dropout rates must be in [0, 1), got {self.dropout}")
        if self.init_scale <= 0.0:
            raise ValidationError(f"init_scale must be > 0, got {self.init_scale}")


@dataclass(frozen=True)
class BenchConfig:
    """Desk-scale benchmark sizing (the full run stays under ~15 minutes)."""

    n_trials: int = 20
    analytic_iterations: int = 200
    identification_iterations: int = 25
    validation_cases: int = 10

    def validate(self):
        if self.n_trials < 1:
            raise ValidationError(f"n_trials must be >= 1, got {self.n_trials}")
        if self.analytic_iterations < 1 or self.identification_iterations < 1:
            raise ValidationError("benchmark iteration budgets must be >= 1")
        if self.validation_cases < 1:
            raise ValidationError(
                f"validation_cases must be >= 1, got {self.validation_cases}"
            )


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs, serializable to a single JSON file."""

    converter: ConverterParams = field(default_factory=table_defaults)
    sim: SimConfig = field(default_factory=SimConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    forest: RfConfig = field(default_factory=RfConfig)
    smo: SmoConfig = field(default_factory=SmoConfig)
    pso: PsoConfig = field(default_factory=PsoConfig)
    thresholds: FailureThresholds = field(default_factory=FailureThresholds)
    bench: BenchConfig = field(default_factory=BenchConfig)
    output_dir: str = "out"

    def validate(self):
        self.converter.validate()
        self.sim.validate(self.converter)
        self.dataset.validate()
        self.model.validate()
        self.train.validate()
        self.forest.validate()
        self.pso.validate()
        self.thresholds.validate()
        self.bench.validate()
        if not self.output_dir:
            raise ValidationError("output_dir must be a non-empty path")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Override every section's seed with one master seed."""
        return replace(
            self,
            dataset=replace(self.dataset, noise=replace(self.dataset.noise, seed=seed)),
            model=replace(self.model, seed=seed),
            train=replace(self.train, seed=seed),
            forest=replace(self.forest, seed=seed),
            smo=replace(self.smo, seed=seed),
            pso=replace(self.pso, seed=seed),
        )


def _coerce(value, hint, where: str):
    """Coerce a JSON value to the hinted field type, erroring loudly."""
    origin = typing.get_origin(hint)
    if origin is types.UnionType or origin is typing.Union:
        args = typing.get_args(hint)
        if value is None:
            if type(None) in args:
                return None
            raise ValidationError(f"{where}: null is not allowed")
        non_none = [a for a in args if a is not type(None)]
        return _coerce(value, non_none[0], where)
    if dataclasses.is_dataclass(hint):
        if not isinstance(value, dict):
            raise ValidationError(f"{where}: expected an object")
        return _build(hint, value, where)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ValidationError(f"{where}: expected an array")
        args = [a for a in typing.get_args(hint) if a is not Ellipsis]
        element_hint = args[0] if args else float
        return tuple(
            _coerce(v, element_hint, f"{where}[{i}]") for i, v in enumerate(value)
        )
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"{where}: expected an integer, got {value!r}")
        return value
    if hint is bool:
        if not isinstance(value, bool):
            raise ValidationError(f"{where}: expected true/false, got {value!r}")
        return value
    if hint is str:
        if not isinstance(value, str):
            raise ValidationError(f"{where}: expected a string, got {value!r}")
        return value
    return value


def _build(cls, data: dict, where: str):
    hints = typing.get_type_hints(cls)
    names = [f.name for f in dataclasses.fields(cls)]
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ValidationError(f"{where}: unknown fields {unknown}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in data:
            kwargs[f.name] = _coerce(data[f.name], hints[f.name], f"{where}.{f.name}")
        elif (
            f.default is dataclasses.MISSING
            and f.default_factory is dataclasses.MISSING
        ):
            raise ValidationError(f"{where}: missing required field '{f.name}'")
    return cls(**kwargs)


def config_to_dict(config: ExperimentConfig) -> dict:
    """Plain-JSON-types dict (tuples become lists) with a version marker."""
    payload = dataclasses.asdict(config)

    def listify(obj):
        if isinstance(obj, tuple):
            return [listify(v) for v in obj]
        if isinstance(obj, list):
            return [listify(v) for v in obj]
        if isinstance(obj, dict):
            return {k: listify(v) for k, v in obj.items()}
        return obj

    out = {"schema_version": CONFIG_SCHEMA_VERSION}
    out.update(listify(payload))
    return out


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    data = dict(data)
    version = data.pop("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise ValidationError(
            f"unsupported config schema_version {version} "
            f"(this build reads version {CONFIG_SCHEMA_VERSION})"
        )
    config = _build(ExperimentConfig, data, "config")
    config.validate()
    return config


def save_config(config: ExperimentConfig, path: str):
    with open(path, "w", encoding="utf-8") as stream:
        json.dump(config_to_dict(config), stream, indent=2, sort_keys=True)
        stream.write("\n")


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as stream:
        try:
            data = json.load(stream)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file {path} is not valid JSON: {exc}")
    return config_from_dict(data)


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical serialization; stable across field order."""
    canonical = json.dumps(
        config_to_dict(config), sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def default_config() -> ExperimentConfig:
    return ExperimentConfig()
