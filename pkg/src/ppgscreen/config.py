"""Pipeline configuration.

A nested frozen-dataclass tree mirroring one TOML document. Loading
rejects unknown keys at every level, so a typo fails loudly instead of
silently running defaults, and ``to_dict`` round-trips losslessly through
``from_dict`` so reports can embed the exact configuration they ran with.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Mapping, get_type_hints

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ppgscreen.dsp import CycleRules, FilterSpec
from ppgscreen.errors import ConfigError, MissingFileError


@dataclass(frozen=True)
class PathsConfig:
    metadata: str = "subjects.csv"
    signals: str = "signals"
    out: str = "out"


@dataclass(frozen=True)
class FilterConfig:
    order: int = 6
    cutoff_hz: float = 16.0
    mode: str = "zero_phase"

    def to_spec(self, sample_rate_hz: float) -> FilterSpec:
        return FilterSpec(order=self.order, cutoff_hz=self.cutoff_hz,
                          sample_rate_hz=sample_rate_hz, mode=self.mode)


@dataclass(frozen=True)
class FswConfig:
    window_s: float = 0.5
    min_gap_s: float = 0.4


@dataclass(frozen=True)
class CycleConfig:
    min_s: float = 0.4
    max_s: float = 1.5
    peak_prominence_frac: float = 0.5
    max_peak_pos_frac: float = 0.6

    def to_rules(self) -> CycleRules:
        return CycleRules(min_s=self.min_s, max_s=self.max_s,
                          peak_prominence_frac=self.peak_prominence_frac,
                          max_peak_pos_frac=self.max_peak_pos_frac)


@dataclass(frozen=True)
class LogRegConfig:
    penalty: float = 1.0
    tol: float = 1e-6
    max_sweeps: int = 1000

    def train_kwargs(self) -> dict:
        return {"penalty": self.penalty, "tol": self.tol,
                "max_sweeps": self.max_sweeps}


@dataclass(frozen=True)
class GbtConfig:
    rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 6
    leaf_penalty: float = 1.0
    min_child_count: int = 1

    def train_kwargs(self) -> dict:
        return {"rounds": self.rounds, "learning_rate": self.learning_rate,
                "max_depth": self.max_depth, "leaf_penalty": self.leaf_penalty,
                "min_child_count": self.min_child_count}


@dataclass(frozen=True)
class ModelConfig:
    logreg: LogRegConfig = field(default_factory=LogRegConfig)
    gbt: GbtConfig = field(default_factory=GbtConfig)


@dataclass(frozen=True)
class EvalSection:
    k: int = 5
    threshold: float = 0.5
    importance_repeats: int = 10
    compute_importance: bool = True


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    sample_rate_hz: float = 1000.0
    exclude_ids: tuple = ()
    paths: PathsConfig = field(default_factory=PathsConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    fsw: FswConfig = field(default_factory=FswConfig)
    cycle: CycleConfig = field(default_factory=CycleConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    eval: EvalSection = field(default_factory=EvalSection)


def _coerce(value, hint, path: str):
    if hint is bool:
        if isinstance(value, bool):
            return value
    elif hint is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif hint is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif hint is str:
        if isinstance(value, str):
            return value
    elif hint is tuple:
        if isinstance(value, (list, tuple)) and all(
                isinstance(v, str) for v in value):
            return tuple(value)
        raise ConfigError(f"{path} must be a list of strings")
    expected = getattr(hint, "__name__", str(hint))
    raise ConfigError(
        f"{path} expects {expected}, got {type(value).__name__} ({value!r})")


def _build(cls, data, path: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path or 'config'} must be a table, "
                          f"got {type(data).__name__}")
    hints = get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown config key {where}{unknown[0]!r}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        sub_path = f"{path}.{f.name}" if path else f.name
        hint = hints[f.name]
        if is_dataclass(hint):
            kwargs[f.name] = _build(hint, data[f.name], sub_path)
        else:
            kwargs[f.name] = _coerce(data[f.name], hint, sub_path)
    return cls(**kwargs)


def from_dict(data: Mapping) -> PipelineConfig:
    return _build(PipelineConfig, data, "")


def to_dict(config: PipelineConfig) -> dict:
    def convert(obj):
        if is_dataclass(obj):
            return {f.name: convert(getattr(obj, f.name))
                    for f in fields(obj)}
        if isinstance(obj, tuple):
            return list(obj)
        return obj
    return convert(config)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"config file not found: {path}")
    try:
        with path.open("rb") as handle:
            data = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return from_dict(data)


def apply_overrides(config: PipelineConfig,
                    overrides: Mapping[str, object]) -> PipelineConfig:
    """Set dotted keys (e.g. ``eval.k``) on a copy of the config.

    Values pass through the same validation as file loading, so an unknown
    or ill-typed override fails exactly like a bad config file.
    """
    data = to_dict(config)
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = data
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"unknown config key {dotted!r}")
            node = node[part]
        node[parts[-1]] = value
    return from_dict(data)
