"""YAML experiment files.

Schema (every key except ``cp_mode`` and ``scenarios`` is optional)::

    name: merge-v2x
    cp_mode: V2X                # NoFusion | V2V | V2X | I2X
    scenarios:                  # ScenarioSpec fields; seed comes from `seeds`
      - archetype: MergeRamp
        n_actors: 24
        occluder_density: 1.0
    seeds: [0, 1, 2, 3, 4]      # or an integer count
    noise: [Perfect, Simple]    # names, "Harsh(k)", mappings, or "sweep"
    range_shape: null           # Rectangle | Square | null (ego kind's default)
    fusion: IntermediateSum     # or {variant: IntermediateWeighted, weights: [...]}
    nofusion_ego: V             # V | I
    channel_seed: 0
    resolution: 0.4
    workers: 1
    output_dir: infracp_out

``workers`` and ``output_dir`` steer the run but are not part of the
experiment, so they stay out of the config embedded in reports.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .channel import NoiseSetting
from .fusion import FusionMethod
from .harness import ConfigError, ExperimentConfig
from .scene import ScenarioSpec

OUTPUT_ENV = "INFRACP_OUT"
DEFAULT_OUTPUT = "infracp_out"

_KEYS = {"name", "cp_mode", "scenarios", "seeds", "noise", "range_shape", "fusion", "nofusion_ego",
         "channel_seed", "resolution", "workers", "output_dir"}


@dataclass(frozen=True)
class RunOptions:
    workers: int = 1
    output_dir: str | None = None


def parse_noise(value: Any) -> tuple[NoiseSetting, ...]:
    if isinstance(value, str) and value.strip().lower() == "sweep":
        return tuple(NoiseSetting.sweep())
    items = value if isinstance(value, list) else [value]
    out = []
    for item in items:
        if isinstance(item, dict):
            out.append(NoiseSetting.from_dict(item))
        elif isinstance(item, str):
            out.append(NoiseSetting.parse(item))
        else:
            raise ConfigError(f"bad noise entry {item!r}")
    return tuple(out)


def parse_seeds(value: Any) -> tuple[int, ...]:
    if isinstance(value, bool):
        raise ConfigError("seeds must be a list or a count")
    if isinstance(value, int):
        if value < 1:
            raise ConfigError("seed count must be >= 1")
        return tuple(range(value))
    if isinstance(value, list) and all(isinstance(s, int) and not isinstance(s, bool) for s in value):
        return tuple(value)
    raise ConfigError("seeds must be a list of integers or a count")


def parse_fusion(value: Any) -> FusionMethod:
    if isinstance(value, str):
        return FusionMethod(value)
    if isinstance(value, dict):
        return FusionMethod.from_dict(value)
    raise ConfigError(f"bad fusion entry {value!r}")


def config_from_mapping(doc: Any) -> tuple[ExperimentConfig, RunOptions]:
    """Build a validated config; every failure surfaces as ConfigError."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(doc) - _KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("cp_mode", "scenarios"):
        if key not in doc:
            raise ConfigError(f"missing required key {key!r}")
    try:
        scen = doc["scenarios"]
        if not isinstance(scen, list) or not all(isinstance(s, dict) for s in scen):
            raise ConfigError("scenarios must be a list of mappings")
        kw: dict[str, Any] = {
            "name": str(doc.get("name", "experiment")),
            "cp_mode": doc["cp_mode"],
            "scenarios": tuple(ScenarioSpec.from_dict(s) for s in scen),
        }
        if "seeds" in doc:
            kw["seeds"] = parse_seeds(doc["seeds"])
        if "noise" in doc:
            kw["noise"] = parse_noise(doc["noise"])
        if doc.get("range_shape") is not None:
            kw["range_shape"] = doc["range_shape"]
        if "fusion" in doc:
            kw["fusion"] = parse_fusion(doc["fusion"])
        for key in ("nofusion_ego", "channel_seed", "resolution"):
            if key in doc:
                kw[key] = doc[key]
        cfg = ExperimentConfig(**kw)
        workers = int(doc.get("workers", 1))
        if workers < 1:
            raise ConfigError("workers must be >= 1")
        out = doc.get("output_dir")
        return cfg, RunOptions(workers, None if out is None else str(out))
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> tuple[ExperimentConfig, RunOptions]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_mapping(doc)


def dump_config(cfg: ExperimentConfig, opts: RunOptions = RunOptions()) -> str:
    doc = cfg.to_dict()
    doc["workers"] = opts.workers
    if opts.output_dir is not None:
        doc["output_dir"] = opts.output_dir
    return yaml.safe_dump(doc, sort_keys=False)


def resolve_output_dir(cli: str | None = None, configured: str | None = None) -> Path:
    """Command line beats the environment, which beats the config file."""
    return Path(cli or os.environ.get(OUTPUT_ENV) or configured or DEFAULT_OUTPUT)
