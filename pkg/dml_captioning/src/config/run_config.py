"""Effective run configuration: preset, then config file, then command-line flags."""

import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from ..errors import ConfigError
from ..model.config import ModelConfig
from ..training.trainer import TrainConfig
from .presets import preset_defaults

logger = logging.getLogger(__name__)

SECTIONS = {"model": ModelConfig, "train": TrainConfig}
TOP_LEVEL_KEYS = {"preset", "paths", *SECTIONS}


@dataclass(frozen=True)
class RunConfig:
    preset: str
    model: ModelConfig
    train: TrainConfig
    paths: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "preset": self.preset,
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "paths": dict(self.paths),
        }

    def checkpoint_extras(self) -> Dict[str, Any]:
        """Everything except paths, which do not affect results."""
        return {"preset": self.preset}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _field_names(cls: type) -> set:
    return {f.name for f in fields(cls)}


def _check_section(section: str, values: Mapping[str, Any], source: str) -> None:
    if not isinstance(values, Mapping):
        raise ConfigError(f"{source}: section '{section}' must be an object")
    unknown = sorted(set(values) - _field_names(SECTIONS[section]))
    if unknown:
        raise ConfigError(f"{source}: unknown {section} keys {unknown}")


def load_config_file(path: Path) -> Dict[str, Any]:
    """Read a JSON config file and reject any key the run config does not know."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(payload) - TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    for section in SECTIONS:
        if section in payload:
            _check_section(section, payload[section], str(path))
    return payload


def build_run_config(
    preset: Optional[str] = None,
    config_file: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    paths: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Merge preset defaults, an optional config file and flag overrides.

    Overrides use dotted keys (`model.k`, `train.masking`); None values are
    treated as "flag not given".
    """
    file_values = load_config_file(config_file) if config_file else {}
    name = preset or file_values.get("preset") or "desk"
    merged = preset_defaults(name)
    for section in SECTIONS:
        merged[section].update(file_values.get(section, {}))

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, name_ = key.partition(".")
        if section not in SECTIONS or name_ not in _field_names(SECTIONS[section]):
            raise ConfigError(f"unknown setting '{key}'")
        merged[section][name_] = value

    merged_paths = {k: str(v) for k, v in dict(file_values.get("paths", {})).items()}
    merged_paths.update({k: str(v) for k, v in (paths or {}).items() if v is not None})
    try:
        model = ModelConfig(**merged["model"])
        train = TrainConfig(preset=name, **{k: v for k, v in merged["train"].items() if k != "preset"})
    except TypeError as e:
        raise ConfigError(f"invalid configuration: {e}")
    return RunConfig(preset=name, model=model, train=train, paths=merged_paths)
