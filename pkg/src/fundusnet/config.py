"""Run configuration: defaults < TOML file < command-line flags."""

import json
import os
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .dataset.synth import SynthConfig
from .errors import ConfigError
from .model.spec import ARCH_ALIASES, ARCHITECTURES
from .preprocess.config import EnhanceConfig
from .training.config import TrainConfig

DATA_ROOT_ENV = "FUNDUSNET_DATA_ROOT"
NESTED = ("enhance", "train", "synth")
TOML_SECTIONS = (*NESTED, "run")


def data_root() -> Path | None:
    root = os.environ.get(DATA_ROOT_ENV)
    return Path(root) if root else None


def load_config_file(path: str | os.PathLike) -> dict[str, dict[str, Any]]:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    unknown = set(data) - set(TOML_SECTIONS)
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    return data


@dataclass(frozen=True)
class RunConfig:
    command: str
    manifest: Path | None = None
    out: Path | None = None
    seed: int = 0
    arch: str = "compact"
    classes: int = 5
    split: float | None = None
    workers: int = 1
    size: int | None = None
    runs_db: Path | None = None
    enhance: EnhanceConfig = field(default_factory=EnhanceConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def __post_init__(self):
        object.__setattr__(self, "arch", ARCH_ALIASES.get(self.arch, self.arch))
        if self.arch not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.arch!r}, expected one of {sorted(ARCHITECTURES)}")
        if self.classes < 2:
            raise ConfigError(f"classes must be >= 2, got {self.classes}")
        if self.split is not None and not 0.0 < self.split < 1.0:
            raise ConfigError(f"split must lie in (0, 1), got {self.split}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.size is not None and self.size < 1:
            raise ConfigError(f"size must be >= 1, got {self.size}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "manifest": None if self.manifest is None else str(self.manifest),
            "out": None if self.out is None else str(self.out),
            "seed": self.seed,
            "arch": self.arch,
            "classes": self.classes,
            "split": self.split,
            "workers": self.workers,
            "size": self.size,
            "runs_db": None if self.runs_db is None else str(self.runs_db),
            "enhance": self.enhance.to_dict(),
            "train": self.train.to_dict(),
            "synth": self.synth.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _overlay(base: dict, *layers: dict) -> dict:
    merged = dict(base)
    for layer in layers:
        merged.update({k: v for k, v in layer.items() if v is not None})
    return merged


def resolve_run_config(
    command: str,
    file_sections: dict[str, dict[str, Any]] | None = None,
    run: dict[str, Any] | None = None,
    enhance: dict[str, Any] | None = None,
    train: dict[str, Any] | None = None,
    synth: dict[str, Any] | None = None,
) -> RunConfig:
    """Merge file sections and flag overrides; ``None`` flag values keep the lower layer."""
    sections = file_sections or {}
    run_values = _overlay({}, sections.get("run", {}), run or {})
    allowed = set(RunConfig.__dataclass_fields__) - {"command", *NESTED}
    unknown = set(run_values) - allowed
    if unknown:
        raise ConfigError(f"unknown run settings: {sorted(unknown)}")
    for key in ("manifest", "out", "runs_db"):
        if run_values.get(key) is not None:
            run_values[key] = Path(run_values[key])
    try:
        return RunConfig(
            command=command,
            enhance=EnhanceConfig.from_dict(_overlay(sections.get("enhance", {}), enhance or {})),
            train=TrainConfig.from_dict(_overlay(sections.get("train", {}), train or {})),
            synth=SynthConfig.from_dict(_overlay(sections.get("synth", {}), synth or {})),
            **run_values,
        )
    except TypeError as e:
        raise ConfigError(f"invalid setting: {e}") from e
