"""Experiment configuration: a strict JSON schema shared by all commands.

Unknown keys anywhere in the file are rejected, so typos fail loudly
instead of silently running defaults. The config hash identifies the
fully-resolved configuration and is embedded in checkpoints and run
summaries.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .augment import AugmentConfig
from .decode import CONTEXT_GRID, MEDIAN_GRID
from .models import DEFAULT_CLASSES, DIM_PRESETS, FBCRNN_MODES


class ConfigError(ValueError):
    pass


def _check_keys(d: dict, cls, where: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


@dataclass
class DataConfig:
    manifests: dict = field(default_factory=dict)
    stats: str = ""
    root: str = ""

    @classmethod
    def from_dict(cls, d: dict) -> "DataConfig":
        _check_keys(d, cls, "data")
        return cls(**d)


@dataclass
class ModelConfig:
    kind: str = "fbcrnn"
    mode: str = "fbcrnn"
    conditioned: bool = True
    dims_preset: str = "toy"

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        _check_keys(d, cls, "model")
        out = cls(**d)
        if out.kind not in ("fbcrnn", "tagcnn"):
            raise ConfigError(f"model.kind: unknown kind {out.kind!r}")
        if out.mode not in FBCRNN_MODES:
            raise ConfigError(f"model.mode: unknown mode {out.mode!r}")
        if out.dims_preset not in DIM_PRESETS:
            raise ConfigError(f"model.dims_preset: unknown preset {out.dims_preset!r}")
        return out


@dataclass
class TrainConfig:
    total_steps: int = 2000
    checkpoint_every: int = 100
    batch_size: int = 8
    selection_objective: str = ""

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        _check_keys(d, cls, "train")
        out = cls(**d)
        if out.total_steps % out.checkpoint_every != 0:
            raise ConfigError("train.checkpoint_every must divide train.total_steps")
        return out


@dataclass
class DecodeConfig:
    contexts: tuple = CONTEXT_GRID
    medians: tuple = MEDIAN_GRID
    threshold_start: float = 0.02
    threshold_stop: float = 0.98
    threshold_step: float = 0.02

    @classmethod
    def from_dict(cls, d: dict) -> "DecodeConfig":
        _check_keys(d, cls, "decode")
        out = cls(**d)
        out.contexts = tuple(out.contexts)
        out.medians = tuple(out.medians)
        if any(m % 2 == 0 for m in out.medians):
            raise ConfigError("decode.medians must be odd")
        return out

    def threshold_grid(self) -> tuple:
        import numpy as np

        n = int(round((self.threshold_stop - self.threshold_start) / self.threshold_step)) + 1
        return tuple(np.round(self.threshold_start + self.threshold_step * np.arange(n), 6))


@dataclass
class ExperimentConfig:
    seed: int = 0
    classes: tuple = DEFAULT_CLASSES
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        _check_keys(d, cls, "config")
        aug = d.get("augment", {})
        allowed = {f.name for f in fields(AugmentConfig)}
        unknown = set(aug) - allowed
        if unknown:
            raise ConfigError(f"augment: unknown keys {sorted(unknown)}")
        if "warp_factor_range" in aug:
            aug = dict(aug, warp_factor_range=tuple(aug["warp_factor_range"]))
        if "warp_knot_range" in aug:
            aug = dict(aug, warp_knot_range=tuple(aug["warp_knot_range"]))
        return cls(
            seed=int(d.get("seed", 0)),
            classes=tuple(d.get("classes", DEFAULT_CLASSES)),
            data=DataConfig.from_dict(d.get("data", {})),
            model=ModelConfig.from_dict(d.get("model", {})),
            train=TrainConfig.from_dict(d.get("train", {})),
            augment=AugmentConfig(**aug),
            decode=DecodeConfig.from_dict(d.get("decode", {})),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            payload = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(payload)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classes"] = list(self.classes)
        d["decode"]["contexts"] = list(self.decode.contexts)
        d["decode"]["medians"] = list(self.decode.medians)
        d["augment"]["warp_factor_range"] = list(self.augment.warp_factor_range)
        d["augment"]["warp_knot_range"] = list(self.augment.warp_knot_range)
        return d

    def save(self, path):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
