"""Declarative run configuration with file/flag layering.

Precedence: command-line overrides > config file > defaults. A config
describes exactly one data source (synthetic generator or real rasters)
and one root seed from which every component derives its own stream, so
split, initialization, augmentation and search can be varied
independently without coupling.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from roofclass.errors import ConfigError

TASKS = ("roof_type", "roof_material", "joint")
STRATEGIES = ("rgb_only", "lidar_only", "feature_concat", "softmax_mean", "softmax_concat")


def derive_seed(root_seed: int, *scope) -> int:
    """Stable per-component seed derived from the root seed and a scope path.

    Kept within 32 bits so every consumer (numpy, torch, scikit-learn
    random_state) accepts it unchanged.
    """
    text = f"{root_seed}|" + "|".join(str(s) for s in scope)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass
class DataConfig:
    mode: str = "synthetic"
    dataset_dir: str = "dataset"
    # synthetic generator
    n_samples: int = 400
    noise: float = 0.3
    side: int = 32
    # real data inputs
    rgb_raster: str | None = None
    dsm: str | None = None
    dtm: str | None = None
    ndsm: str | None = None  # precomputed alternative to dsm+dtm
    footprints: str | None = None
    labels: str | None = None
    patch_scale: float = 1.5

    def validate(self):
        if self.mode not in ("synthetic", "real"):
            raise ConfigError(f"data.mode must be 'synthetic' or 'real', got {self.mode!r}")
        if self.mode == "real":
            if not self.rgb_raster or not self.footprints or not self.labels:
                raise ConfigError("real mode needs data.rgb_raster, data.footprints, data.labels")
            if not self.ndsm and not (self.dsm and self.dtm):
                raise ConfigError("real mode needs data.ndsm or both data.dsm and data.dtm")

    def require_paths(self):
        wanted = [self.rgb_raster, self.footprints, self.labels, self.ndsm, self.dsm, self.dtm]
        missing = [p for p in wanted if p and not Path(p).exists()]
        if missing:
            raise ConfigError(f"configured paths do not exist: {missing}")


@dataclass
class SplitConfig:
    train_frac: float = 0.75
    region_constraint: str | None = None


@dataclass
class BackboneConfig:
    arch: str = "tiny_test"
    input_side: int = 0
    embedding_dim: int = 0
    pretrained: bool = False


@dataclass
class TrainSection:
    learning_rate: float = 1e-5
    batch_size: int = 32
    max_epochs: int = 30
    plateau_factor: float = 0.1
    plateau_patience: int = 7
    min_delta: float = 0.0
    val_fraction: float = 0.1
    augment: bool = False


@dataclass
class FusionConfig:
    strategy: str = "feature_concat"
    downstream: str = "LR"
    folds: int = 5
    n_random: int = 30

    def validate(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown fusion.strategy {self.strategy!r}")
        if self.downstream not in ("LR", "RF", "SVM"):
            raise ConfigError(f"unknown fusion.downstream {self.downstream!r}")


@dataclass
class RunConfig:
    task: str = "roof_type"
    seed: int = 0
    deterministic: bool = True
    output_dir: str = "runs/run"
    data: DataConfig = field(default_factory=DataConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    rgb_model: BackboneConfig = field(default_factory=BackboneConfig)
    lidar_model: BackboneConfig = field(default_factory=BackboneConfig)
    train: TrainSection = field(default_factory=TrainSection)
    fusion: FusionConfig = field(default_factory=FusionConfig)

    def validate(self) -> "RunConfig":
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}, expected one of {TASKS}")
        self.data.validate()
        self.fusion.validate()
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def component_seed(self, *scope) -> int:
        return derive_seed(self.seed, *scope)


_SECTIONS = {
    "data": DataConfig,
    "split": SplitConfig,
    "rgb_model": BackboneConfig,
    "lidar_model": BackboneConfig,
    "train": TrainSection,
    "fusion": FusionConfig,
}


def _build_section(cls, values: dict, prefix: str):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys under '{prefix}': {sorted(unknown)}")
    return cls(**values)


def config_from_dict(doc: dict) -> RunConfig:
    doc = dict(doc or {})
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = doc.pop(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"config section '{name}' must be a mapping")
        kwargs[name] = _build_section(cls, section, name)
    top_known = {f.name for f in fields(RunConfig)} - set(_SECTIONS)
    unknown = set(doc) - top_known
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    kwargs.update(doc)
    return RunConfig(**kwargs).validate()


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply 'dotted.path=value' overrides; values parsed as YAML scalars."""
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        node = doc
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} collides with a scalar")
        node[parts[-1]] = value
    return doc


def load_config(path: str | None = None, overrides: list[str] | None = None) -> RunConfig:
    """Read a YAML or JSON config file, then layer command-line overrides."""
    doc: dict = {}
    if path:
        text = Path(path).read_text()
        doc = yaml.safe_load(text) if not str(path).endswith(".json") else json.loads(text)
        if doc is None:
            doc = {}
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config root must be a mapping")
    apply_overrides(doc, overrides or [])
    return config_from_dict(doc)
