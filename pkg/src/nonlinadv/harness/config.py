"""Experiment configuration with a versioned schema.

Config files are YAML (JSON is accepted too, being a YAML subset). Defaults
follow the CIFAR training regime: 200 epochs, milestones 100/150, lr 0.1,
momentum 0.9, weight decay 1e-4; post-training 60 epochs, milestones 20/40.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from ..errors import InvalidSpec
from ..linearize import LinearizeConfig, RegularizerConfig
from ..tensornet.network import conv_resnet_config, dense_resnet_config
from .datasets import DatasetSpec

SCHEMA_VERSION = 1


@dataclass
class ArchitectureSpec:
    kind: str = "dense-resnet"  # dense-resnet | conv-resnet | custom
    blocks: int = 4
    width: int = 16
    width_factor: float = 1.0
    residual: bool = True
    batchnorm: bool = True
    layers: list | None = None  # custom only

    def build_config(self, input_shape, classes):
        if self.kind == "dense-resnet":
            if len(input_shape) != 1:
                raise InvalidSpec("dense-resnet needs flat inputs")
            return dense_resnet_config(input_shape[0], classes, self.width, self.blocks,
                                       self.residual, width_factor=self.width_factor,
                                       batchnorm=self.batchnorm)
        if self.kind == "conv-resnet":
            if len(input_shape) != 3 or input_shape[1] != input_shape[2]:
                raise InvalidSpec("conv-resnet needs square (C, H, W) inputs")
            w = max(1, int(round(self.width * self.width_factor)))
            return conv_resnet_config(input_shape[0], input_shape[1], classes, w, self.blocks,
                                      self.residual)
        if self.kind == "custom":
            if not self.layers:
                raise InvalidSpec("custom architecture needs a layer list")
            return {"input_shape": list(input_shape), "layers": copy.deepcopy(self.layers)}
        raise InvalidSpec(f"unknown architecture kind {self.kind!r}")


@dataclass
class PhaseConfig:
    epochs: int = 200
    lr: float = 0.1
    milestones: tuple = (100, 150)
    gamma: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 256


@dataclass
class LinearizePhaseConfig:
    epochs: int = 60
    lr: float = 0.1
    milestones: tuple | None = (20, 40)
    gamma: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 256
    omega: float = 0.003
    target: float | None = None
    band: float = 0.01
    slowdown_band: float = 0.05
    decay: float = 0.5
    freeze_threshold: float = 0.99
    delta: float = 1e-4
    regress_to_relu: bool = False

    def regularizer(self) -> RegularizerConfig:
        return RegularizerConfig(omega=self.omega, freeze_threshold=self.freeze_threshold,
                                 delta=self.delta, target=self.target, band=self.band,
                                 slowdown_band=self.slowdown_band, decay=self.decay,
                                 regress_to_relu=self.regress_to_relu)

    def to_linearize_config(self) -> LinearizeConfig:
        return LinearizeConfig(self.regularizer(), self.epochs, self.lr,
                               None if self.milestones is None else tuple(self.milestones),
                               self.gamma, self.momentum, self.weight_decay, self.batch_size)


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    architecture: ArchitectureSpec = field(default_factory=ArchitectureSpec)
    train: PhaseConfig = field(default_factory=PhaseConfig)
    linearize: LinearizePhaseConfig = field(default_factory=LinearizePhaseConfig)
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    # cut the training phase after this many epochs, then linearize
    linearize_at_epoch: int | None = None
    out_dir: str | None = None
    threads: int = 1

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise InvalidSpec(f"unsupported schema_version {self.schema_version}")
        self.dataset.validate()
        self.linearize.regularizer()
        for ph in (self.train, self.linearize):
            if ph.epochs < 0 or ph.lr <= 0 or ph.batch_size < 1:
                raise InvalidSpec("phase needs epochs >= 0, lr > 0, batch_size >= 1")
            ms = ph.milestones or ()
            if any(b <= a for a, b in zip(ms, list(ms)[1:])):
                raise InvalidSpec("milestones must be strictly increasing")
        if self.architecture.blocks < 0 or self.architecture.width < 1:
            raise InvalidSpec("architecture needs blocks >= 0 and width >= 1")
        if self.linearize_at_epoch is not None and not 0 <= self.linearize_at_epoch <= self.train.epochs:
            raise InvalidSpec("linearize_at_epoch must lie within the training epochs")
        if self.threads < 1:
            raise InvalidSpec("threads must be >= 1")
        return self

    def to_dict(self):
        return asdict(self)

    def digest(self):
        d = self.to_dict()
        d.pop("out_dir", None)
        d.pop("threads", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=list).encode()).hexdigest()

    def replace(self, **changes):
        """Deep copy with dotted-path overrides, e.g. ``{"linearize.omega": 0.01}``."""
        new = copy.deepcopy(self)
        for path, value in changes.items():
            obj = new
            *head, last = path.split(".")
            for part in head:
                obj = getattr(obj, part)
            if not hasattr(obj, last):
                raise InvalidSpec(f"unknown config field {path!r}")
            setattr(obj, last, value)
        return new


_SECTIONS = {"architecture": ArchitectureSpec, "train": PhaseConfig,
             "linearize": LinearizePhaseConfig, "dataset": DatasetSpec}


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    if "schema_version" not in d:
        raise InvalidSpec("config is missing schema_version")
    kwargs = {}
    top = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key, value in d.items():
        if key not in top:
            raise InvalidSpec(f"unknown config field {key!r}")
        if key in _SECTIONS:
            cls = _SECTIONS[key]
            names = {f.name for f in dataclasses.fields(cls)}
            unknown = set(value or {}) - names
            if unknown:
                raise InvalidSpec(f"unknown fields in {key}: {sorted(unknown)}")
            section = dict(value or {})
            if "milestones" in section and section["milestones"] is not None:
                section["milestones"] = tuple(section["milestones"])
            kwargs[key] = cls(**section)
        else:
            kwargs[key] = value
    return ExperimentConfig(**kwargs).validate()


def load_config(path) -> ExperimentConfig:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise InvalidSpec(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidSpec(f"{path}: expected a mapping at top level")
    return config_from_dict(doc)


def dump_config(config: ExperimentConfig) -> str:
    d = json.loads(json.dumps(config.to_dict(), default=list))
    return yaml.safe_dump(d, sort_keys=False)


def desk_config(**overrides) -> ExperimentConfig:
    """Scaled-down default: 5-class spirals, 4-block width-32 dense ResNet,
    30 training + 20 linearization epochs with milestones at 1/2, 3/4 and 1/3, 2/3."""
    cfg = ExperimentConfig(
        name="desk",
        architecture=ArchitectureSpec(blocks=4, width=32),
        train=PhaseConfig(epochs=30, lr=0.1, milestones=(15, 22), batch_size=64),
        linearize=LinearizePhaseConfig(epochs=20, lr=0.1, milestones=None, batch_size=64,
                                       omega=0.03),
        dataset=DatasetSpec(kind="spirals", classes=5, samples_per_class=300, noise=0.02,
                            turns=1.0),
    )
    return cfg.replace(**overrides).validate()
