"""Run configuration: one dataclass covering data, model, schedule, and output."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

from spotkd.datagen import GenConfig
from spotkd.exceptions import ConfigError
from spotkd.losses import AnnealSchedule

STRATEGIES = ("labeled_only", "joint", "delayed", "best_continuation")


def derived_seed(seed: int, tag: str) -> int:
    """Independent 63-bit seed for a named purpose within a run."""
    digest = hashlib.sha256(f"{seed}:{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass(frozen=True)
class RunConfig:
    data: GenConfig = field(default_factory=GenConfig)
    k: int = 25
    n_val: int = 40
    n_test: int = 40
    seed: int = 0
    seeds: tuple[int, ...] = (0, 1, 2)
    strategy: str = "best_continuation"
    stage1_epochs: int = 100
    stage2_epochs: int = 50
    stage3_epochs: int = 30
    anneal: AnnealSchedule = field(default_factory=AnnealSchedule)
    base_lr: float = 1e-3
    warmup_epochs: int = 3
    weight_decay: float = 0.01
    fg_weight: float = 5.0
    batch_size: int = 8
    steps_per_epoch: int = 8
    hidden: int = 32
    embed: int = 32
    knn_k: int = 5
    mapping_refresh: int = 0  # 0 = build the reliability mapping once
    decode_thresh: float = 0.5
    nms_window: int = 1
    delta: int = 1
    out_dir: str = "runs"

    def __post_init__(self):
        for name in ("stage1_epochs", "stage2_epochs", "stage3_epochs",
                     "batch_size", "steps_per_epoch", "hidden", "embed",
                     "k", "knn_k"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("n_val", "n_test", "mapping_refresh", "delta", "nms_window"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(
                f"strategy must be one of {STRATEGIES}, got {self.strategy!r}"
            )
        if self.strategy in ("delayed", "best_continuation") \
                and self.anneal.start > self.stage1_epochs:
            raise ConfigError(
                f"{self.strategy} needs anneal start {self.anneal.start} "
                f"<= stage1_epochs {self.stage1_epochs}"
            )
        if not 0 <= self.warmup_epochs < min(self.stage1_epochs,
                                             self.stage2_epochs,
                                             self.stage3_epochs):
            raise ConfigError(
                f"warmup_epochs {self.warmup_epochs} must fit in every stage budget"
            )
        # k + n_val against the pool size is checked at split time: a config
        # may legitimately describe a generation-only pool of another size.

    def to_dict(self) -> dict:
        d = {
            name: getattr(self, name)
            for name in (
                "k", "n_val", "n_test", "seed", "strategy",
                "stage1_epochs", "stage2_epochs", "stage3_epochs",
                "base_lr", "warmup_epochs", "weight_decay", "fg_weight",
                "batch_size", "steps_per_epoch", "hidden", "embed",
                "knn_k", "mapping_refresh", "decode_thresh", "nms_window",
                "delta", "out_dir",
            )
        }
        d["seeds"] = list(self.seeds)
        d["data"] = self.data.to_dict()
        d["anneal"] = {
            "start": self.anneal.start, "end": self.anneal.end,
            "target": self.anneal.target, "shape": self.anneal.shape,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        data = d.pop("data", None)
        anneal = d.pop("anneal", None)
        if "seeds" in d:
            d["seeds"] = tuple(d["seeds"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(d)
        if data is not None:
            kwargs["data"] = data if isinstance(data, GenConfig) else GenConfig.from_dict(data)
        if anneal is not None:
            kwargs["anneal"] = anneal if isinstance(anneal, AnnealSchedule) \
                else AnnealSchedule(**anneal)
        return cls(**kwargs)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed)

    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()
