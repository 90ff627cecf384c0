"""Run records and deterministic results files.

Results files are versioned JSON with sorted keys and no timestamps, so a
repeated run with the same config and seed writes byte-identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from spotkd._kernels import BACKEND

RESULTS_VERSION = 1


@dataclass
class RunRecord:
    """Per-stage training log plus the final selection outcome."""

    stage: str
    seed: int
    config_hash: str
    strategy: Optional[str] = None
    metric_name: str = "val_edit"
    metric_mode: str = "max"
    train_loss: list = field(default_factory=list)
    val_metric: list = field(default_factory=list)
    unlabeled_batches: list = field(default_factory=list)
    best_epoch: int = -1
    best_value: float = 0.0
    checkpoint: Optional[str] = None
    test_report: Optional[dict] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "strategy": self.strategy,
            "metric_name": self.metric_name,
            "metric_mode": self.metric_mode,
            "train_loss": self.train_loss,
            "val_metric": self.val_metric,
            "unlabeled_batches": self.unlabeled_batches,
            "best_epoch": self.best_epoch,
            "best_value": self.best_value,
            "checkpoint": self.checkpoint,
            "test_report": self.test_report,
            "extra": self.extra,
        }


def results_payload(kind: str, body: dict) -> dict:
    return {
        "results_version": RESULTS_VERSION,
        "kind": kind,
        "kernel_backend": BACKEND,
        **body,
    }


def write_results(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2))
        fh.write("\n")
