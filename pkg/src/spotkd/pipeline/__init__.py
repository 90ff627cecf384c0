"""Training orchestration: stages, adaptive-weight distillation, ablation."""

from spotkd.pipeline.config import RunConfig, derived_seed
from spotkd.pipeline.records import RunRecord, write_results
from spotkd.pipeline.runner import (
    make_default_split,
    run_ablation,
    run_awd,
    run_benchmark,
    run_stage1,
    run_stage2,
    run_stage3,
)

__all__ = [
    "RunConfig",
    "RunRecord",
    "derived_seed",
    "make_default_split",
    "run_ablation",
    "run_awd",
    "run_benchmark",
    "run_stage1",
    "run_stage2",
    "run_stage3",
    "write_results",
]
