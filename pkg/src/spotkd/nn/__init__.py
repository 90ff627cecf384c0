"""Small differentiable temporal model with hand-derived analytic gradients."""

from spotkd.nn.model import (
    EncoderArch,
    ModelArch,
    ModelState,
    detect,
    forward_batch,
    backward_batch,
    forward_student,
    forward_teacher,
    fuse,
    init_model,
)
from spotkd.nn.optim import OptState, lr_at, opt_step
from spotkd.nn.checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "EncoderArch",
    "ModelArch",
    "ModelState",
    "OptState",
    "backward_batch",
    "detect",
    "forward_batch",
    "forward_student",
    "forward_teacher",
    "fuse",
    "init_model",
    "load_checkpoint",
    "lr_at",
    "opt_step",
    "save_checkpoint",
]
