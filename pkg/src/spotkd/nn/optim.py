"""Adaptive-moment optimizer with decoupled weight decay, and the LR schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from spotkd.exceptions import NumericError, ShapeError
from spotkd.nn.model import ModelState


@dataclass
class OptState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


def opt_step(state: ModelState, grads, lr: float, beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8,
             weight_decay: float = 0.0) -> ModelState:
    """One decoupled-weight-decay adaptive update; mutates and returns ``state``."""
    g = np.asarray(grads, dtype=float)
    if g.shape != state.params.shape:
        raise ShapeError(f"grad shape {g.shape} != params {state.params.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericError("non-finite gradients")
    if state.opt is None:
        state.opt = OptState(m=np.zeros_like(state.params),
                             v=np.zeros_like(state.params))
    o = state.opt
    o.step += 1
    o.m *= beta1
    o.m += (1.0 - beta1) * g
    o.v *= beta2
    o.v += (1.0 - beta2) * g * g
    mhat = o.m / (1.0 - beta1 ** o.step)
    vhat = o.v / (1.0 - beta2 ** o.step)
    state.params -= lr * (mhat / (np.sqrt(vhat) + eps) + weight_decay * state.params)
    return state


def lr_at(epoch: int, base_lr: float, warmup: int, total: int) -> float:
    """Linear warmup to ``base_lr`` then cosine decay to 0 over the remainder."""
    if not 0 <= epoch < total:
        raise ValueError(f"epoch {epoch} outside [0, {total})")
    if not 0 <= warmup < total:
        raise ValueError(f"warmup {warmup} must lie in [0, {total})")
    if epoch < warmup:
        return base_lr * (epoch + 1) / warmup
    span = total - warmup
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * (epoch - warmup) / span))
