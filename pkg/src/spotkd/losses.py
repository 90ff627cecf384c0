"""Training objectives and the annealed unlabeled-loss schedule.

All losses take raw logits and own their activation numerics (stable
log-sum-exp / softplus). Each loss has a ``*_grad`` twin returning
``(value, dlogits)`` so the model backward pass can be driven without an
autodiff graph; gradients never flow into label or pseudo-label arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from spotkd._num import sigmoid
from spotkd.exceptions import ConfigError, ShapeError
from spotkd.pseudo import PseudoLabels


def _check_coarse(logits, labels):
    z = np.asarray(logits, dtype=float)
    y = np.asarray(labels)
    if z.ndim < 1 or z.shape[-1] != 2:
        raise ShapeError(f"coarse logits must end in a size-2 axis, got {z.shape}")
    if y.shape != z.shape[:-1]:
        raise ShapeError(f"labels shape {y.shape} does not match logits {z.shape}")
    return z.reshape(-1, 2), y.reshape(-1).astype(np.int64)


def coarse_loss(logits, labels, fg_weight: float = 5.0) -> float:
    """Foreground-weighted softmax cross-entropy, normalized by the weight sum."""
    return coarse_loss_grad(logits, labels, fg_weight)[0]


def coarse_loss_grad(logits, labels, fg_weight: float = 5.0):
    if fg_weight <= 0:
        raise ConfigError(f"fg_weight must be positive, got {fg_weight}")
    orig_shape = np.shape(logits)
    z, y = _check_coarse(logits, labels)
    zmax = z.max(axis=1, keepdims=True)
    logsumexp = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    logp = z - logsumexp[:, None]
    w = np.where(y == 1, fg_weight, 1.0)
    wsum = w.sum()
    loss = float(-(w * logp[np.arange(len(y)), y]).sum() / wsum)

    probs = np.exp(logp)
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(y)), y] = 1.0
    dz = (w[:, None] * (probs - onehot)) / wsum
    return loss, dz.reshape(orig_shape)


def _check_fine(logits, targets):
    z = np.asarray(logits, dtype=float)
    y = np.asarray(targets, dtype=float)
    if z.shape != y.shape:
        raise ShapeError(f"fine logits {z.shape} and targets {y.shape} differ")
    return z, y


def fine_loss(logits, targets) -> float:
    """Element-wise binary cross-entropy with logits, averaged over all entries."""
    return fine_loss_grad(logits, targets)[0]


def fine_loss_grad(logits, targets):
    z, y = _check_fine(logits, targets)
    # max(z,0) - z*y + log(1 + exp(-|z|)) is the stable BCE-with-logits form.
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    n = per.size
    loss = float(per.sum() / n)
    dz = (sigmoid(z) - y) / n
    return loss, dz


def unlabeled_loss(coarse_logits, fine_logits, pseudo: PseudoLabels,
                   fg_weight: float = 5.0) -> float:
    """Coarse + fine loss against hard pseudo-labels (labels held constant)."""
    val, _, _ = unlabeled_loss_grad(coarse_logits, fine_logits, pseudo, fg_weight)
    return val


def unlabeled_loss_grad(coarse_logits, fine_logits, pseudo: PseudoLabels,
                        fg_weight: float = 5.0):
    if np.asarray(coarse_logits).shape[:-1] != pseudo.coarse.shape:
        raise ShapeError("pseudo-label shape does not match coarse predictions")
    lc, dc = coarse_loss_grad(coarse_logits, pseudo.coarse, fg_weight)
    lf, df = fine_loss_grad(fine_logits, pseudo.fine)
    return lc + lf, dc, df


@dataclass(frozen=True)
class AnnealSchedule:
    """Linear ramp of the unlabeled-loss weight: 0 before ``start``,
    ``target`` at and after ``end``."""

    start: int = 30
    end: int = 90
    target: float = 0.4
    shape: str = "linear"

    def __post_init__(self):
        if self.start >= self.end:
            raise ConfigError(f"anneal start {self.start} must precede end {self.end}")
        if self.target < 0:
            raise ConfigError(f"anneal target must be >= 0, got {self.target}")
        if self.shape != "linear":
            raise ConfigError(f"unsupported anneal shape {self.shape!r}")


def anneal_weight(epoch: int, sched: AnnealSchedule) -> float:
    """Unlabeled-loss weight at an epoch under the ramp schedule."""
    if epoch < sched.start:
        return 0.0
    if epoch >= sched.end:
        return sched.target
    return sched.target * (epoch - sched.start) / (sched.end - sched.start)


def total_stage1_loss(lab_loss: float, unlab_loss: float, epoch: int,
                      sched: AnnealSchedule) -> float:
    """Labeled loss plus the annealed unlabeled term; absent terms are 0."""
    return lab_loss + anneal_weight(epoch, sched) * unlab_loss


def distill_loss(teacher_emb, student_emb) -> float:
    """Mean squared error between student and frozen-teacher embeddings."""
    return distill_loss_grad(teacher_emb, student_emb)[0]


def distill_loss_grad(teacher_emb, student_emb):
    t = np.asarray(teacher_emb, dtype=float)
    s = np.asarray(student_emb, dtype=float)
    if t.shape != s.shape:
        raise ShapeError(f"embedding shapes differ: {t.shape} vs {s.shape}")
    diff = s - t
    n = diff.size
    loss = float((diff * diff).sum() / n)
    dstudent = 2.0 * diff / n
    return loss, dstudent
