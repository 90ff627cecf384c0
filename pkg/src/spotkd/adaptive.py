"""Adaptive teacher weighting for prediction-level distillation.

On unlabeled clips the student learns from the teacher's post-processed hard
outputs, scaled by a reliability weight ``W = 1 / (1 + p(d - 1))`` clipped to
[0, 1], where ``p`` marks the teacher wrong/right and ``d`` is a smoothed
ratio of teacher-student mismatches to student-truth mismatches. Since
neither is observable on unlabeled data, a validation set provides a
nearest-neighbor regression from (student, teacher) clip confidences to the
averaged ``(p, d)`` targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from spotkd._num import sigmoid
from spotkd.exceptions import DataError, NumericError, ShapeError
from spotkd.losses import coarse_loss_grad, fine_loss_grad
from spotkd.pseudo import PseudoLabels, fine_label_postprocess
from spotkd.schema import LabelSchema


def _hard_pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"label vectors differ in length: {a.shape} vs {b.shape}")
    return a, b


def teacher_correctness(teacher_hard, gt) -> int:
    """0 when the teacher's hard vector matches ground truth exactly, else 1."""
    t, g = _hard_pair(teacher_hard, gt)
    return 0 if np.array_equal(t, g) else 1


def distortion_ratio(teacher_hard, student_hard, gt) -> float:
    """(teacher-student mismatches + 1) / (student-truth mismatches + 1)."""
    t, s = _hard_pair(teacher_hard, student_hard)
    s2, g = _hard_pair(student_hard, gt)
    ts = int(np.sum(t != s))
    sg = int(np.sum(s2 != g))
    return (ts + 1) / (sg + 1)


def adaptive_weight(p: float, d: float) -> float:
    """Distillation weight 1/(1 + p(d-1)), clipped to [0, 1]."""
    if not (np.isfinite(p) and np.isfinite(d)):
        raise NumericError(f"non-finite weight inputs p={p}, d={d}")
    raw = 1.0 / (1.0 + p * (d - 1.0))
    return float(min(max(raw, 0.0), 1.0))


def group_confidence(probs, schema: LabelSchema) -> np.ndarray:
    """Per-group confidence margins for one frame of soft probabilities.

    Multi-class groups score top-1 minus top-2 probability; independent
    binaries score the gap between their two states, |2p - 1|. Conditional
    groups are scored whether or not their gate is open.
    """
    p = np.asarray(probs, dtype=float)
    if p.shape != (schema.num_classes,):
        raise ShapeError(
            f"probs length {p.shape} does not match schema C={schema.num_classes}"
        )
    confs = []
    for g in schema.groups + tuple(cg.indices for cg in schema.conditional_groups):
        vals = np.sort(p[list(g)])[::-1]
        confs.append(vals[0] - vals[1])
    for b in schema.independent_binary:
        confs.append(abs(p[b] - (1.0 - p[b])))
    return np.array(confs)


def clip_confidence(frame_confs) -> float:
    """Mean over groups per frame, then mean over the clip's event frames."""
    arr = np.asarray(frame_confs, dtype=float)
    if arr.size == 0:
        raise DataError("clip has no event frames; confidence undefined")
    if arr.ndim == 1:
        arr = arr[None, :]
    return float(arr.mean(axis=1).mean())


@dataclass
class WeightMapping:
    """Validation records mapping (student, teacher) confidences to (p, d)."""

    inputs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))   # (n, 2): c_s, c_t
    targets: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))  # (n, 2): p, d
    k_neighbors: int = 5

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def append(self, c_s: float, c_t: float, p: float, d: float) -> None:
        self.inputs = np.vstack([self.inputs, [c_s, c_t]])
        self.targets = np.vstack([self.targets, [p, d]])


def build_mapping(val_clips, teacher_fine, student_fine, schema: LabelSchema,
                  k_neighbors: int = 5) -> WeightMapping:
    """Build the reliability mapping from ground-truth validation clips.

    ``teacher_fine`` / ``student_fine`` are callables mapping a clip to its
    (T, C) fine logits; model states are adapted by the pipeline. Per clip,
    correctness, distortion, and confidences are computed on ground-truth
    event frames and averaged; clips without event frames contribute no
    record.
    """
    if len(val_clips) == 0:
        raise DataError("cannot build a weight mapping from an empty validation set")
    mapping = WeightMapping(k_neighbors=k_neighbors)
    for clip in val_clips:
        frames = np.flatnonzero(clip.coarse_labels == 1)
        if frames.size == 0:
            continue
        t_probs = sigmoid(np.asarray(teacher_fine(clip), dtype=float))
        s_probs = sigmoid(np.asarray(student_fine(clip), dtype=float))
        ps, ds, t_confs, s_confs = [], [], [], []
        for t in frames:
            t_hard = fine_label_postprocess(t_probs[t], schema)
            s_hard = fine_label_postprocess(s_probs[t], schema)
            gt = clip.fine_labels[t]
            ps.append(teacher_correctness(t_hard, gt))
            ds.append(distortion_ratio(t_hard, s_hard, gt))
            t_confs.append(group_confidence(t_probs[t], schema))
            s_confs.append(group_confidence(s_probs[t], schema))
        mapping.append(
            clip_confidence(s_confs), clip_confidence(t_confs),
            float(np.mean(ps)), float(np.mean(ds)),
        )
    return mapping


def knn_weight(mapping: WeightMapping, c_s: float, c_t: float) -> float:
    """Adaptive weight for a confidence query via k-nearest validation records.

    Neighbors are ranked by Euclidean distance in confidence space with ties
    broken by record index; targets are averaged unweighted.
    """
    n = len(mapping)
    if n == 0:
        raise DataError("weight mapping is empty")
    d2 = ((mapping.inputs - np.array([c_s, c_t])) ** 2).sum(axis=1)
    k = min(mapping.k_neighbors, n)
    order = np.argsort(d2, kind="stable")[:k]
    p_bar, d_bar = mapping.targets[order].mean(axis=0)
    return adaptive_weight(float(p_bar), float(d_bar))


def awd_student_loss(coarse_logits, fine_logits, teacher_pseudo: PseudoLabels,
                     weight: float, fg_weight: float = 5.0) -> float:
    """Teacher-supervised loss on an unlabeled clip, scaled by the weight."""
    val, _, _ = awd_student_loss_grad(coarse_logits, fine_logits, teacher_pseudo,
                                      weight, fg_weight)
    return val


def awd_student_loss_grad(coarse_logits, fine_logits, teacher_pseudo: PseudoLabels,
                          weight: float, fg_weight: float = 5.0):
    lc, dc = coarse_loss_grad(coarse_logits, teacher_pseudo.coarse, fg_weight)
    lf, df = fine_loss_grad(fine_logits, teacher_pseudo.fine)
    return weight * (lc + lf), weight * dc, weight * df


# ---------------------------------------------------------------------------
# Mapping persistence: one record per line, %.17g for binary64 round trips
# ---------------------------------------------------------------------------

def save_mapping(path, mapping: WeightMapping) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# k_neighbors {mapping.k_neighbors}\n")
        fh.write("# c_s c_t p d\n")
        for (c_s, c_t), (p, d) in zip(mapping.inputs, mapping.targets):
            fh.write("%.17g %.17g %.17g %.17g\n" % (c_s, c_t, p, d))


def load_mapping(path) -> WeightMapping:
    k = 5
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# k_neighbors"):
                k = int(line.split()[2])
                continue
            if not line or line.startswith("#"):
                continue
            parts = [float(x) for x in line.split()]
            if len(parts) != 4:
                raise DataError(f"malformed mapping record: {line!r}")
            rows.append(parts)
    arr = np.array(rows) if rows else np.zeros((0, 4))
    return WeightMapping(inputs=arr[:, :2], targets=arr[:, 2:], k_neighbors=k)
