"""Online pseudo-label generation and constrained fine-label post-processing.

Post-processing turns soft per-class probabilities into a hard vector that
satisfies the schema: exclusive groups are resolved by argmax, gated groups
are either resolved or zeroed depending on the gate state, and independent
binaries are thresholded at 0.5. The result is idempotent and always passes
:func:`spotkd.schema.validate_hard_vector`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from spotkd._num import sigmoid
from spotkd.exceptions import SchemaError, ShapeError
from spotkd.schema import LabelSchema


@dataclass
class PseudoLabels:
    """Hard labels generated from model predictions on unlabeled clips."""

    coarse: np.ndarray  # (T,) in {0,1}
    fine: np.ndarray    # (T,C) in {0,1}
    source_epoch: int = 0


def activate_one(values, idxs) -> np.ndarray:
    """One-hot the maximum entry among ``idxs`` (ties go to the lowest index).

    Entries outside ``idxs`` are untouched. Returns a new array.
    """
    if len(idxs) == 0:
        raise ValueError("activate_one needs a non-empty index list")
    out = np.array(values, dtype=float)
    if any(not 0 <= i < out.shape[-1] for i in idxs):
        raise ValueError(f"indices {idxs} out of bounds for length {out.shape[-1]}")
    sub = out[list(idxs)]
    best = idxs[int(np.argmax(sub))]  # np.argmax returns the first maximum
    for i in idxs:
        out[i] = 1.0 if i == best else 0.0
    return out


def fine_label_postprocess(values, schema: LabelSchema) -> np.ndarray:
    """Resolve a soft fine-label vector into a schema-valid hard vector."""
    out = np.asarray(values, dtype=float)
    if out.shape != (schema.num_classes,):
        raise SchemaError(
            f"vector length {out.shape} does not match schema C={schema.num_classes}"
        )
    for g in schema.groups:
        out = activate_one(out, g)
    for cg in schema.conditional_groups:
        if out[cg.gate_index] != cg.gate_value:
            out = activate_one(out, cg.indices)
        else:
            # Gate closed: the whole group is off. Keeps pseudo-labels binary.
            out[list(cg.indices)] = 0.0
    for b in schema.independent_binary:
        out[b] = 1.0 if out[b] >= 0.5 else 0.0
    return out


def make_pseudo_labels(coarse_logits, fine_logits, schema: LabelSchema,
                       source_epoch: int = 0) -> PseudoLabels:
    """Hard pseudo-labels from raw per-frame logits.

    Coarse label is the argmax over the two classes; fine rows are
    post-processed sigmoid probabilities on predicted event frames and zero
    elsewhere. Inputs are plain arrays, already detached from any gradient
    path.
    """
    cl = np.asarray(coarse_logits, dtype=float)
    fl = np.asarray(fine_logits, dtype=float)
    if cl.ndim != 2 or cl.shape[1] != 2:
        raise ShapeError(f"coarse logits must be (T,2), got {cl.shape}")
    if fl.ndim != 2 or fl.shape[0] != cl.shape[0] or fl.shape[1] != schema.num_classes:
        raise ShapeError(
            f"fine logits must be (T,{schema.num_classes}) matching T={cl.shape[0]}, got {fl.shape}"
        )
    t_len = cl.shape[0]
    coarse = (cl[:, 1] > cl[:, 0]).astype(np.int64)
    fine = np.zeros((t_len, schema.num_classes))
    probs = sigmoid(fl)
    for t in np.flatnonzero(coarse):
        fine[t] = fine_label_postprocess(probs[t], schema)
    return PseudoLabels(coarse=coarse, fine=fine, source_epoch=source_epoch)
