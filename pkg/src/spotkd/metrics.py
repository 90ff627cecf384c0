"""Event decoding and sequence metrics: Edit score and F1 at a frame tolerance.

Edit score compares event-class token sequences with Levenshtein distance,
normalized by the longer sequence and mapped to 0-100. F1 matches
predictions to ground truth one-to-one per class inside a +/-delta frame
window using maximum bipartite matching, so enlarging the window can never
lose true positives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from spotkd._num import sigmoid
from spotkd.exceptions import DataError
from spotkd.pseudo import fine_label_postprocess
from spotkd.schema import EventSequence, LabelSchema, event_vocab, vector_to_class_id


def decode_events(coarse_probs, fine_logits, schema: LabelSchema,
                  thresh: float = 0.5, window: int = 1) -> EventSequence:
    """Extract an event sequence from dense per-frame predictions.

    Frames above ``thresh`` are kept if they survive non-maximum suppression
    over ``+/-window`` frames (ties go to the earliest frame); each kept
    frame's class is its post-processed fine vector mapped to the event
    vocabulary.
    """
    p = np.asarray(coarse_probs, dtype=float)
    fl = np.asarray(fine_logits, dtype=float)
    candidates = [t for t in range(len(p)) if p[t] > thresh]
    candidates.sort(key=lambda t: (-p[t], t))
    kept: list[int] = []
    for t in candidates:
        if all(abs(t - k) > window for k in kept):
            kept.append(t)
    kept.sort()
    probs = sigmoid(fl)
    events = tuple(
        (vector_to_class_id(fine_label_postprocess(probs[t], schema), schema), t)
        for t in kept
    )
    return EventSequence(events)


def levenshtein(a, b) -> int:
    """Edit distance between two token sequences (two-row DP)."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def edit_score(pred: EventSequence, gt: EventSequence) -> float:
    """100 * (1 - Levenshtein / max length) over class-id tokens; 100 if both empty."""
    if len(pred) == 0 and len(gt) == 0:
        return 100.0
    dist = levenshtein(pred.class_ids, gt.class_ids)
    return 100.0 * (1.0 - dist / max(len(pred), len(gt)))


def _max_matching(pred_ts, gt_ts, delta: int) -> int:
    """Size of a maximum one-to-one matching with |t_p - t_g| <= delta
    (Kuhn's augmenting-path algorithm)."""
    compat = [
        [j for j, tg in enumerate(gt_ts) if abs(tp - tg) <= delta]
        for tp in pred_ts
    ]
    match_gt = [-1] * len(gt_ts)

    def augment(i, seen):
        for j in compat[i]:
            if not seen[j]:
                seen[j] = True
                if match_gt[j] < 0 or augment(match_gt[j], seen):
                    match_gt[j] = i
                    return True
        return False

    return sum(augment(i, [False] * len(gt_ts)) for i in range(len(pred_ts)))


def f1_at_tolerance(pred: EventSequence, gt: EventSequence, delta: int = 1):
    """Per-class (TP, FP, FN) under the tolerance window, plus macro F1 in percent.

    Classes present in neither sequence contribute nothing to the mean.
    """
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    classes = sorted(set(pred.class_ids) | set(gt.class_ids))
    counts = {}
    for c in classes:
        p_ts = [t for cid, t in pred.events if cid == c]
        g_ts = [t for cid, t in gt.events if cid == c]
        tp = _max_matching(p_ts, g_ts, delta)
        counts[c] = (tp, len(p_ts) - tp, len(g_ts) - tp)
    return counts, macro_f1(counts)


def macro_f1(counts) -> float:
    """Macro-averaged F1 (percent) from per-class (TP, FP, FN) counts."""
    if not counts:
        return 0.0
    scores = []
    for tp, fp, fn in counts.values():
        denom = 2 * tp + fp + fn
        scores.append(100.0 * 2 * tp / denom if denom > 0 else 0.0)
    return float(np.mean(scores)) if scores else 0.0


@dataclass
class EvalReport:
    """Aggregated split metrics; F1 is macro over summed per-class counts."""

    edit: float
    f1_evt: float
    per_class_f1: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    delta: int = 1
    n_clips: int = 0

    def to_dict(self) -> dict:
        return {
            "edit": self.edit,
            "f1_evt": self.f1_evt,
            "per_class_f1": dict(sorted(self.per_class_f1.items())),
            "counts": {k: list(v) for k, v in sorted(self.counts.items())},
            "delta": self.delta,
            "n_clips": self.n_clips,
        }


def evaluate_split(predict_fn, clips, schema: LabelSchema, delta: int = 1,
                   thresh: float = 0.5, window: int = 1) -> EvalReport:
    """Evaluate a predictor over clips with ground truth.

    ``predict_fn(clip) -> (coarse_probs, fine_logits)``. Edit score is
    averaged per clip; F1 comes from TP/FP/FN summed per class across clips,
    then macro-averaged. Per-class entries are keyed by readable event-token
    names.
    """
    if len(clips) == 0:
        raise DataError("cannot evaluate an empty clip list")
    vocab_names = {}
    edits = []
    total: dict[int, list[int]] = {}
    for clip in clips:
        coarse_probs, fine_logits = predict_fn(clip)
        pred = decode_events(coarse_probs, fine_logits, schema, thresh, window)
        gt = clip.events
        edits.append(edit_score(pred, gt))
        counts, _ = f1_at_tolerance(pred, gt, delta)
        for c, (tp, fp, fn) in counts.items():
            acc = total.setdefault(c, [0, 0, 0])
            acc[0] += tp
            acc[1] += fp
            acc[2] += fn
    vocab = event_vocab(schema)
    for c in total:
        vocab_names[c] = schema.event_name(vocab[c])
    count_tuples = {c: tuple(v) for c, v in total.items()}
    per_class = {
        vocab_names[c]: (100.0 * 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0)
        for c, (tp, fp, fn) in count_tuples.items()
    }
    return EvalReport(
        edit=float(np.mean(edits)),
        f1_evt=macro_f1(count_tuples),
        per_class_f1=per_class,
        counts={vocab_names[c]: v for c, v in count_tuples.items()},
        delta=delta,
        n_clips=len(clips),
    )
