"""Synthetic multimodal clip generation and k-clip split handling.

A seeded latent process drives every clip: a semi-Markov sampler places
events (minimum two-frame gap) on a smooth background track, and each event
class stamps its characteristic motion segment into the latent sequence.
Observed modalities are fixed random linear views of the latent track with
per-modality noise - pose is the cleanest, flow intermediate, RGB the
noisiest - so pose generalizes best by construction.

Unlabeled clips keep their ground truth but expose it only through
``UnlabeledView.reveal()``; training code sees features alone.

Dataset files are newline-delimited JSON, one clip per line, with fields
``clip_id, pose, rgb_feat, flow_feat, coarse_labels, fine_labels, events``
(arrays as nested lists, events as ``[class_id, timestamp]`` pairs).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from spotkd.exceptions import ConfigError, DataError
from spotkd.schema import (
    EventSequence,
    LabelSchema,
    event_vocab,
    format_schema,
    tennis_schema,
    validate_hard_vector,
    vector_to_class_id,
)

logger = logging.getLogger(__name__)

# Incremented by UnlabeledView.reveal(); lets tests assert that training
# never touches masked labels.
REVEAL_COUNT = 0

_BG_RHO = 0.8    # background AR(1) smoothness
_BG_SCALE = 0.3  # background innovation scale


@dataclass(frozen=True)
class GenConfig:
    """Synthetic dataset parameters; deterministic together with a seed.

    ``world_seed`` fixes the shared generative assets (class palette, motion
    patterns, modality projections); the generation seed only drives clip
    sampling. Pools generated with the same config but different seeds are
    disjoint draws from the same world, the way unseen videos of the same
    sport would be.
    """

    world_seed: int = 0
    n_clips: int = 200
    T: int = 64
    P: int = 1
    V: int = 6
    D_r: int = 24
    D_f: int = 24
    latent_dim: int = 8
    pattern_len: int = 5
    pattern_scale: float = 2.0
    n_event_classes: int = 6
    event_rate: float = 0.08
    min_gap: int = 2
    noise_pose: float = 0.05
    noise_rgb: float = 0.8
    noise_flow: float = 0.35
    schema: LabelSchema = field(default_factory=tennis_schema)

    def __post_init__(self):
        for name in ("n_clips", "T", "P", "V", "D_r", "D_f", "latent_dim",
                     "pattern_len", "n_event_classes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.min_gap < 2:
            raise ConfigError(f"min_gap must be >= 2, got {self.min_gap}")
        if self.event_rate < 0:
            raise ConfigError(f"event_rate must be >= 0, got {self.event_rate}")
        for name in ("noise_pose", "noise_rgb", "noise_flow"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.pattern_scale <= 0:
            raise ConfigError(f"pattern_scale must be positive, got {self.pattern_scale}")

    @property
    def pose_dim(self) -> int:
        return self.P * self.V * 2

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "world_seed", "n_clips", "T", "P", "V", "D_r", "D_f", "latent_dim",
            "pattern_len", "pattern_scale", "n_event_classes", "event_rate",
            "min_gap", "noise_pose", "noise_rgb", "noise_flow")}
        d["schema"] = format_schema(self.schema)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        from spotkd.schema import parse_schema

        d = dict(d)
        schema = d.pop("schema", None)
        if isinstance(schema, str):
            schema = parse_schema(schema)
        return cls(schema=schema or tennis_schema(), **d)


@dataclass
class ClipSample:
    """One synthetic clip with dense labels and its event sequence."""

    clip_id: str
    pose: np.ndarray          # (T, P, V, 2)
    rgb_feat: np.ndarray      # (T, D_r)
    flow_feat: np.ndarray     # (T, D_f)
    coarse_labels: np.ndarray  # (T,) in {0,1}
    fine_labels: np.ndarray   # (T, C) in {0,1}
    events: EventSequence


class UnlabeledView:
    """Feature-only view of a clip; labels stay behind :meth:`reveal`."""

    __slots__ = ("clip_id", "pose", "rgb_feat", "flow_feat", "_clip")

    def __init__(self, clip: ClipSample):
        self.clip_id = clip.clip_id
        self.pose = clip.pose
        self.rgb_feat = clip.rgb_feat
        self.flow_feat = clip.flow_feat
        self._clip = clip

    def reveal(self) -> ClipSample:
        """Return the underlying labeled clip (counted, for audit in tests)."""
        global REVEAL_COUNT
        REVEAL_COUNT += 1
        return self._clip


@dataclass
class DatasetSplit:
    labeled: list
    unlabeled: list   # UnlabeledView entries
    val: list = field(default_factory=list)
    test: list = field(default_factory=list)


def labels_to_events(coarse_labels, fine_labels, schema: LabelSchema) -> EventSequence:
    """Reconstruct the event sequence from dense labels."""
    events = []
    for t in np.flatnonzero(np.asarray(coarse_labels) == 1):
        events.append((vector_to_class_id(fine_labels[t], schema), int(t)))
    return EventSequence(tuple(events))


def _sample_event_times(rng, t_len: int, rate: float, min_gap: int) -> list[int]:
    if rate <= 0:
        return []
    mean_extra = max(1.0 / rate - min_gap + 1.0, 1.0)
    p = min(1.0, 1.0 / mean_extra)
    times = []
    pos = 0
    while True:
        pos += min_gap + int(rng.geometric(p)) - 1
        if pos >= t_len:
            return times
        times.append(pos)


def generate_dataset(cfg: GenConfig, seed: int) -> list[ClipSample]:
    """Generate ``cfg.n_clips`` clips, bit-reproducible for a (cfg, seed) pair.

    Per-clip generators are spawned from one seed sequence, so generation is
    order-independent and could fan out to workers without changing results.
    """
    vocab = event_vocab(cfg.schema)
    shared = np.random.default_rng(np.random.SeedSequence(cfg.world_seed))
    clip_ss = np.random.SeedSequence(seed).spawn(cfg.n_clips)

    n_classes = min(cfg.n_event_classes, len(vocab))
    palette = np.sort(shared.choice(len(vocab), size=n_classes, replace=False))
    patterns = shared.normal(0.0, cfg.pattern_scale,
                             size=(n_classes, cfg.pattern_len, cfg.latent_dim))
    scale = 1.0 / np.sqrt(cfg.latent_dim)
    proj_pose = shared.normal(0.0, scale, size=(cfg.latent_dim, cfg.pose_dim))
    proj_rgb = shared.normal(0.0, scale, size=(cfg.latent_dim, cfg.D_r))
    proj_flow = shared.normal(0.0, scale, size=(cfg.latent_dim, cfg.D_f))

    clips = []
    for i in range(cfg.n_clips):
        rng = np.random.default_rng(clip_ss[i])
        latent = np.zeros((cfg.T, cfg.latent_dim))
        prev = np.zeros(cfg.latent_dim)
        for t in range(cfg.T):
            prev = _BG_RHO * prev + _BG_SCALE * rng.normal(size=cfg.latent_dim)
            latent[t] = prev

        times = _sample_event_times(rng, cfg.T, cfg.event_rate, cfg.min_gap)
        class_ids = [int(palette[rng.integers(0, n_classes)]) for _ in times]
        half = cfg.pattern_len // 2
        for t0, cid in zip(times, class_ids):
            pat = patterns[int(np.searchsorted(palette, cid))]
            for k in range(cfg.pattern_len):
                tt = t0 - half + k
                if 0 <= tt < cfg.T:
                    latent[tt] += pat[k]

        pose = np.tanh(
            latent @ proj_pose + cfg.noise_pose * rng.normal(size=(cfg.T, cfg.pose_dim))
        ).reshape(cfg.T, cfg.P, cfg.V, 2)
        rgb = latent @ proj_rgb + cfg.noise_rgb * rng.normal(size=(cfg.T, cfg.D_r))
        flow = latent @ proj_flow + cfg.noise_flow * rng.normal(size=(cfg.T, cfg.D_f))

        coarse = np.zeros(cfg.T, dtype=np.int64)
        fine = np.zeros((cfg.T, cfg.schema.num_classes))
        for t0, cid in zip(times, class_ids):
            coarse[t0] = 1
            fine[t0] = np.array(vocab[cid], dtype=float)
        events = EventSequence(tuple(zip(class_ids, times)))

        clips.append(ClipSample(
            clip_id=f"clip-{seed}-{i:05d}",
            pose=pose, rgb_feat=rgb, flow_feat=flow,
            coarse_labels=coarse, fine_labels=fine, events=events,
        ))
    return clips


def validate_clip(clip: ClipSample, schema: LabelSchema) -> None:
    """Raise DataError unless the clip's labels and events are consistent."""
    t_len = clip.coarse_labels.shape[0]
    if clip.fine_labels.shape != (t_len, schema.num_classes):
        raise DataError(f"{clip.clip_id}: fine label shape {clip.fine_labels.shape}")
    if not np.all((clip.coarse_labels == 0) | (clip.coarse_labels == 1)):
        raise DataError(f"{clip.clip_id}: coarse labels must be 0/1")
    for t in range(t_len):
        row = clip.fine_labels[t]
        if clip.coarse_labels[t] == 0:
            if np.any(row != 0):
                raise DataError(f"{clip.clip_id}: fine labels on background frame {t}")
        elif not validate_hard_vector(row, schema):
            raise DataError(f"{clip.clip_id}: invalid fine labels on frame {t}")
    if labels_to_events(clip.coarse_labels, clip.fine_labels, schema) != clip.events:
        raise DataError(f"{clip.clip_id}: events do not match dense labels")


def split_k_clip(clips, k: int, seed: int, n_val: int = 0, test_clips=()) -> DatasetSplit:
    """Sample k labeled clips uniformly; the remainder becomes unlabeled.

    ``n_val`` clips (disjoint from the labeled set) are carved out as the
    validation subset; test clips come from a separate generator context and
    are attached as given.
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if k + n_val > len(clips):
        raise ValueError(
            f"k={k} plus n_val={n_val} exceeds pool size {len(clips)}"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(clips))
    labeled = [clips[i] for i in perm[:k]]
    val = [clips[i] for i in perm[k:k + n_val]]
    unlabeled = [UnlabeledView(clips[i]) for i in perm[k + n_val:]]
    return DatasetSplit(labeled=labeled, unlabeled=unlabeled, val=val,
                        test=list(test_clips))


def sample_batch(split: DatasetSplit, phase: str, rng, batch_size: int = 8):
    """Draw one batch of clips; mixed phase flips a fair coin per batch.

    Returns ``(clips, origin)`` with origin in {"labeled", "unlabeled"}.
    An empty unlabeled pool in the mixed phase falls back to labeled data
    with a logged warning.
    """
    if phase not in ("labeled_only", "mixed"):
        raise ValueError(f"unknown phase {phase!r}")
    origin = "labeled"
    if phase == "mixed":
        if not split.unlabeled:
            logger.warning("mixed phase requested but unlabeled pool is empty; "
                           "falling back to labeled data")
        elif rng.random() < 0.5:
            origin = "unlabeled"
    pool = split.labeled if origin == "labeled" else split.unlabeled
    if not pool:
        raise DataError(f"{origin} pool is empty")
    replace = len(pool) < batch_size
    idx = rng.choice(len(pool), size=batch_size, replace=replace)
    return [pool[i] for i in idx], origin


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------

def save_clips(path, clips) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for clip in clips:
            rec = {
                "clip_id": clip.clip_id,
                "pose": clip.pose.tolist(),
                "rgb_feat": clip.rgb_feat.tolist(),
                "flow_feat": clip.flow_feat.tolist(),
                "coarse_labels": clip.coarse_labels.tolist(),
                "fine_labels": clip.fine_labels.tolist(),
                "events": [[c, t] for c, t in clip.events.events],
            }
            fh.write(json.dumps(rec) + "\n")


def load_clips(path, schema: LabelSchema) -> list[ClipSample]:
    clips = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            clip = ClipSample(
                clip_id=rec["clip_id"],
                pose=np.asarray(rec["pose"], dtype=float),
                rgb_feat=np.asarray(rec["rgb_feat"], dtype=float),
                flow_feat=np.asarray(rec["flow_feat"], dtype=float),
                coarse_labels=np.asarray(rec["coarse_labels"], dtype=np.int64),
                fine_labels=np.asarray(rec["fine_labels"], dtype=float),
                events=EventSequence(tuple((int(c), int(t)) for c, t in rec["events"])),
            )
            validate_clip(clip, schema)
            clips.append(clip)
    return clips
