import logging

import numpy as np
import pytest

import spotkd.datagen as datagen
from spotkd.datagen import (
    ClipSample,
    DatasetSplit,
    GenConfig,
    UnlabeledView,
    generate_dataset,
    labels_to_events,
    load_clips,
    sample_batch,
    save_clips,
    split_k_clip,
    validate_clip,
)
from spotkd.exceptions import ConfigError, DataError
from spotkd.schema import tennis_schema

SCHEMA = tennis_schema()


def small_cfg(**kw):
    base = dict(n_clips=12, T=24, P=1, V=3, D_r=8, D_f=8, latent_dim=4,
                pattern_len=3, n_event_classes=4, event_rate=0.12)
    base.update(kw)
    return GenConfig(**base)


class TestGenerate:
    def test_clip_count_and_invariants(self):
        cfg = small_cfg(n_clips=10)
        clips = generate_dataset(cfg, seed=0)
        assert len(clips) == 10
        for clip in clips:
            assert clip.pose.shape == (24, 1, 3, 2)
            assert clip.rgb_feat.shape == (24, 8)
            assert clip.flow_feat.shape == (24, 8)
            validate_clip(clip, SCHEMA)

    def test_bit_identical_regeneration(self):
        cfg = small_cfg()
        a = generate_dataset(cfg, seed=7)
        b = generate_dataset(cfg, seed=7)
        for ca, cb in zip(a, b):
            assert ca.clip_id == cb.clip_id
            assert ca.pose.tobytes() == cb.pose.tobytes()
            assert ca.rgb_feat.tobytes() == cb.rgb_feat.tobytes()
            assert ca.flow_feat.tobytes() == cb.flow_feat.tobytes()
            assert ca.events == cb.events

    def test_different_seeds_differ(self):
        cfg = small_cfg()
        a = generate_dataset(cfg, seed=1)
        b = generate_dataset(cfg, seed=2)
        assert any(ca.pose.tobytes() != cb.pose.tobytes() for ca, cb in zip(a, b))

    def test_zero_event_rate_gives_background_clips(self):
        clips = generate_dataset(small_cfg(event_rate=0.0), seed=3)
        for clip in clips:
            assert len(clip.events) == 0
            assert clip.coarse_labels.sum() == 0

    def test_minimum_gap_respected(self):
        clips = generate_dataset(small_cfg(event_rate=0.5, n_clips=30), seed=5)
        for clip in clips:
            ts = clip.events.timestamps
            assert all(b - a >= 2 for a, b in zip(ts, ts[1:]))

    def test_label_reconstruction(self):
        for clip in generate_dataset(small_cfg(), seed=11):
            assert labels_to_events(clip.coarse_labels, clip.fine_labels,
                                    SCHEMA) == clip.events

    def test_pose_coordinates_are_normalized(self):
        for clip in generate_dataset(small_cfg(), seed=13):
            assert np.all(np.abs(clip.pose) < 1.0)

    def test_invalid_dimensions_rejected(self):
        with pytest.raises(ConfigError):
            small_cfg(T=0)
        with pytest.raises(ConfigError):
            small_cfg(min_gap=1)
        with pytest.raises(ConfigError):
            small_cfg(noise_rgb=-1.0)


class TestModalityInformativeness:
    @staticmethod
    def _probe_accuracy(clips, extract, rng):
        """Balanced event-vs-background accuracy of a least-squares probe.

        Features are a +/-1 frame context window plus element squares, so the
        probe sees the whole motion segment and its energy; classes point in
        arbitrary latent directions, so raw frames alone are not separable.
        """
        feats, labels = [], []
        for clip in clips:
            fg = np.flatnonzero(clip.coarse_labels == 1)
            bg = np.flatnonzero(clip.coarse_labels == 0)
            if fg.size == 0:
                continue
            bg = rng.choice(bg, size=min(fg.size, bg.size), replace=False)
            feat = extract(clip)
            t_len = feat.shape[0]
            for t in np.concatenate([fg, bg]):
                ctx = np.concatenate(
                    [feat[min(t_len - 1, max(0, t + d))] for d in (-1, 0, 1)])
                feats.append(np.concatenate([ctx, ctx * ctx]))
                labels.append(1.0 if clip.coarse_labels[t] else -1.0)
        x = np.array(feats)
        y = np.array(labels)
        half = len(x) // 2
        w, *_ = np.linalg.lstsq(
            x[:half].T @ x[:half] + 1e-3 * np.eye(x.shape[1]), x[:half].T @ y[:half],
            rcond=None)
        pred = np.sign(x[half:] @ w)
        return float((pred == y[half:]).mean())

    def test_pose_probe_beats_rgb_probe_in_the_median(self):
        pose_acc, rgb_acc = [], []
        for seed in range(5):
            clips = generate_dataset(small_cfg(n_clips=20, event_rate=0.15), seed=seed)
            rng = np.random.default_rng(seed)
            pose_acc.append(self._probe_accuracy(
                clips, lambda c: c.pose.reshape(len(c.coarse_labels), -1), rng))
            rng = np.random.default_rng(seed)
            rgb_acc.append(self._probe_accuracy(clips, lambda c: c.rgb_feat, rng))
        assert np.median(pose_acc) > np.median(rgb_acc)


class TestSplit:
    def test_sizes(self):
        clips = generate_dataset(small_cfg(n_clips=12), seed=0)
        split = split_k_clip(clips, k=5, seed=0)
        assert len(split.labeled) == 5
        assert len(split.unlabeled) == 7
        assert len(split.val) == 0

    def test_val_carved_from_pool(self):
        clips = generate_dataset(small_cfg(n_clips=12), seed=0)
        split = split_k_clip(clips, k=5, seed=0, n_val=3)
        assert len(split.labeled) == 5
        assert len(split.val) == 3
        assert len(split.unlabeled) == 4
        ids = {c.clip_id for c in split.labeled} | {c.clip_id for c in split.val} \
            | {v.clip_id for v in split.unlabeled}
        assert len(ids) == 12

    def test_disjoint_labeled_unlabeled(self):
        clips = generate_dataset(small_cfg(), seed=0)
        split = split_k_clip(clips, k=6, seed=1)
        labeled_ids = {c.clip_id for c in split.labeled}
        assert all(v.clip_id not in labeled_ids for v in split.unlabeled)

    def test_k_equal_pool_size_empties_unlabeled(self):
        clips = generate_dataset(small_cfg(), seed=0)
        split = split_k_clip(clips, k=len(clips), seed=0)
        assert len(split.unlabeled) == 0

    def test_k_too_large_rejected(self):
        clips = generate_dataset(small_cfg(), seed=0)
        with pytest.raises(ValueError):
            split_k_clip(clips, k=len(clips) + 1, seed=0)

    def test_nonpositive_k_rejected(self):
        clips = generate_dataset(small_cfg(), seed=0)
        with pytest.raises(ValueError):
            split_k_clip(clips, k=0, seed=0)

    def test_deterministic_given_seed(self):
        clips = generate_dataset(small_cfg(), seed=0)
        a = split_k_clip(clips, k=4, seed=9)
        b = split_k_clip(clips, k=4, seed=9)
        assert [c.clip_id for c in a.labeled] == [c.clip_id for c in b.labeled]

    def test_unlabeled_view_masks_labels(self):
        clips = generate_dataset(small_cfg(), seed=0)
        split = split_k_clip(clips, k=4, seed=0)
        view = split.unlabeled[0]
        assert not hasattr(view, "coarse_labels")
        assert not hasattr(view, "fine_labels")
        assert not hasattr(view, "events")
        before = datagen.REVEAL_COUNT
        clip = view.reveal()
        assert datagen.REVEAL_COUNT == before + 1
        assert isinstance(clip, ClipSample)


class TestSampleBatch:
    def _split(self, n_unlabeled=8):
        clips = generate_dataset(small_cfg(n_clips=12), seed=0)
        labeled = clips[:4]
        unlabeled = [UnlabeledView(c) for c in clips[4:4 + n_unlabeled]]
        return DatasetSplit(labeled=labeled, unlabeled=unlabeled)

    def test_labeled_only_never_draws_unlabeled(self):
        split = self._split()
        rng = np.random.default_rng(0)
        origins = {sample_batch(split, "labeled_only", rng, 2)[1]
                   for _ in range(10_000)}
        assert origins == {"labeled"}

    def test_mixed_is_a_fair_coin(self):
        split = self._split()
        rng = np.random.default_rng(0)
        draws = 10_000
        unlabeled = sum(
            sample_batch(split, "mixed", rng, 2)[1] == "unlabeled"
            for _ in range(draws)
        )
        assert abs(unlabeled / draws - 0.5) <= 0.02

    def test_mixed_with_empty_unlabeled_warns_and_falls_back(self, caplog):
        split = self._split(n_unlabeled=0)
        rng = np.random.default_rng(0)
        with caplog.at_level(logging.WARNING, logger="spotkd.datagen"):
            batch, origin = sample_batch(split, "mixed", rng, 2)
        assert origin == "labeled"
        assert any("falling back" in r.message for r in caplog.records)

    def test_batch_size_and_membership(self):
        split = self._split()
        rng = np.random.default_rng(0)
        batch, origin = sample_batch(split, "labeled_only", rng, 3)
        assert len(batch) == 3
        labeled_ids = {c.clip_id for c in split.labeled}
        assert all(c.clip_id in labeled_ids for c in batch)

    def test_unknown_phase_rejected(self):
        with pytest.raises(ValueError):
            sample_batch(self._split(), "warmup", np.random.default_rng(0), 2)


class TestDatasetFile:
    def test_round_trip(self, tmp_path):
        clips = generate_dataset(small_cfg(n_clips=5), seed=4)
        path = tmp_path / "clips.jsonl"
        save_clips(path, clips)
        loaded = load_clips(path, SCHEMA)
        assert len(loaded) == 5
        for a, b in zip(clips, loaded):
            assert a.clip_id == b.clip_id
            np.testing.assert_array_equal(a.pose, b.pose)
            np.testing.assert_array_equal(a.rgb_feat, b.rgb_feat)
            np.testing.assert_array_equal(a.coarse_labels, b.coarse_labels)
            assert a.events == b.events

    def test_loader_rejects_inconsistent_labels(self, tmp_path):
        clips = generate_dataset(small_cfg(n_clips=1, event_rate=0.3), seed=4)
        path = tmp_path / "clips.jsonl"
        save_clips(path, clips)
        text = path.read_text()
        # Corrupt: claim an event on a frame whose fine row is empty.
        import json

        rec = json.loads(text)
        rec["coarse_labels"][0] = 1
        path.write_text(json.dumps(rec) + "\n")
        with pytest.raises(DataError):
            load_clips(path, SCHEMA)

    def test_loader_rejects_bad_json(self, tmp_path):
        path = tmp_path / "clips.jsonl"
        path.write_text("{not json}\n")
        with pytest.raises(DataError):
            load_clips(path, SCHEMA)
