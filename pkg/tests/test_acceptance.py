"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s``. Criteria with stated
runtime budgets assert wall time as well as correctness.
"""

import json
import math
import time

import numpy as np

from oracles import (
    assert_grad_close,
    finite_difference_grad,
    levenshtein_full_dp,
    max_matching_exhaustive,
)
from spotkd.adaptive import (
    adaptive_weight,
    awd_student_loss_grad,
    build_mapping,
    clip_confidence,
    distortion_ratio,
    group_confidence,
    knn_weight,
)
from spotkd.cli import main as cli_main
from spotkd.datagen import GenConfig
from spotkd.losses import (
    AnnealSchedule,
    anneal_weight,
    coarse_loss,
    coarse_loss_grad,
    distill_loss_grad,
    fine_loss,
    fine_loss_grad,
    total_stage1_loss,
    unlabeled_loss,
)
from spotkd.metrics import edit_score, f1_at_tolerance, levenshtein
from spotkd.nn import (
    EncoderArch,
    ModelArch,
    ModelState,
    backward_batch,
    forward_batch,
    fuse,
    init_model,
    load_checkpoint,
    save_checkpoint,
)
from spotkd.pipeline import RunConfig, make_default_split, run_benchmark, run_stage1
from spotkd.pipeline.runner import _val_edit
from spotkd.pseudo import PseudoLabels, fine_label_postprocess
from spotkd.schema import EventSequence, tennis_schema, validate_hard_vector

SCHEMA = tennis_schema()
C = SCHEMA.num_classes
LN2 = math.log(2.0)
REL = 1e-12


def close(a, b, rel=REL):
    if b == 0.0:
        return a == 0.0
    return abs(a - b) <= rel * abs(b)


def test_criterion_1_formula_exactness():
    start = time.time()
    sched = AnnealSchedule()

    # Anneal schedule branches.
    assert anneal_weight(10, sched) == 0.0
    assert close(anneal_weight(60, sched), 0.2)
    assert close(anneal_weight(95, sched), 0.4)
    assert total_stage1_loss(1.7, 9.9, 10, sched) == 1.7
    assert close(total_stage1_loss(1.0, 0.5, 95, sched), 1.2)
    assert close(total_stage1_loss(0.0, 1.0, 60, sched), 0.2)

    # Adaptive weight.
    assert adaptive_weight(0.0, 7.0) == 1.0
    assert close(adaptive_weight(1.0, 3.0), 1.0 / 3.0)
    assert adaptive_weight(1.0, 0.5) == 1.0

    # Distortion ratio.
    v = np.array([1, 0, 1, 0])
    assert close(distortion_ratio(v, v, v), 1.0)
    gt = np.array([1, 0, 1, 0])
    teacher = np.array([0, 1, 1, 0])
    assert close(distortion_ratio(teacher, gt, gt), 3.0)
    student = np.array([0, 1, 0, 0, 1])
    teacher = np.array([0, 1, 0, 1, 1])
    gt = np.array([1, 0, 1, 0, 1])
    assert close(distortion_ratio(teacher, student, gt), 0.5)

    # Group and clip confidence.
    probs = np.full(C, 0.5)
    probs[[2, 3, 4]] = [0.7, 0.2, 0.1]
    assert close(group_confidence(probs, SCHEMA)[1], 0.5)
    probs = np.full(C, 0.5)
    assert group_confidence(probs, SCHEMA)[-1] == 0.0
    probs[13] = 0.9
    assert close(group_confidence(probs, SCHEMA)[-1], 0.8)
    assert clip_confidence(np.ones((3, 5))) == 1.0
    assert close(clip_confidence(np.array([[0.2] * 5, [0.6] * 5])), 0.4)
    assert close(clip_confidence([[0.5, 0.5, 0.5, 0.5, 0.0]]), 0.4)

    # Additive fusion.
    x = np.array([[1.0, 2.0], [3.0, -1.0]])
    np.testing.assert_array_equal(fuse(x, np.zeros_like(x)), x)
    y = np.array([[0.5, 1.5], [2.0, 2.0]])
    np.testing.assert_array_equal(fuse(x, y), fuse(y, x))
    np.testing.assert_array_equal(fuse(np.array([1.0, 2.0]), np.array([3.0, 4.0])),
                                  np.array([4.0, 6.0]))

    # Coarse loss.
    labels = np.array([0, 1, 0, 1])
    sat = np.where(labels[:, None] == 1, [-20.0, 20.0], [20.0, -20.0])
    assert coarse_loss(sat, labels) < 1e-8
    assert close(coarse_loss(np.zeros((7, 2)), np.array([0, 1, 1, 0, 1, 0, 0]),
                             fg_weight=1.0), LN2)
    assert close(coarse_loss(np.zeros((1, 2)), np.array([1]), fg_weight=5.0), LN2)
    assert close(coarse_loss(np.zeros((2, 2)), np.array([0, 1]), fg_weight=5.0), LN2)

    # Fine loss.
    assert close(fine_loss(np.zeros((4, C)), np.zeros((4, C))), LN2)
    assert close(fine_loss(np.full((2, 3), math.log(9.0)), np.ones((2, 3))),
                 -math.log(0.9))
    targets = np.eye(4)
    assert fine_loss(np.where(targets == 1, 20.0, -20.0), targets) < 1e-8

    # Unlabeled composition.
    t_len = 4
    pseudo = PseudoLabels(coarse=np.zeros(t_len, dtype=int), fine=np.zeros((t_len, C)))
    assert close(unlabeled_loss(np.zeros((t_len, 2)), np.zeros((t_len, C)), pseudo),
                 2 * LN2)

    elapsed = time.time() - start
    assert elapsed < 1.0
    print(f"\n[acceptance] criterion 1 (formula exactness): PASS ({elapsed:.2f}s)")


def test_criterion_2_metric_oracles():
    start = time.time()
    rng = np.random.default_rng(2024)

    for _ in range(1000):
        la, lb = rng.integers(0, 21, size=2)
        a = tuple(int(x) for x in rng.integers(0, 200, size=la))
        b = tuple(int(x) for x in rng.integers(0, 200, size=lb))
        dist = levenshtein(a, b)
        assert dist == levenshtein_full_dp(a, b)
        pred = EventSequence(tuple((c, i) for i, c in enumerate(a)))
        gt = EventSequence(tuple((c, i) for i, c in enumerate(b)))
        expected = 100.0 if not a and not b else \
            100.0 * (1.0 - dist / max(len(a), len(b)))
        assert close(edit_score(pred, gt), expected)

    checked = 0
    for _ in range(400):
        n_pred = int(rng.integers(0, 7))
        n_gt = int(rng.integers(0, 7))
        p_ts = sorted(int(t) for t in rng.choice(40, size=n_pred, replace=False))
        g_ts = sorted(int(t) for t in rng.choice(40, size=n_gt, replace=False))
        delta = int(rng.integers(0, 5))
        pred = EventSequence(tuple((1, t) for t in p_ts))
        gt = EventSequence(tuple((1, t) for t in g_ts))
        counts, _ = f1_at_tolerance(pred, gt, delta)
        got = counts.get(1, (0, 0, 0))[0]
        assert got == max_matching_exhaustive(p_ts, g_ts, delta)
        checked += 1
    assert checked == 400

    elapsed = time.time() - start
    assert elapsed < 30.0
    print(f"\n[acceptance] criterion 2 (metric oracles): PASS ({elapsed:.2f}s)")


def test_criterion_3_gradient_correctness():
    start = time.time()
    rng = np.random.default_rng(77)
    sched = AnnealSchedule(start=2, end=6, target=0.4)
    n_configs = 21

    for trial in range(n_configs):
        in_dim = int(rng.integers(2, 6))
        hidden = int(rng.integers(2, 5))
        embed = int(rng.integers(2, 5))
        n_fine = int(rng.integers(3, 7))
        t_len = int(rng.integers(1, 8))
        batch = int(rng.integers(1, 3))
        arch = ModelArch("single", (EncoderArch(in_dim, hidden, embed),), n_fine=n_fine)
        state = init_model(arch, trial)
        x_lab = rng.normal(size=(batch, t_len, in_dim))
        x_unlab = rng.normal(size=(batch, t_len, in_dim))
        y_c = rng.integers(0, 2, size=(batch, t_len))
        y_f = rng.integers(0, 2, size=(batch, t_len, n_fine)).astype(float)
        pseudo = PseudoLabels(
            coarse=rng.integers(0, 2, size=(batch, t_len)),
            fine=rng.integers(0, 2, size=(batch, t_len, n_fine)).astype(float),
        )
        epoch = int(rng.integers(0, 8))
        lam = anneal_weight(epoch, sched)
        target_emb = rng.normal(size=(batch, t_len, embed))
        w_adapt = float(rng.uniform(0.1, 1.0))

        def stage1_loss(params):
            st = ModelState(arch=arch, params=params.copy())
            fl = forward_batch(st, x_lab)
            fu = forward_batch(st, x_unlab)
            lab = coarse_loss_grad(fl.coarse, y_c, 5.0)[0] + \
                fine_loss_grad(fl.fine, y_f)[0]
            unlab = coarse_loss_grad(fu.coarse, pseudo.coarse, 5.0)[0] + \
                fine_loss_grad(fu.fine, pseudo.fine)[0]
            return total_stage1_loss(lab, unlab, epoch, sched)

        fl = forward_batch(state, x_lab)
        fu = forward_batch(state, x_unlab)
        _, dc_l = coarse_loss_grad(fl.coarse, y_c, 5.0)
        _, df_l = fine_loss_grad(fl.fine, y_f)
        _, dc_u = coarse_loss_grad(fu.coarse, pseudo.coarse, 5.0)
        _, df_u = fine_loss_grad(fu.fine, pseudo.fine)
        analytic = backward_batch(state, fl, dcoarse=dc_l, dfine=df_l) + \
            backward_batch(state, fu, dcoarse=lam * dc_u, dfine=lam * df_u)
        numeric = finite_difference_grad(stage1_loss, state.params, eps=1e-5)
        assert_grad_close(analytic, numeric, rtol=1e-4)

        def emb_loss(params):
            st = ModelState(arch=arch, params=params.copy())
            return distill_loss_grad(target_emb, forward_batch(st, x_lab).emb)[0]

        fwd = forward_batch(state, x_lab)
        _, demb = distill_loss_grad(target_emb, fwd.emb)
        analytic = backward_batch(state, fwd, demb=demb)
        numeric = finite_difference_grad(emb_loss, state.params, eps=1e-5)
        assert_grad_close(analytic, numeric, rtol=1e-4)

        def awd_loss(params):
            st = ModelState(arch=arch, params=params.copy())
            fwd_u = forward_batch(st, x_unlab)
            return awd_student_loss_grad(fwd_u.coarse, fwd_u.fine, pseudo,
                                         w_adapt, 5.0)[0]

        fwd_u = forward_batch(state, x_unlab)
        _, dc_w, df_w = awd_student_loss_grad(fwd_u.coarse, fwd_u.fine, pseudo,
                                              w_adapt, 5.0)
        analytic = backward_batch(state, fwd_u, dcoarse=dc_w, dfine=df_w)
        numeric = finite_difference_grad(awd_loss, state.params, eps=1e-5)
        assert_grad_close(analytic, numeric, rtol=1e-4)

    elapsed = time.time() - start
    assert elapsed < 60.0
    print(f"\n[acceptance] criterion 3 (gradients, {n_configs} configs): "
          f"PASS ({elapsed:.2f}s)")


def test_criterion_4_postprocessing_properties():
    start = time.time()
    rng = np.random.default_rng(4)
    violations = 0
    for _ in range(10_000):
        v = rng.random(C)
        out = fine_label_postprocess(v, SCHEMA)
        if not np.array_equal(out, fine_label_postprocess(out, SCHEMA)):
            violations += 1
        elif not validate_hard_vector(out, SCHEMA):
            violations += 1
    assert violations == 0
    elapsed = time.time() - start
    print(f"\n[acceptance] criterion 4 (post-processing, 10000 vectors, "
          f"0 violations): PASS ({elapsed:.2f}s)")


def _strategy_cfg():
    return RunConfig(
        data=GenConfig(n_clips=16, T=16, P=1, V=2, D_r=6, D_f=6, latent_dim=4,
                       pattern_len=3, n_event_classes=3, event_rate=0.15),
        k=4, n_val=4, n_test=0, seed=0,
        stage1_epochs=34, stage2_epochs=4, stage3_epochs=4,
        anneal=AnnealSchedule(start=30, end=90, target=0.4),
        warmup_epochs=3, batch_size=4, steps_per_epoch=2, hidden=6, embed=6,
    )


def test_criterion_5_schedule_and_strategy_semantics():
    start = time.time()
    sched = AnnealSchedule(start=30, end=90, target=0.4)
    assert anneal_weight(10, sched) == 0.0
    assert anneal_weight(60, sched) == 0.2
    assert anneal_weight(95, sched) == 0.4

    cfg = _strategy_cfg()
    split = make_default_split(cfg)
    _, joint = run_stage1(cfg, split, strategy="joint")
    assert sum(joint.unlabeled_batches[:30]) > 0

    _, delayed = run_stage1(cfg, split, strategy="delayed")
    assert sum(delayed.unlabeled_batches[:30]) == 0

    _, bc = run_stage1(cfg, split, strategy="best_continuation")
    assert sum(bc.unlabeled_batches[:30]) == 0
    assert bc.extra["mix_start_params_sha"] == bc.extra["labeled_phase_best_sha"]
    assert bc.extra["labeled_phase_best_epoch"] < 30

    elapsed = time.time() - start
    print(f"\n[acceptance] criterion 5 (schedule and strategies): "
          f"PASS ({elapsed:.2f}s)")


def test_criterion_6_directional_benchmark():
    start = time.time()
    cfg = RunConfig()
    assert cfg.data.n_clips >= 200
    assert cfg.k == 25
    assert len(cfg.seeds) == 3
    result = run_benchmark(cfg)
    elapsed = time.time() - start

    semi = result["semi_supervised_margin"]
    dist = result["distillation_margin"]
    assert semi >= 1.0, f"best_continuation margin {semi:.2f} < 1 point"
    assert dist >= 2.0, f"distillation margin {dist:.2f} < 2 points"
    assert elapsed < 600.0
    med = result["medians"]
    print(f"\n[acceptance] criterion 6 (directional benchmark): PASS "
          f"({elapsed:.1f}s)\n"
          f"  medians: labeled_only={med['labeled_only']:.2f} "
          f"best_continuation={med['best_continuation']:.2f} "
          f"distilled={med['distilled']:.2f} rgb_scratch={med['rgb_scratch']:.2f}\n"
          f"  margins: semi-supervised +{semi:.2f}, distillation +{dist:.2f}")


def test_criterion_7_determinism_and_persistence(tmp_path, monkeypatch):
    start = time.time()
    monkeypatch.setenv("SPOTKD_OUT", str(tmp_path))
    cfg = _strategy_cfg()
    cfg_dict = cfg.to_dict()
    cfg_dict["n_test"] = 3
    (tmp_path / "config.json").write_text(json.dumps(cfg_dict))
    cfg_file = str(tmp_path / "config.json")

    assert cli_main(["generate", "--config", cfg_file, "--out", "a.jsonl"]) == 0
    assert cli_main(["generate", "--config", cfg_file, "--out", "b.jsonl"]) == 0
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    data = str(tmp_path / "a.jsonl")
    for out in ("r1", "r2"):
        assert cli_main(["train-stage1", "--config", cfg_file, "--data", data,
                         "--out", out]) == 0
    assert (tmp_path / "r1" / "stage1_record.json").read_bytes() == \
        (tmp_path / "r2" / "stage1_record.json").read_bytes()
    assert (tmp_path / "r1" / "stage1_best.ckpt").read_bytes() == \
        (tmp_path / "r2" / "stage1_best.ckpt").read_bytes()

    for out in ("e1.json", "e2.json"):
        assert cli_main(["evaluate", "--config", cfg_file,
                         "--model", str(tmp_path / "r1" / "stage1_best.ckpt"),
                         "--data", data, "--out", out]) == 0
    assert (tmp_path / "e1.json").read_bytes() == (tmp_path / "e2.json").read_bytes()

    # Checkpoint round trip reproduces validation Edit exactly.
    split = make_default_split(cfg)
    model, rec = run_stage1(cfg, split)
    path = tmp_path / "rt.ckpt"
    save_checkpoint(path, model, stage="stage1", epoch=rec.best_epoch,
                    metric=rec.best_value)
    loaded, _ = load_checkpoint(path)
    assert loaded.params.tobytes() == model.params.tobytes()
    assert _val_edit(loaded, split.val, "pose", cfg, cfg.data.schema) == rec.best_value

    elapsed = time.time() - start
    print(f"\n[acceptance] criterion 7 (determinism & persistence): "
          f"PASS ({elapsed:.2f}s)")


def _confidence_clips(n_clips, rng):
    """Synthetic validation clips with 2-4 event frames each."""
    from spotkd.schema import event_vocab

    vocab = event_vocab(SCHEMA)
    clips = []
    for i in range(n_clips):
        t_len = 12
        coarse = np.zeros(t_len, dtype=int)
        fine = np.zeros((t_len, C))
        frames = np.sort(rng.choice(np.arange(0, t_len, 2),
                                    size=int(rng.integers(2, 5)), replace=False))
        for t in frames:
            coarse[t] = 1
            fine[t] = np.array(vocab[int(rng.integers(0, len(vocab)))], dtype=float)

        class _Clip:
            pass

        clip = _Clip()
        clip.clip_id = f"val-{i}"
        clip.coarse_labels = coarse
        clip.fine_labels = fine
        clips.append(clip)
    return clips


def test_criterion_8_awd_behavior():
    start = time.time()
    rng = np.random.default_rng(8)
    clips = _confidence_clips(40, rng)

    def logits_from(rows):
        return np.where(rows == 1, 8.0, -8.0)

    def perfect(clip):
        return logits_from(clip.fine_labels)

    def noisy_student(clip):
        return logits_from(clip.fine_labels) + rng.normal(0, 1.0, clip.fine_labels.shape)

    mapping = build_mapping(clips, perfect, noisy_student, SCHEMA, k_neighbors=5)
    assert len(mapping) == len(clips)
    weights = [knn_weight(mapping, c_s, c_t) for c_s, c_t in mapping.inputs]
    assert all(w == 1.0 for w in weights), "perfect teacher must give W=1 everywhere"

    # Corrupt the teacher on ~50% of validation event frames: flip the
    # near/far group, which breaks exact-match correctness on those frames.
    flip_ids = {}
    for clip in clips:
        frames = np.flatnonzero(clip.coarse_labels == 1)
        chosen = frames[rng.random(len(frames)) < 0.5]
        flip_ids[clip.clip_id] = set(int(t) for t in chosen)

    def corrupted(clip):
        rows = clip.fine_labels.copy()
        for t in flip_ids[clip.clip_id]:
            rows[t, [0, 1]] = rows[t, [1, 0]]
        return logits_from(rows)

    mapping2 = build_mapping(clips, corrupted, perfect, SCHEMA, k_neighbors=5)
    weights2 = [knn_weight(mapping2, c_s, c_t) for c_s, c_t in mapping2.inputs]
    assert float(np.median(weights2)) < 1.0

    elapsed = time.time() - start
    assert elapsed < 120.0
    print(f"\n[acceptance] criterion 8 (adaptive weighting): PASS ({elapsed:.2f}s)"
          f"  [median corrupted-teacher W = {np.median(weights2):.3f}]")
