"""Training stages, the adaptive-weight path, ablation, and the benchmark.

Stage 1 pretrains the pose detector semi-supervised: a labeled-only phase,
then (depending on strategy) mixed 1:1 labeled/unlabeled sampling with
pseudo-labels whose loss weight follows the anneal schedule. Stage 2
distills the frozen pose encoder into RGB and flow encoders by embedding
regression. Stage 3 fine-tunes a fused two-encoder detector on the labeled
clips only. The adaptive-weight path instead trains an RGB student directly
on teacher pseudo-labels scaled by the reliability weight.

Every random draw comes from a generator seeded by ``derived_seed(seed,
tag)``; single-threaded reruns of the same (config, seed) are bit-identical.
"""

from __future__ import annotations

import hashlib
import statistics
from dataclasses import replace

import numpy as np

from spotkd._num import sigmoid, softmax
from spotkd.adaptive import (
    awd_student_loss_grad,
    build_mapping,
    clip_confidence,
    group_confidence,
    knn_weight,
    save_mapping,
)
from spotkd.datagen import DatasetSplit, generate_dataset, sample_batch, split_k_clip
from spotkd.exceptions import DataError
from spotkd.losses import (
    anneal_weight,
    coarse_loss_grad,
    distill_loss,
    distill_loss_grad,
    fine_loss_grad,
)
from spotkd.metrics import decode_events, edit_score, evaluate_split
from spotkd.nn import (
    EncoderArch,
    ModelArch,
    ModelState,
    backward_batch,
    forward_batch,
    init_model,
    lr_at,
    opt_step,
    save_checkpoint,
)
from spotkd.pipeline.config import RunConfig, derived_seed
from spotkd.pipeline.records import RunRecord
from spotkd.pseudo import PseudoLabels, make_pseudo_labels
from spotkd.schema import LabelSchema, schema_hash

MODALITY_POSE = "pose"
MODALITY_RGB = "rgb"
MODALITY_FLOW = "flow"


def _params_sha(params: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(params, dtype="<f8").tobytes()).hexdigest()


def modality_features(clip, modality: str) -> np.ndarray:
    """Per-frame feature matrix (T, D) for one clip or unlabeled view."""
    if modality == MODALITY_POSE:
        pose = clip.pose
        return pose.reshape(pose.shape[0], -1)
    if modality == MODALITY_RGB:
        return clip.rgb_feat
    if modality == MODALITY_FLOW:
        return clip.flow_feat
    raise ValueError(f"unknown modality {modality!r}")


def stack_features(clips, modality: str) -> np.ndarray:
    return np.stack([modality_features(c, modality) for c in clips])


def stack_labels(clips):
    coarse = np.stack([c.coarse_labels for c in clips])
    fine = np.stack([c.fine_labels for c in clips])
    return coarse, fine


def _single_arch(cfg: RunConfig, modality: str, schema: LabelSchema,
                 probe_clip) -> ModelArch:
    # Input width comes from the data itself, not the generation config, so
    # training works on any compatible dataset file.
    in_dim = modality_features(probe_clip, modality).shape[1]
    return ModelArch(
        kind="single",
        encoders=(EncoderArch(in_dim, cfg.hidden, cfg.embed),),
        n_fine=schema.num_classes,
    )


def single_predictor(state: ModelState, modality: str):
    """clip -> (coarse probabilities, fine logits) for a single-encoder model."""

    def predict(clip):
        fwd = forward_batch(state, modality_features(clip, modality)[None])
        return softmax(fwd.coarse[0])[:, 1], fwd.fine[0]

    return predict


def fused_predictor(state: ModelState):
    def predict(clip):
        fwd = forward_batch(state, (clip.rgb_feat[None], clip.flow_feat[None]))
        return softmax(fwd.coarse[0])[:, 1], fwd.fine[0]

    return predict


def fine_logit_fn(state: ModelState, modality: str):
    """clip -> (T, C) fine logits; adapter for the reliability mapping."""

    def predict(clip):
        return forward_batch(state, modality_features(clip, modality)[None]).fine[0]

    return predict


def _val_edit(state: ModelState, clips, modality, cfg: RunConfig,
              schema: LabelSchema) -> float:
    """Mean validation Edit score with one batched forward pass."""
    if not clips:
        raise DataError("validation set is empty")
    if modality == "fused":
        fwd = forward_batch(state, (stack_features(clips, MODALITY_RGB),
                                    stack_features(clips, MODALITY_FLOW)))
    else:
        fwd = forward_batch(state, stack_features(clips, modality))
    probs = softmax(fwd.coarse)[..., 1]
    scores = []
    for i, clip in enumerate(clips):
        pred = decode_events(probs[i], fwd.fine[i], schema,
                             cfg.decode_thresh, cfg.nms_window)
        scores.append(edit_score(pred, clip.events))
    return float(np.mean(scores))


def _test_report(state: ModelState, split: DatasetSplit, modality,
                 cfg: RunConfig, schema: LabelSchema):
    if not split.test:
        return None
    predict = fused_predictor(state) if modality == "fused" \
        else single_predictor(state, modality)
    report = evaluate_split(predict, split.test, schema, cfg.delta,
                            cfg.decode_thresh, cfg.nms_window)
    return report.to_dict()


def _supervised_step(state, inputs, coarse_labels, fine_labels, fg_weight):
    fwd = forward_batch(state, inputs)
    lc, dc = coarse_loss_grad(fwd.coarse, coarse_labels, fg_weight)
    lf, df = fine_loss_grad(fwd.fine, fine_labels)
    grads = backward_batch(state, fwd, dcoarse=dc, dfine=df)
    return lc + lf, grads


def _pseudo_step(state, inputs, lam, epoch, fg_weight, schema):
    """Pseudo-label step on an unlabeled batch; loss and grads scaled by lam."""
    fwd = forward_batch(state, inputs)
    coarse_rows, fine_rows = [], []
    for i in range(inputs.shape[0]):
        pl = make_pseudo_labels(fwd.coarse[i], fwd.fine[i], schema, source_epoch=epoch)
        coarse_rows.append(pl.coarse)
        fine_rows.append(pl.fine)
    batch_pseudo = PseudoLabels(coarse=np.stack(coarse_rows),
                                fine=np.stack(fine_rows), source_epoch=epoch)
    lc, dc = coarse_loss_grad(fwd.coarse, batch_pseudo.coarse, fg_weight)
    lf, df = fine_loss_grad(fwd.fine, batch_pseudo.fine)
    grads = backward_batch(state, fwd, dcoarse=lam * dc, dfine=lam * df)
    return lam * (lc + lf), grads


def train_detector(cfg: RunConfig, split: DatasetSplit, schema: LabelSchema,
                   modality: str, strategy: str, epochs: int, stage_tag: str,
                   out_dir=None):
    """Shared supervised/semi-supervised detector loop (stage 1 and baselines).

    The labeled-only prefix consumes the same seeded draws for every
    strategy, so delayed and best-continuation runs share bit-identical
    checkpoint candidates up to the mixing epoch.
    """
    if not split.labeled:
        raise DataError("labeled set is empty")
    arch = _single_arch(cfg, modality, schema, split.labeled[0])
    state = init_model(arch, derived_seed(cfg.seed, f"{stage_tag}-init"))
    rng = np.random.default_rng(derived_seed(cfg.seed, f"{stage_tag}-train"))
    mix_start = cfg.anneal.start

    record = RunRecord(stage=stage_tag, seed=cfg.seed, strategy=strategy,
                       config_hash=cfg.config_hash())
    best_params = state.params.copy()
    best_val = -np.inf
    best_epoch = -1

    for epoch in range(epochs):
        if strategy in ("delayed", "best_continuation") and epoch == mix_start:
            if strategy == "best_continuation":
                # Resume from the strongest labeled-phase checkpoint.
                state = ModelState(arch=arch, params=best_params.copy())
                record.extra["labeled_phase_best_sha"] = _params_sha(best_params)
                record.extra["labeled_phase_best_epoch"] = best_epoch
            else:
                state.opt = None  # fresh moments for the mixed phase
            record.extra["mix_start_params_sha"] = _params_sha(state.params)

        mixed = strategy == "joint" or (
            strategy in ("delayed", "best_continuation") and epoch >= mix_start
        )
        phase = "mixed" if mixed else "labeled_only"
        lr = lr_at(epoch, cfg.base_lr, cfg.warmup_epochs, epochs)

        epoch_loss = 0.0
        n_unlabeled = 0
        for _ in range(cfg.steps_per_epoch):
            batch, origin = sample_batch(split, phase, rng, cfg.batch_size)
            inputs = stack_features(batch, modality)
            if origin == "labeled":
                y_coarse, y_fine = stack_labels(batch)
                loss, grads = _supervised_step(state, inputs, y_coarse, y_fine,
                                               cfg.fg_weight)
            else:
                n_unlabeled += 1
                lam = anneal_weight(epoch, cfg.anneal)
                loss, grads = _pseudo_step(state, inputs, lam, epoch,
                                           cfg.fg_weight, schema)
            opt_step(state, grads, lr, weight_decay=cfg.weight_decay)
            epoch_loss += loss

        val = _val_edit(state, split.val, modality, cfg, schema)
        record.train_loss.append(epoch_loss / cfg.steps_per_epoch)
        record.val_metric.append(val)
        record.unlabeled_batches.append(n_unlabeled)
        if val > best_val:
            best_val = val
            best_epoch = epoch
            best_params = state.params.copy()

    final = ModelState(arch=arch, params=best_params.copy())
    record.best_epoch = best_epoch
    record.best_value = best_val
    record.extra["best_params_sha"] = _params_sha(best_params)
    record.test_report = _test_report(final, split, modality, cfg, schema)
    if out_dir is not None:
        path = f"{out_dir}/{stage_tag}_best.ckpt"
        save_checkpoint(path, final, stage=stage_tag, epoch=best_epoch,
                        metric=best_val, schema_hash=schema_hash(schema),
                        extra={"modality": modality, "strategy": strategy})
        record.checkpoint = f"{stage_tag}_best.ckpt"
    return final, record


def run_stage1(cfg: RunConfig, split: DatasetSplit, schema: LabelSchema = None,
               strategy: str = None, out_dir=None):
    """Semi-supervised pose-teacher pretraining under the chosen strategy."""
    schema = schema or cfg.data.schema
    strategy = strategy or cfg.strategy
    return train_detector(cfg, split, schema, MODALITY_POSE, strategy,
                          cfg.stage1_epochs, "stage1", out_dir)


def run_stage2(cfg: RunConfig, teacher: ModelState, split: DatasetSplit,
               schema: LabelSchema = None, out_dir=None):
    """Distill the frozen pose encoder into RGB and flow student encoders.

    Uses features of labeled and unlabeled clips; no labels are read. Model
    selection minimizes validation embedding distance. Returned students
    carry the teacher's detector heads verbatim: their encoders target the
    teacher's embedding space, so the teacher's detector is the
    prediction-compatible starting point for downstream fine-tuning.
    """
    schema = schema or cfg.data.schema
    teacher_sha = _params_sha(teacher.params)
    pool = list(split.labeled) + list(split.unlabeled)
    if not pool:
        raise DataError("stage 2 needs training clips")
    if not split.val:
        raise DataError("stage 2 needs validation clips")

    pose_train = stack_features(pool, MODALITY_POSE)
    pose_val = stack_features(split.val, MODALITY_POSE)
    emb_train = forward_batch(teacher, pose_train).emb
    emb_val = forward_batch(teacher, pose_val).emb

    students = {}
    records = {}
    for modality in (MODALITY_RGB, MODALITY_FLOW):
        tag = f"stage2-{modality}"
        arch = _single_arch(cfg, modality, schema, pool[0])
        state = init_model(arch, derived_seed(cfg.seed, f"{tag}-init"))
        rng = np.random.default_rng(derived_seed(cfg.seed, f"{tag}-train"))
        feats_train = stack_features(pool, modality)
        feats_val = stack_features(split.val, modality)

        record = RunRecord(stage=tag, seed=cfg.seed, strategy=None,
                           config_hash=cfg.config_hash(),
                           metric_name="val_distill_loss", metric_mode="min")
        best_params = state.params.copy()
        best_val = np.inf
        best_epoch = -1
        n_pool = len(pool)
        for epoch in range(cfg.stage2_epochs):
            lr = lr_at(epoch, cfg.base_lr, cfg.warmup_epochs, cfg.stage2_epochs)
            epoch_loss = 0.0
            for _ in range(cfg.steps_per_epoch):
                idx = rng.choice(n_pool, size=cfg.batch_size,
                                 replace=n_pool < cfg.batch_size)
                fwd = forward_batch(state, feats_train[idx])
                loss, demb = distill_loss_grad(emb_train[idx], fwd.emb)
                grads = backward_batch(state, fwd, demb=demb)
                opt_step(state, grads, lr, weight_decay=cfg.weight_decay)
                epoch_loss += loss
            val = distill_loss(emb_val, forward_batch(state, feats_val).emb)
            record.train_loss.append(epoch_loss / cfg.steps_per_epoch)
            record.val_metric.append(val)
            if val < best_val:
                best_val = val
                best_epoch = epoch
                best_params = state.params.copy()
        student = ModelState(arch=arch, params=best_params.copy())
        for name in ("head.coarse_w", "head.coarse_b", "head.fine_w", "head.fine_b"):
            student.views()[name][:] = teacher.views()[name]
        students[modality] = student
        record.best_epoch = best_epoch
        record.best_value = best_val
        if out_dir is not None:
            path = f"{out_dir}/{tag}_best.ckpt"
            save_checkpoint(path, students[modality], stage=tag, epoch=best_epoch,
                            metric=best_val, schema_hash=schema_hash(schema),
                            extra={"modality": modality})
            record.checkpoint = f"{tag}_best.ckpt"
        records[modality] = record

    if _params_sha(teacher.params) != teacher_sha:
        raise DataError("teacher parameters changed during distillation")
    for record in records.values():
        record.extra["teacher_sha"] = teacher_sha
    return students[MODALITY_RGB], students[MODALITY_FLOW], records


def _fused_from_students(cfg: RunConfig, rgb_student: ModelState,
                         flow_student: ModelState, schema: LabelSchema) -> ModelState:
    arch = ModelArch(
        kind="fused",
        encoders=(rgb_student.arch.encoders[0], flow_student.arch.encoders[0]),
        n_fine=schema.num_classes,
    )
    state = init_model(arch, derived_seed(cfg.seed, "stage3-init"))
    views = state.views()
    for name, src in rgb_student.views().items():
        if name.startswith("enc0."):
            views[name][:] = src
        elif name.startswith("head."):
            # Students carry the teacher's detector heads (see run_stage2).
            views[name][:] = src
    for name, src in flow_student.views().items():
        if name.startswith("enc0."):
            views["enc1." + name[len("enc0."):]][:] = src
    return state


def run_stage3(cfg: RunConfig, rgb_student: ModelState, flow_student: ModelState,
               split: DatasetSplit, schema: LabelSchema = None, out_dir=None):
    """Supervised fine-tuning of the fused detector on labeled clips only.

    Student encoders seed the fused model and are fine-tuned jointly with
    fresh heads; model selection by validation Edit score.
    """
    schema = schema or cfg.data.schema
    if not split.labeled:
        raise DataError("labeled set is empty")
    state = _fused_from_students(cfg, rgb_student, flow_student, schema)
    rng = np.random.default_rng(derived_seed(cfg.seed, "stage3-train"))

    record = RunRecord(stage="stage3", seed=cfg.seed, strategy=None,
                       config_hash=cfg.config_hash())
    best_params = state.params.copy()
    best_val = -np.inf
    best_epoch = -1
    labeled_ids = set()
    for epoch in range(cfg.stage3_epochs):
        lr = lr_at(epoch, cfg.base_lr, cfg.warmup_epochs, cfg.stage3_epochs)
        epoch_loss = 0.0
        for _ in range(cfg.steps_per_epoch):
            batch, _ = sample_batch(split, "labeled_only", rng, cfg.batch_size)
            labeled_ids.update(c.clip_id for c in batch)
            inputs = (stack_features(batch, MODALITY_RGB),
                      stack_features(batch, MODALITY_FLOW))
            fwd = forward_batch(state, inputs)
            y_coarse, y_fine = stack_labels(batch)
            lc, dc = coarse_loss_grad(fwd.coarse, y_coarse, cfg.fg_weight)
            lf, df = fine_loss_grad(fwd.fine, y_fine)
            grads = backward_batch(state, fwd, dcoarse=dc, dfine=df)
            opt_step(state, grads, lr, weight_decay=cfg.weight_decay)
            epoch_loss += lc + lf
        val = _val_edit(state, split.val, "fused", cfg, schema)
        record.train_loss.append(epoch_loss / cfg.steps_per_epoch)
        record.val_metric.append(val)
        if val > best_val:
            best_val = val
            best_epoch = epoch
            best_params = state.params.copy()

    final = ModelState(arch=state.arch, params=best_params.copy())
    record.best_epoch = best_epoch
    record.best_value = best_val
    record.extra["trained_clip_ids"] = sorted(labeled_ids)
    record.test_report = _test_report(final, split, "fused", cfg, schema)
    if out_dir is not None:
        save_checkpoint(f"{out_dir}/stage3_best.ckpt", final, stage="stage3",
                        epoch=best_epoch, metric=best_val,
                        schema_hash=schema_hash(schema),
                        extra={"modality": "fused"})
        record.checkpoint = "stage3_best.ckpt"
    return final, record


def _teacher_cache_entry(teacher: ModelState, view, schema: LabelSchema):
    """Teacher pseudo-labels, confidence, and event frames for one clip."""
    fwd = forward_batch(teacher, modality_features(view, MODALITY_POSE)[None])
    pseudo = make_pseudo_labels(fwd.coarse[0], fwd.fine[0], schema)
    frames = np.flatnonzero(pseudo.coarse == 1)
    conf = None
    if frames.size:
        probs = sigmoid(fwd.fine[0])
        conf = clip_confidence([group_confidence(probs[t], schema) for t in frames])
    return pseudo, frames, conf


def run_awd(cfg: RunConfig, teacher: ModelState, split: DatasetSplit,
            schema: LabelSchema = None, out_dir=None):
    """Prediction-level distillation into an RGB student with adaptive weights.

    The reliability mapping is built from the validation set (rebuilt every
    ``mapping_refresh`` epochs when nonzero); unlabeled clips are supervised
    by teacher pseudo-labels scaled per clip by the queried weight, and
    clips where the teacher predicts no events contribute the coarse term
    only.
    """
    schema = schema or cfg.data.schema
    if not split.val:
        raise DataError("adaptive weighting needs a validation set with ground truth")
    if not split.labeled:
        raise DataError("labeled set is empty")
    arch = _single_arch(cfg, MODALITY_RGB, schema, split.labeled[0])
    state = init_model(arch, derived_seed(cfg.seed, "awd-init"))
    rng = np.random.default_rng(derived_seed(cfg.seed, "awd-train"))

    teacher_fine = fine_logit_fn(teacher, MODALITY_POSE)
    mapping = build_mapping(split.val, teacher_fine,
                            fine_logit_fn(state, MODALITY_RGB), schema, cfg.knn_k)

    cache = {}

    def teacher_entry(view):
        if view.clip_id not in cache:
            cache[view.clip_id] = _teacher_cache_entry(teacher, view, schema)
        return cache[view.clip_id]

    record = RunRecord(stage="awd", seed=cfg.seed, strategy=None,
                       config_hash=cfg.config_hash())
    best_params = state.params.copy()
    best_val = -np.inf
    best_epoch = -1
    for epoch in range(cfg.stage1_epochs):
        if cfg.mapping_refresh > 0 and epoch > 0 and epoch % cfg.mapping_refresh == 0:
            mapping = build_mapping(split.val, teacher_fine,
                                    fine_logit_fn(state, MODALITY_RGB),
                                    schema, cfg.knn_k)
        lr = lr_at(epoch, cfg.base_lr, cfg.warmup_epochs, cfg.stage1_epochs)
        epoch_loss = 0.0
        weights = []
        n_unlabeled = 0
        for _ in range(cfg.steps_per_epoch):
            batch, origin = sample_batch(split, "mixed", rng, cfg.batch_size)
            inputs = stack_features(batch, MODALITY_RGB)
            if origin == "labeled":
                y_coarse, y_fine = stack_labels(batch)
                loss, grads = _supervised_step(state, inputs, y_coarse, y_fine,
                                               cfg.fg_weight)
            else:
                n_unlabeled += 1
                fwd = forward_batch(state, inputs)
                n = len(batch)
                dcoarse = np.zeros_like(fwd.coarse)
                dfine = np.zeros_like(fwd.fine)
                loss = 0.0
                for i, view in enumerate(batch):
                    pseudo, frames, t_conf = teacher_entry(view)
                    if frames.size == 0:
                        lc, dc = coarse_loss_grad(fwd.coarse[i], pseudo.coarse,
                                                  cfg.fg_weight)
                        dcoarse[i] = dc / n
                        loss += lc / n
                        continue
                    s_probs = sigmoid(fwd.fine[i][frames])
                    s_conf = clip_confidence(
                        [group_confidence(p, schema) for p in s_probs])
                    w = knn_weight(mapping, s_conf, t_conf)
                    weights.append(w)
                    li, dc, df = awd_student_loss_grad(fwd.coarse[i], fwd.fine[i],
                                                       pseudo, w, cfg.fg_weight)
                    dcoarse[i] = dc / n
                    dfine[i] = df / n
                    loss += li / n
                grads = backward_batch(state, fwd, dcoarse=dcoarse, dfine=dfine)
            opt_step(state, grads, lr, weight_decay=cfg.weight_decay)
            epoch_loss += loss
        val = _val_edit(state, split.val, MODALITY_RGB, cfg, schema)
        record.train_loss.append(epoch_loss / cfg.steps_per_epoch)
        record.val_metric.append(val)
        record.unlabeled_batches.append(n_unlabeled)
        record.extra.setdefault("median_weight", []).append(
            float(np.median(weights)) if weights else None)
        if val > best_val:
            best_val = val
            best_epoch = epoch
            best_params = state.params.copy()

    final = ModelState(arch=arch, params=best_params.copy())
    record.best_epoch = best_epoch
    record.best_value = best_val
    record.test_report = _test_report(final, split, MODALITY_RGB, cfg, schema)
    if out_dir is not None:
        save_checkpoint(f"{out_dir}/awd_best.ckpt", final, stage="awd",
                        epoch=best_epoch, metric=best_val,
                        schema_hash=schema_hash(schema),
                        extra={"modality": MODALITY_RGB})
        save_mapping(f"{out_dir}/awd_mapping.txt", mapping)
        record.checkpoint = "awd_best.ckpt"
        record.extra["mapping_file"] = "awd_mapping.txt"
    return final, record


# ---------------------------------------------------------------------------
# Dataset assembly, ablation, benchmark
# ---------------------------------------------------------------------------

def make_default_split(cfg: RunConfig) -> DatasetSplit:
    """Generate the training pool and a disjoint test pool, then split.

    The run seed picks a fresh world (patterns, projections) plus fresh clip
    draws; train and test pools share the world but use disjoint generator
    streams, standing in for unseen videos of the same sport.
    """
    data_cfg = replace(cfg.data, world_seed=derived_seed(cfg.seed, "world"))
    pool = generate_dataset(data_cfg, derived_seed(cfg.seed, "train-pool"))
    test = []
    if cfg.n_test:
        test_cfg = replace(data_cfg, n_clips=cfg.n_test)
        test = generate_dataset(test_cfg, derived_seed(cfg.seed, "test-pool"))
    return split_k_clip(pool, cfg.k, derived_seed(cfg.seed, "split"),
                        n_val=cfg.n_val, test_clips=test)


def run_ablation(cfg: RunConfig, out_dir=None) -> dict:
    """Stage-1 strategy comparison on identical splits and seeds.

    Rows: labeled-only baseline plus the three integration strategies, each
    with val/test Edit mean, standard deviation, and median over seeds.
    """
    strategies = ("labeled_only", "joint", "delayed", "best_continuation")
    rows = {}
    for strategy in strategies:
        vals, tests = [], []
        for seed in cfg.seeds:
            scfg = cfg.with_seed(seed)
            split = make_default_split(scfg)
            _, rec = run_stage1(scfg, split, strategy=strategy)
            vals.append(rec.best_value)
            tests.append(rec.test_report["edit"] if rec.test_report else None)
        row = {
            "val_edit_mean": float(np.mean(vals)),
            "val_edit_std": float(np.std(vals)),
            "val_edit_median": float(np.median(vals)),
        }
        if all(t is not None for t in tests):
            row.update({
                "test_edit_mean": float(np.mean(tests)),
                "test_edit_std": float(np.std(tests)),
                "test_edit_median": float(np.median(tests)),
            })
        rows[strategy] = row
    return {"seeds": list(cfg.seeds), "rows": rows}


def run_benchmark(cfg: RunConfig) -> dict:
    """Directional benchmark: semi-supervised gain and distillation gain.

    Per seed: stage-1 labeled-only vs best-continuation teachers, the full
    distillation chain on top of the best-continuation teacher, and an
    RGB-only detector trained from scratch with the stage-1 budget. Reports
    per-seed test Edit scores and the seed medians.
    """
    per_seed = []
    for seed in cfg.seeds:
        scfg = cfg.with_seed(seed)
        split = make_default_split(scfg)
        _, lab_rec = run_stage1(scfg, split, strategy="labeled_only")
        teacher, bc_rec = run_stage1(scfg, split, strategy="best_continuation")
        rgb_student, flow_student, _ = run_stage2(scfg, teacher, split)
        _, s3_rec = run_stage3(scfg, rgb_student, flow_student, split)
        _, scratch_rec = train_detector(scfg, split, scfg.data.schema,
                                        MODALITY_RGB, "labeled_only",
                                        scfg.stage1_epochs, "rgb-scratch")
        per_seed.append({
            "seed": seed,
            "labeled_only": lab_rec.test_report["edit"],
            "best_continuation": bc_rec.test_report["edit"],
            "distilled": s3_rec.test_report["edit"],
            "rgb_scratch": scratch_rec.test_report["edit"],
        })

    def med(key):
        return float(statistics.median(row[key] for row in per_seed))

    medians = {key: med(key) for key in
               ("labeled_only", "best_continuation", "distilled", "rgb_scratch")}
    return {
        "per_seed": per_seed,
        "medians": medians,
        "semi_supervised_margin": medians["best_continuation"] - medians["labeled_only"],
        "distillation_margin": medians["distilled"] - medians["rgb_scratch"],
    }
