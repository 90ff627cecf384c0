"""Command-line interface.

Subcommands: generate, split, train-stage1, train-stage2, train-stage3,
train-awd, evaluate, ablate, report. Flags mirror the run configuration; a
``--config`` JSON file, when given, overrides flag values. Relative output
paths are resolved under ``$SPOTKD_OUT`` (default: current directory).
Failures print a one-line machine-readable JSON error to stderr and exit
nonzero: 2 config/schema/argument, 3 data, 4 shape/numeric, 1 internal.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from spotkd.datagen import DatasetSplit, UnlabeledView, generate_dataset, load_clips, save_clips, split_k_clip
from spotkd.exceptions import ConfigError, DataError, SpotkdError
from spotkd.metrics import evaluate_split
from spotkd.nn import load_checkpoint
from spotkd.pipeline import (
    RunConfig,
    derived_seed,
    run_ablation,
    run_awd,
    run_stage1,
    run_stage2,
    run_stage3,
)
from spotkd.pipeline.records import results_payload, write_results
from spotkd.pipeline.runner import fused_predictor, single_predictor

_EXIT_CODES = {
    "config": 2, "schema": 2, "argument": 2,
    "data": 3,
    "shape": 4, "numeric": 4,
    "internal": 1,
}

# CLI flag name -> RunConfig key (top level) or data.* key
_CFG_FLAGS = {
    "k": "k", "seed": "seed", "strategy": "strategy",
    "stage1_epochs": "stage1_epochs", "stage2_epochs": "stage2_epochs",
    "stage3_epochs": "stage3_epochs", "n_val": "n_val", "n_test": "n_test",
    "batch_size": "batch_size", "steps_per_epoch": "steps_per_epoch",
    "base_lr": "base_lr", "fg_weight": "fg_weight", "knn_k": "knn_k",
    "delta": "delta",
}
_DATA_FLAGS = {"n_clips": "n_clips", "frames": "T", "event_rate": "event_rate"}


def _out_root() -> Path:
    return Path(os.environ.get("SPOTKD_OUT", "."))


def _resolve_out(path: str) -> Path:
    p = Path(path)
    full = p if p.is_absolute() else _out_root() / p
    full.parent.mkdir(parents=True, exist_ok=True)
    return full


def _resolve_out_dir(path: str) -> Path:
    p = Path(path)
    full = p if p.is_absolute() else _out_root() / p
    full.mkdir(parents=True, exist_ok=True)
    return full


def _merge(dst: dict, src: dict) -> dict:
    for key, val in src.items():
        if isinstance(val, dict) and isinstance(dst.get(key), dict):
            _merge(dst[key], val)
        else:
            dst[key] = val
    return dst


def _load_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc


def resolve_config(args) -> RunConfig:
    """Defaults -> provided flags -> config file (file wins)."""
    cfg = RunConfig().to_dict()
    if getattr(args, "schema", None):
        cfg["data"]["schema"] = open(args.schema, encoding="utf-8").read()
    for flag, key in _CFG_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            cfg[key] = val
    for flag, key in _DATA_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            cfg["data"][key] = val
    if getattr(args, "config", None):
        _merge(cfg, _load_config_file(args.config))
    return RunConfig.from_dict(cfg)


def _split_from_files(args, cfg: RunConfig) -> DatasetSplit:
    schema = cfg.data.schema
    pool = load_clips(args.data, schema)
    test = load_clips(args.test_data, schema) if getattr(args, "test_data", None) else []
    if getattr(args, "split", None):
        with open(args.split, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        by_id = {c.clip_id: c for c in pool}
        test_by_id = {c.clip_id: c for c in test}

        def pick(ids, pools):
            out = []
            for cid in ids:
                for p in pools:
                    if cid in p:
                        out.append(p[cid])
                        break
                else:
                    raise DataError(f"split references unknown clip {cid!r}")
            return out

        return DatasetSplit(
            labeled=pick(manifest["labeled"], [by_id]),
            unlabeled=[UnlabeledView(c) for c in pick(manifest["unlabeled"], [by_id])],
            val=pick(manifest.get("val", []), [by_id]),
            test=pick(manifest.get("test", []), [test_by_id, by_id]) if manifest.get("test")
            else test,
        )
    return split_k_clip(pool, cfg.k, derived_seed(cfg.seed, "split"),
                        n_val=cfg.n_val, test_clips=test)


def _write_record(out_dir: Path, name: str, cfg: RunConfig, record) -> None:
    payload = results_payload("run", {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "record": record.to_dict(),
    })
    write_results(out_dir / f"{name}_record.json", payload)


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = resolve_config(args)
    clips = generate_dataset(cfg.data, cfg.seed)
    save_clips(_resolve_out(args.out), clips)
    print(f"wrote {len(clips)} clips to {args.out}")
    return 0


def cmd_split(args) -> int:
    cfg = resolve_config(args)
    split = _split_from_files(args, cfg)
    manifest = {
        "labeled": [c.clip_id for c in split.labeled],
        "unlabeled": [v.clip_id for v in split.unlabeled],
        "val": [c.clip_id for c in split.val],
        "test": [c.clip_id for c in split.test],
    }
    out = _resolve_out(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"split: {len(manifest['labeled'])} labeled / "
          f"{len(manifest['unlabeled'])} unlabeled / {len(manifest['val'])} val")
    return 0


def cmd_train_stage1(args) -> int:
    cfg = resolve_config(args)
    split = _split_from_files(args, cfg)
    out_dir = _resolve_out_dir(args.out)
    model, record = run_stage1(cfg, split, out_dir=str(out_dir))
    _write_record(out_dir, "stage1", cfg, record)
    print(f"stage1[{record.strategy}] best val edit {record.best_value:.2f} "
          f"at epoch {record.best_epoch}")
    return 0


def cmd_train_stage2(args) -> int:
    cfg = resolve_config(args)
    split = _split_from_files(args, cfg)
    teacher, _ = load_checkpoint(args.teacher)
    out_dir = _resolve_out_dir(args.out)
    _, _, records = run_stage2(cfg, teacher, split, out_dir=str(out_dir))
    for modality, record in records.items():
        _write_record(out_dir, f"stage2_{modality}", cfg, record)
        print(f"stage2[{modality}] best val distill loss {record.best_value:.6f}")
    return 0


def cmd_train_stage3(args) -> int:
    cfg = resolve_config(args)
    split = _split_from_files(args, cfg)
    rgb_student, _ = load_checkpoint(args.rgb_student)
    flow_student, _ = load_checkpoint(args.flow_student)
    out_dir = _resolve_out_dir(args.out)
    _, record = run_stage3(cfg, rgb_student, flow_student, split, out_dir=str(out_dir))
    _write_record(out_dir, "stage3", cfg, record)
    print(f"stage3 best val edit {record.best_value:.2f} at epoch {record.best_epoch}")
    return 0


def cmd_train_awd(args) -> int:
    cfg = resolve_config(args)
    split = _split_from_files(args, cfg)
    teacher, _ = load_checkpoint(args.teacher)
    out_dir = _resolve_out_dir(args.out)
    _, record = run_awd(cfg, teacher, split, out_dir=str(out_dir))
    _write_record(out_dir, "awd", cfg, record)
    print(f"awd best val edit {record.best_value:.2f} at epoch {record.best_epoch}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = resolve_config(args)
    schema = cfg.data.schema
    clips = load_clips(args.data, schema)
    model, header = load_checkpoint(args.model)
    modality = header.get("extra", {}).get("modality", "pose")
    predict = fused_predictor(model) if modality == "fused" \
        else single_predictor(model, modality)
    report = evaluate_split(predict, clips, schema, cfg.delta,
                            cfg.decode_thresh, cfg.nms_window)
    payload = results_payload("eval", {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "model": str(args.model),
        "modality": modality,
        "report": report.to_dict(),
    })
    write_results(_resolve_out(args.out), payload)
    print(f"edit {report.edit:.2f}  f1@{report.delta} {report.f1_evt:.2f} "
          f"over {report.n_clips} clips")
    return 0


def cmd_ablate(args) -> int:
    cfg = resolve_config(args)
    if args.seeds:
        cfg = RunConfig.from_dict({**cfg.to_dict(),
                                   "seeds": [int(s) for s in args.seeds.split(",")]})
    table = run_ablation(cfg)
    payload = results_payload("ablation", {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        **table,
    })
    write_results(_resolve_out(args.out), payload)
    print(f"{'strategy':<20} {'val edit':>12} {'test edit':>12}")
    for strategy, row in table["rows"].items():
        val = f"{row['val_edit_mean']:.2f}±{row['val_edit_std']:.2f}"
        test = f"{row.get('test_edit_mean', float('nan')):.2f}" \
               f"±{row.get('test_edit_std', float('nan')):.2f}"
        print(f"{strategy:<20} {val:>12} {test:>12}")
    return 0


def cmd_report(args) -> int:
    with open(args.results, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    kind = payload.get("kind", "?")
    print(f"results file: {args.results} (kind={kind}, "
          f"version={payload.get('results_version')})")
    if kind == "eval":
        rep = payload["report"]
        print(f"  edit: {rep['edit']:.2f}")
        print(f"  f1@{rep['delta']}: {rep['f1_evt']:.2f}")
        for name, score in rep.get("per_class_f1", {}).items():
            print(f"    {name:<40} {score:6.2f}")
    elif kind == "run":
        rec = payload["record"]
        print(f"  stage: {rec['stage']}  strategy: {rec.get('strategy')}")
        print(f"  best {rec['metric_name']}: {rec['best_value']:.4f} "
              f"at epoch {rec['best_epoch']}")
        if rec.get("test_report"):
            print(f"  test edit: {rec['test_report']['edit']:.2f}  "
                  f"test f1: {rec['test_report']['f1_evt']:.2f}")
    elif kind == "ablation":
        for strategy, row in payload["rows"].items():
            print(f"  {strategy:<20} val {row['val_edit_mean']:6.2f} "
                  f"± {row['val_edit_std']:.2f}")
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser, data_flags: bool = True):
    p.add_argument("--config", help="JSON config file; its values override flags")
    p.add_argument("--schema", help="schema file (default: built-in tennis schema)")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--n-val", dest="n_val", type=int)
    p.add_argument("--n-test", dest="n_test", type=int)
    p.add_argument("--strategy", choices=("labeled_only", "joint", "delayed",
                                          "best_continuation"))
    p.add_argument("--stage1-epochs", dest="stage1_epochs", type=int)
    p.add_argument("--stage2-epochs", dest="stage2_epochs", type=int)
    p.add_argument("--stage3-epochs", dest="stage3_epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--steps-per-epoch", dest="steps_per_epoch", type=int)
    p.add_argument("--base-lr", dest="base_lr", type=float)
    p.add_argument("--fg-weight", dest="fg_weight", type=float)
    p.add_argument("--knn-k", dest="knn_k", type=int)
    p.add_argument("--delta", type=int)
    if data_flags:
        p.add_argument("--n-clips", dest="n_clips", type=int)
        p.add_argument("--frames", type=int, help="frames per clip (T)")
        p.add_argument("--event-rate", dest="event_rate", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spotkd",
        description="Few-shot event spotting with multimodal distillation "
                    "on synthetic sequence data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic dataset file")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output dataset file (.jsonl)")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("split", help="write a k-clip split manifest")
    _add_config_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--test-data", dest="test_data")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_split)

    for name, fn, extra in (
        ("train-stage1", cmd_train_stage1, ()),
        ("train-stage2", cmd_train_stage2, ("--teacher",)),
        ("train-stage3", cmd_train_stage3, ("--rgb-student", "--flow-student")),
        ("train-awd", cmd_train_awd, ("--teacher",)),
    ):
        p = sub.add_parser(name, help=f"run {name.replace('-', ' ')}")
        _add_config_flags(p)
        p.add_argument("--data", required=True)
        p.add_argument("--test-data", dest="test_data")
        p.add_argument("--split", help="split manifest from the split subcommand")
        p.add_argument("--out", required=True, help="output directory")
        for flag in extra:
            p.add_argument(flag, dest=flag.lstrip("-").replace("-", "_"),
                           required=True)
        p.set_defaults(fn=fn)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset file")
    _add_config_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="results file")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("ablate", help="stage-1 strategy ablation table")
    _add_config_flags(p)
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--out", required=True, help="results file")
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("report", help="pretty-print a results file")
    p.add_argument("--results", required=True)
    p.set_defaults(fn=cmd_report)

    return parser


def _fail(category: str, exc: Exception) -> int:
    print(json.dumps({"error": {"category": category, "message": str(exc)}}),
          file=sys.stderr)
    return _EXIT_CODES.get(category, 1)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SpotkdError as exc:
        return _fail(exc.category, exc)
    except ValueError as exc:
        return _fail("argument", exc)
    except OSError as exc:
        return _fail("data", exc)
    except Exception as exc:  # noqa: BLE001 - last-resort CLI boundary
        return _fail("internal", exc)


if __name__ == "__main__":
    sys.exit(main())
