"""Command-line surface binding the pipeline into reproducible steps.

Each invocation owns one run directory: an immutable config snapshot, the
artifacts, and a machine-readable summary.json carrying the config hash
and checkpoint hashes needed to reproduce it. Commands are idempotent
when their summary already exists unless --force is given.

Exit codes: 0 ok, 1 user error (bad arguments, config or input files),
2 internal error.
"""

from __future__ import annotations

import os

# These training workloads are small-matrix bound; BLAS thread fan-out
# costs more than it buys. Must be set before numpy loads the BLAS.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import dsp, storage
from .config import ConfigError, ExperimentConfig
from .data import (
    ClipRecord,
    ManifestError,
    load_manifest,
    normalized_features,
    pseudo_label_strong,
    pseudo_label_weak,
    write_manifest,
)
from .decode import (
    DecodeParams,
    binarize_tags,
    decode_sed,
    sed_scores_for_context,
    tune_sed_params,
    tune_tag_thresholds,
)
from .events import rasterize_events_fast
from .metrics import event_f1, frame_f1, tagging_f1
from .models import Fbcrnn, TagCnn, ensemble_average, load_checkpoint
from .toy import default_toy_spec, generate_toy_dataset
from .trainer import TrainRun, train

CACHE_ENV = "FBSED_CACHE_DIR"


class UsageError(ValueError):
    pass


def _cache_dir():
    value = os.environ.get(CACHE_ENV, "")
    return Path(value) if value else None


def _prepare_run_dir(out: str, force: bool):
    """Returns the run dir, or None when outputs exist and --force is absent."""
    run_dir = Path(out)
    summary = run_dir / "summary.json"
    if summary.exists() and not force:
        print(f"outputs already exist in {run_dir} (use --force to redo)")
        return None
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _write_summary(run_dir: Path, payload: dict):
    payload = dict(payload)
    payload.setdefault("ok", True)
    (run_dir / "summary.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_config(path: str) -> ExperimentConfig:
    if not path:
        raise UsageError("--config is required for this command")
    if not Path(path).exists():
        raise UsageError(f"config file not found: {path}")
    return ExperimentConfig.load(path)


def _apply_manifest_overrides(cfg: ExperimentConfig, overrides):
    for item in overrides or []:
        if "=" not in item:
            raise UsageError(f"--set-manifest expects subset=path, got {item!r}")
        subset, path = item.split("=", 1)
        cfg.data.manifests[subset] = path


def _records(cfg: ExperimentConfig, subset: str, required=True):
    path = cfg.data.manifests.get(subset)
    if not path:
        if required:
            raise UsageError(f"config data.manifests lacks subset {subset!r}")
        return []
    records, _ = load_manifest(path)
    return records


def _root(cfg) -> Path | None:
    return Path(cfg.data.root) if cfg.data.root else None


def _load_members(paths: str):
    members = []
    for path in paths.split(","):
        model, _, meta = load_checkpoint(path.strip())
        members.append((model, meta, storage.file_sha256(path.strip())))
    return members


# --------------------------------------------------------------------------
# commands


def cmd_gen_toy(args) -> int:
    run_dir = _prepare_run_dir(args.out, args.force)
    if run_dir is None:
        return 0
    spec = default_toy_spec(seed=args.seed)
    manifests = generate_toy_dataset(spec, run_dir)
    cfg = ExperimentConfig.from_dict({
        "seed": args.seed,
        "classes": list(spec.class_names),
        "data": {
            "manifests": {k: str(v) for k, v in manifests.items() if k != "sealed_truth"},
            "stats": str(run_dir / "stats.fbb"),
        },
        "model": {"kind": "fbcrnn", "mode": "fbcrnn", "dims_preset": "toy"},
        "train": {"total_steps": 2000, "checkpoint_every": 100, "batch_size": 8},
        "augment": {"p_mix": 2.0 / 3.0, "t_max_s": 3.2},
    })
    cfg.save(run_dir / "config.json")
    _write_summary(run_dir, {
        "command": "gen-toy",
        "seed": args.seed,
        "config": str(run_dir / "config.json"),
        "config_hash": cfg.config_hash(),
        "manifests": {k: str(v) for k, v in manifests.items()},
    })
    print(f"toy dataset and config written to {run_dir}")
    return 0


def cmd_extract_stats(args) -> int:
    cfg = _load_config(args.config)
    out = args.out or str(Path(cfg.data.stats).parent / "extract-stats")
    run_dir = _prepare_run_dir(out, args.force)
    if run_dir is None:
        return 0
    records = []
    for subset in ("weak", "synthetic", "unlabeled"):
        records.extend(_records(cfg, subset, required=subset != "unlabeled"))
    from .trainer import stats_from_records

    stats = stats_from_records(records, _root(cfg))
    dsp.save_stats(cfg.data.stats, stats)
    cfg.save(run_dir / "config.json")
    _write_summary(run_dir, {
        "command": "extract-stats",
        "config_hash": cfg.config_hash(),
        "stats": cfg.data.stats,
        "stats_sha256": storage.file_sha256(cfg.data.stats),
        "n_clips": len(records),
    })
    print(f"global stats over {len(records)} clips written to {cfg.data.stats}")
    return 0


def _cmd_train(args, model_kind: str) -> int:
    cfg = _load_config(args.config)
    _apply_manifest_overrides(cfg, args.set_manifest)
    run_dir = _prepare_run_dir(args.out, args.force)
    if run_dir is None:
        return 0
    seed = cfg.seed if args.seed is None else args.seed
    mode = cfg.model.mode
    if model_kind == "fbcrnn" and args.mode:
        mode = {"fbcrnn": "fbcrnn", "fwd-frame": "fwd_frame",
                "fwd-last": "fwd_last"}.get(args.mode)
        if mode is None:
            raise UsageError(f"unknown mode {args.mode!r}")
    conditioned = cfg.model.conditioned
    if model_kind == "tagcnn" and args.no_condition:
        conditioned = False
    run = TrainRun(
        classes=cfg.classes,
        model_kind=model_kind,
        mode=mode,
        conditioned=conditioned,
        dims_preset=cfg.model.dims_preset,
        total_steps=cfg.train.total_steps,
        checkpoint_every=cfg.train.checkpoint_every,
        batch_size=cfg.train.batch_size,
        augment=cfg.augment,
        selection_objective=cfg.train.selection_objective,
        seed=seed,
    )
    train_records = []
    for subset in ("weak", "synthetic", "unlabeled"):
        train_records.extend(_records(cfg, subset, required=subset == "weak"))
    val_records = _records(cfg, "validation")
    stats = dsp.load_stats(cfg.data.stats)
    cfg.save(run_dir / "config.json")
    result = train(run, train_records, val_records, stats, run_dir, _root(cfg))
    _write_summary(run_dir, {
        "command": f"train-{'fbcrnn' if model_kind == 'fbcrnn' else 'cnn'}",
        "seed": seed,
        "mode": mode,
        "conditioned": conditioned,
        "config_hash": cfg.config_hash(),
        "run_config": run.to_dict(),
        "best_step": result.best_step,
        "best_objective": result.best_objective,
        "checkpoints": {
            "best": str(result.best_path),
            "best_sha256": storage.file_sha256(result.best_path),
            "last": str(result.last_path),
            "last_sha256": storage.file_sha256(result.last_path),
        },
    })
    print(f"best checkpoint at step {result.best_step} "
          f"(objective {result.best_objective:.4f}) -> {result.best_path}")
    return 0


def _ensemble_tag_scores(members, records, stats, root):
    scores = []
    for rec in records:
        feats = normalized_features(rec, stats, root, _cache_dir())
        scores.append(ensemble_average([m.tag(feats) for m, _, _ in members]))
    return np.stack(scores)


def _conditioning_masks(records, classes, taggers, alphas, stats, root):
    """Tag masks for detection: predicted by the tagger ensemble when
    given, otherwise the records' own (ground-truth or pseudo) tags."""
    if taggers:
        scores = _ensemble_tag_scores(taggers, records, stats, root)
        return binarize_tags(scores, alphas)
    return np.stack([r.tag_vector(classes) for r in records])


def cmd_tune(args) -> int:
    cfg = _load_config(args.config)
    run_dir = _prepare_run_dir(args.out, args.force)
    if run_dir is None:
        return 0
    members = _load_members(args.members)
    taggers = _load_members(args.taggers) if args.taggers else []
    stats = dsp.load_stats(cfg.data.stats)
    val_records = _records(cfg, "validation")
    root = _root(cfg)
    classes = cfg.classes
    objective = args.objective.replace("-", "_")
    if objective not in ("tagging_f1", "frame_f1", "event_f1"):
        raise UsageError(f"unknown objective {args.objective!r}")
    grid = cfg.decode.threshold_grid()

    kinds = {meta["model"]["kind"] for _, meta, _ in members}
    if len(kinds) != 1:
        raise UsageError("members must share one model kind")
    kind = kinds.pop()

    ref_tags = np.stack([r.tag_vector(classes) for r in val_records])
    if kind == "fbcrnn":
        tag_scores = _ensemble_tag_scores(members, val_records, stats, root)
        alphas = tune_tag_thresholds(tag_scores, ref_tags, grid)
        masks = binarize_tags(tag_scores, alphas)
    else:
        tagger_alphas = None
        if taggers:
            tagger_scores = _ensemble_tag_scores(taggers, val_records, stats, root)
            tagger_alphas = tune_tag_thresholds(tagger_scores, ref_tags, grid)
        alphas = tagger_alphas if tagger_alphas is not None else np.full(len(classes), 0.5)
        masks = _conditioning_masks(val_records, classes, taggers, alphas, stats, root)

    if objective == "tagging_f1":
        params = DecodeParams(per_class={})
        from .decode import ClassDecodeParams

        for k, name in enumerate(classes):
            params.per_class[name] = ClassDecodeParams(
                alpha=float(alphas[k]), beta=0.5,
                context=cfg.decode.contexts[0], median=cfg.decode.medians[0])
    else:
        scores_by_context = {}
        if kind == "fbcrnn":
            for c in cfg.decode.contexts:
                mats = []
                for rec in val_records:
                    feats = normalized_features(rec, stats, root, _cache_dir())
                    member_scores = [sed_scores_for_context(m, feats, c)
                                     for m, _, _ in members]
                    mats.append(ensemble_average(member_scores))
                scores_by_context[int(c)] = mats
        else:
            mats = []
            for i, rec in enumerate(val_records):
                feats = normalized_features(rec, stats, root, _cache_dir())
                member_scores = [
                    m.forward(feats[None], masks[i][None], training=False)[0]
                    for m, _, _ in members
                ]
                mats.append(ensemble_average(member_scores))
            scores_by_context[None] = mats
        clip_refs = [list(r.events) for r in val_records]
        params = tune_sed_params(scores_by_context, clip_refs, masks, classes,
                                 objective, grid, cfg.decode.medians, alphas)
    params_path = run_dir / "decode_params.json"
    params.save(params_path)
    cfg.save(run_dir / "config.json")
    _write_summary(run_dir, {
        "command": "tune",
        "objective": objective,
        "config_hash": cfg.config_hash(),
        "members": [sha for _, _, sha in members],
        "params": str(params_path),
    })
    print(f"decode parameters written to {params_path}")
    return 0


def cmd_pseudo_label_weak(args) -> int:
    cfg = _load_config(args.config)
    run_dir = _prepare_run_dir(args.out, args.force)
    if run_dir is None:
        return 0
    members = _load_members(args.members)
    params = DecodeParams.load(args.params)
    stats = dsp.load_stats(cfg.data.stats)
    records = _records(cfg, args.subset)
    classes = cfg.classes
    alphas = params.alphas(classes)
    updated = pseudo_label_weak([m for m, _, _ in members], records, alphas,
                                classes, stats, _root(cfg))
    out_manifest = run_dir / f"pseudo_weak_{args.subset}.jsonl"
    write_manifest(out_manifest, updated, meta={
        "kind": "pseudo_weak",
        "members": [sha for _, _, sha in members],
        "alphas": [float(a) for a in alphas],
    })
    cfg.save(run_dir / "config.json")
    _write_summary(run_dir, {
        "command": "pseudo-label-weak",
        "config_hash": cfg.config_hash(),
        "members": [sha for _, _, sha in members],
        "manifest": str(out_manifest),
        "n_clips": len(updated),
    })
    print(f"weak pseudo labels -> {out_manifest}")
    return 0


def cmd_pseudo_label_strong(args) -> int:
    cfg = _load_config(args.config)
    run_dir = _prepare_run_dir(args.out, args.force)
    if run_dir is None:
        return 0
    members = _load_members(args.members)
    params = DecodeParams.load(args.params)
    stats = dsp.load_stats(cfg.data.stats)
    classes = cfg.classes
    outputs = {}
    for subset in args.subsets.split(","):
        subset = subset.strip()
        records = _records(cfg, subset)
        updated = pseudo_label_strong([m for m, _, _ in members], records,
                                      params, classes, stats, _root(cfg))
        out_manifest = run_dir / f"pseudo_strong_{subset}.jsonl"
        write_manifest(out_manifest, updated, meta={
            "kind": "pseudo_strong",
            "members": [sha for _, _, sha in members],
            "params": json.loads(Path(args.params).read_text()),
        })
        outputs[subset] = str(out_manifest)
    cfg.save(run_dir / "config.json")
    _write_summary(run_dir, {
        "command": "pseudo-label-strong",
        "config_hash": cfg.config_hash(),
        "members": [sha for _, _, sha in members],
        "manifests": outputs,
    })
    for subset, path in outputs.items():
        print(f"strong pseudo labels ({subset}) -> {path}")
    return 0


def cmd_predict(args) -> int:
    cfg = _load_config(args.config)
    run_dir = _prepare_run_dir(args.out, args.force)
    if run_dir is None:
        return 0
    members = _load_members(args.members)
    taggers = _load_members(args.taggers) if args.taggers else []
    params = DecodeParams.load(args.params)
    stats = dsp.load_stats(cfg.data.stats)
    records, _ = load_manifest(args.manifest)
    classes = cfg.classes
    root = _root(cfg)
    alphas = params.alphas(classes)
    contexts = params.contexts(classes)
    kind = members[0][1]["model"]["kind"]

    scores_dir = run_dir / "scores"
    hyp_records = []
    for rec in records:
        feats = normalized_features(rec, stats, root, _cache_dir())
        if kind == "fbcrnn":
            tag_scores = ensemble_average([m.tag(feats) for m, _, _ in members])
            mask = binarize_tags(tag_scores, alphas)
            from .decode import ensemble_sed_scores

            sed = ensemble_sed_scores([m for m, _, _ in members], feats, mask, contexts)
        else:
            if taggers:
                tag_scores = ensemble_average([m.tag(feats) for m, _, _ in taggers])
                mask = binarize_tags(tag_scores, alphas)
            else:
                tag_scores = rec.tag_vector(classes).astype(float)
                mask = rec.tag_vector(classes)
            sed = ensemble_average([
                m.forward(feats[None], mask[None].astype(np.float32), training=False)[0]
                for m, _, _ in members
            ])
        storage.save_matrix(scores_dir / f"{rec.clip_id}.tag.fbm", tag_scores)
        storage.save_matrix(scores_dir / f"{rec.clip_id}.sed.fbm", sed)
        events = decode_sed(sed, classes, params)
        hyp_records.append(ClipRecord(
            clip_id=rec.clip_id, audio_path=rec.audio_path,
            duration_s=rec.duration_s, subset="eval",
            tags=tuple(c for c, t in zip(classes, mask) if t),
            events=tuple(events)))
    events_path = run_dir / "events.jsonl"
    write_manifest(events_path, hyp_records, meta={
        "kind": "predictions", "members": [sha for _, _, sha in members]})
    cfg.save(run_dir / "config.json")
    _write_summary(run_dir, {
        "command": "predict",
        "config_hash": cfg.config_hash(),
        "members": [sha for _, _, sha in members],
        "events": str(events_path),
        "scores_dir": str(scores_dir),
        "n_clips": len(records),
    })
    print(f"predictions -> {events_path}")
    return 0


def cmd_evaluate(args) -> int:
    run_dir = _prepare_run_dir(args.out, args.force)
    if run_dir is None:
        return 0
    hyp_records, _ = load_manifest(args.hyp)
    ref_records, _ = load_manifest(args.ref)
    classes = tuple(args.classes.split(",")) if args.classes else None
    if classes is None:
        names = set()
        for rec in ref_records:
            if rec.events:
                names.update(e.label for e in rec.events)
            if rec.tags:
                names.update(rec.tags)
        classes = tuple(sorted(names))
    hyp_by_id = {r.clip_id: r for r in hyp_records}
    ref_by_id = {r.clip_id: r for r in ref_records}
    if args.metric == "event":
        hyp_events = {cid: list(r.events or ()) for cid, r in hyp_by_id.items()}
        ref_events = {cid: list(r.events or ()) for cid, r in ref_by_id.items()}
        report = event_f1(hyp_events, ref_events, classes)
    elif args.metric == "frame":
        pred_masks, ref_masks = [], []
        for cid, ref in ref_by_id.items():
            n = dsp.num_frames(int(round(ref.duration_s * dsp.SAMPLE_RATE)))
            hyp = hyp_by_id.get(cid)
            pred_masks.append(rasterize_events_fast(
                list(hyp.events or ()) if hyp else [], n, classes))
            ref_masks.append(rasterize_events_fast(list(ref.events or ()), n, classes))
        report = frame_f1(pred_masks, ref_masks, classes)
    elif args.metric == "tagging":
        pred, ref = [], []
        for cid, ref_rec in ref_by_id.items():
            hyp = hyp_by_id.get(cid)
            pred.append(hyp.tag_vector(classes) if hyp is not None
                        else np.zeros(len(classes), dtype=np.int64))
            ref.append(ref_rec.tag_vector(classes))
        report = tagging_f1(np.stack(pred), np.stack(ref), classes)
    else:
        raise UsageError(f"unknown metric {args.metric!r}")
    report.save(run_dir / "report.txt", run_dir / "report.json")
    _write_summary(run_dir, {
        "command": "evaluate",
        "metric": args.metric,
        "label": args.label,
        "seed": args.seed,
        "report": report.to_dict(),
    })
    print(report.format_table())
    return 0


def cmd_ensemble(args) -> int:
    run_dir = _prepare_run_dir(args.out, args.force)
    if run_dir is None:
        return 0
    member_dirs = [Path(p.strip()) for p in args.members.split(",")]
    score_dirs = [d / "scores" for d in member_dirs]
    for d in score_dirs:
        if not d.is_dir():
            raise UsageError(f"no scores directory in member run {d.parent}")
    names = sorted({p.name for p in score_dirs[0].iterdir()})
    out_scores = run_dir / "scores"
    for name in names:
        mats = [storage.load_matrix(d / name) for d in score_dirs]
        storage.save_matrix(out_scores / name, ensemble_average(mats))
    summary = {
        "command": "ensemble",
        "members": [str(d) for d in member_dirs],
        "scores_dir": str(out_scores),
        "n_score_files": len(names),
    }
    if args.params and args.ref:
        params = DecodeParams.load(args.params)
        ref_records, _ = load_manifest(args.ref)
        classes = tuple(sorted(params.per_class))
        hyp_records = []
        for rec in ref_records:
            sed = storage.load_matrix(out_scores / f"{rec.clip_id}.sed.fbm")
            events = decode_sed(sed, classes, params)
            tags = storage.load_matrix(out_scores / f"{rec.clip_id}.tag.fbm")
            mask = binarize_tags(tags, params.alphas(classes))
            hyp_records.append(ClipRecord(
                clip_id=rec.clip_id, audio_path=rec.audio_path,
                duration_s=rec.duration_s, subset="eval",
                tags=tuple(c for c, t in zip(classes, mask) if t),
                events=tuple(events)))
        events_path = run_dir / "events.jsonl"
        write_manifest(events_path, hyp_records, meta={"kind": "ensemble_predictions"})
        summary["events"] = str(events_path)
    _write_summary(run_dir, summary)
    print(f"ensembled {len(names)} score files from {len(member_dirs)} members")
    return 0


def cmd_report(args) -> int:
    run_dir = _prepare_run_dir(args.out, args.force)
    if run_dir is None:
        return 0
    from .report import write_report

    runs = [p.strip() for p in args.runs.split(",") if p.strip()]
    if not runs:
        raise UsageError("--runs must list at least one run directory")
    result = write_report(runs, run_dir)
    _write_summary(run_dir, {"command": "report", **result})
    print(Path(result["table_txt"]).read_text())
    if result["missing"]:
        print("missing runs:", ", ".join(result["missing"]), file=sys.stderr)
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbsed",
        description="Weakly-labeled sound event detection pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        if config:
            p.add_argument("--config", default="", help="experiment config JSON")
        p.add_argument("--out", required=True, help="run directory")
        p.add_argument("--force", action="store_true",
                       help="redo even if outputs exist")

    p = sub.add_parser("gen-toy", help="generate the synthetic toy dataset")
    add_common(p, config=False)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_toy)

    p = sub.add_parser("extract-stats", help="compute global feature statistics")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_extract_stats)

    p = sub.add_parser("train-fbcrnn", help="train the forward-backward tagger")
    add_common(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mode", choices=["fbcrnn", "fwd-frame", "fwd-last"], default="")
    p.add_argument("--set-manifest", action="append", metavar="SUBSET=PATH")
    p.set_defaults(func=lambda a: _cmd_train(a, "fbcrnn"))

    p = sub.add_parser("train-cnn", help="train the tag-conditioned detector")
    add_common(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-condition", action="store_true")
    p.add_argument("--set-manifest", action="append", metavar="SUBSET=PATH")
    p.set_defaults(func=lambda a: _cmd_train(a, "tagcnn"))

    p = sub.add_parser("tune", help="tune decoding hyper-parameters on validation")
    add_common(p)
    p.add_argument("--members", required=True, help="comma-separated checkpoints")
    p.add_argument("--taggers", default="", help="tagger checkpoints for CNN masks")
    p.add_argument("--objective", default="event-f1",
                   choices=["tagging-f1", "frame-f1", "event-f1"])
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("pseudo-label-weak", help="tag unlabeled clips with an ensemble")
    add_common(p)
    p.add_argument("--members", required=True)
    p.add_argument("--params", required=True, help="tuned decode parameters")
    p.add_argument("--subset", default="unlabeled")
    p.set_defaults(func=cmd_pseudo_label_weak)

    p = sub.add_parser("pseudo-label-strong", help="decode pseudo strong labels")
    add_common(p)
    p.add_argument("--members", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--subsets", default="weak,unlabeled")
    p.set_defaults(func=cmd_pseudo_label_strong)

    p = sub.add_parser("predict", help="score and decode a manifest")
    add_common(p)
    p.add_argument("--members", required=True)
    p.add_argument("--taggers", default="")
    p.add_argument("--params", required=True)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score hypothesis events against references")
    add_common(p, config=False)
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--metric", default="event", choices=["event", "frame", "tagging"])
    p.add_argument("--label", default="")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", default="", help="comma-separated class list")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ensemble", help="average exported score matrices")
    add_common(p, config=False)
    p.add_argument("--members", required=True, help="comma-separated predict run dirs")
    p.add_argument("--params", default="")
    p.add_argument("--ref", default="")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("report", help="comparison table and figures across runs")
    add_common(p, config=False)
    p.add_argument("--runs", required=True, help="comma-separated run directories")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, ManifestError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
