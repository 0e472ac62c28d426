"""Training loop: scheduled epochs, constrained batches, waveform mixup,
feature augmentation, Adam steps, periodic validation and checkpointing.

Checkpoints are written every checkpoint_every steps; the returned model
is the checkpoint with the best validation objective (tagging F1 at fixed
0.5 thresholds for the recurrent tagger, frame F1 at 0.5 for the
tag-conditioned CNN — threshold tuning only happens for final models).
Training logs are append-only JSON lines carrying step, mean loss,
learning rate and the validation objective; two runs with the same seed
produce bit-identical checkpoints and logs.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsp
from .augment import AugmentConfig, augment_features, sample_mixture_plan, superpose
from .data import (
    BatchItem,
    ClipRecord,
    EpochSchedule,
    build_epoch,
    clip_waveform,
    normalized_features,
    sample_minibatches,
)
from .events import rasterize_events_fast
from .metrics import frame_f1, tagging_f1
from .models import (
    DIM_PRESETS,
    Fbcrnn,
    MODE_FBCRNN,
    FBCRNN_MODES,
    TagCnn,
    config_hash_of,
    fbcrnn_training_loss,
    save_checkpoint,
    tagcnn_frame_loss,
)
from .nn.optim import Adam, NonFiniteGradientError, learning_rate

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    pass


@dataclass
class TrainRun:
    classes: tuple[str, ...]
    model_kind: str = "fbcrnn"            # fbcrnn | tagcnn
    mode: str = MODE_FBCRNN               # fbcrnn ablation modes
    conditioned: bool = True              # tagcnn conditioning
    dims_preset: str = "full"
    total_steps: int = 40000
    checkpoint_every: int = 1000
    batch_size: int = 16
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    selection_objective: str = ""         # defaults per model kind
    seed: int = 0

    def __post_init__(self):
        if self.model_kind not in ("fbcrnn", "tagcnn"):
            raise ValueError(f"unknown model kind {self.model_kind!r}")
        if self.mode not in FBCRNN_MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.total_steps % self.checkpoint_every != 0:
            raise ValueError("checkpoint_every must divide total_steps")
        if self.dims_preset not in DIM_PRESETS:
            raise ValueError(f"unknown dims preset {self.dims_preset!r}")
        if not self.selection_objective:
            self.selection_objective = (
                "tagging_f1" if self.model_kind == "fbcrnn" else "frame_f1")

    @property
    def p_mix(self) -> float:
        return self.augment.p_mix

    @property
    def t_max_s(self) -> float:
        return self.augment.t_max_s

    def to_dict(self) -> dict:
        d = {
            "classes": list(self.classes),
            "model_kind": self.model_kind,
            "mode": self.mode,
            "conditioned": self.conditioned,
            "dims_preset": self.dims_preset,
            "total_steps": self.total_steps,
            "checkpoint_every": self.checkpoint_every,
            "batch_size": self.batch_size,
            "selection_objective": self.selection_objective,
            "seed": self.seed,
            "augment": {k: (list(v) if isinstance(v, tuple) else v)
                        for k, v in vars(self.augment).items()},
        }
        return d

    def config_hash(self) -> str:
        return config_hash_of(self.to_dict())


def toy_train_run(classes, model_kind="fbcrnn", mode=MODE_FBCRNN,
                  conditioned=True, seed=0, p_mix=2.0 / 3.0,
                  t_max_s=2.6, batch_size=8, total_steps=2000) -> TrainRun:
    """Desk-scale preset: reduced widths, 2000 steps, checkpoints every 100."""
    return TrainRun(
        classes=tuple(classes), model_kind=model_kind, mode=mode,
        conditioned=conditioned, dims_preset="toy", total_steps=total_steps,
        checkpoint_every=100, batch_size=batch_size,
        augment=AugmentConfig(p_mix=p_mix, t_max_s=t_max_s), seed=seed)


@dataclass
class TrainResult:
    best_path: Path
    last_path: Path
    log_path: Path
    history: list
    best_step: int
    best_objective: float


class _WaveCache:
    def __init__(self, root=None):
        self.root = root
        self._cache: dict[str, np.ndarray] = {}

    def get(self, rec: ClipRecord) -> np.ndarray:
        if rec.clip_id not in self._cache:
            self._cache[rec.clip_id] = clip_waveform(rec, self.root)
        return self._cache[rec.clip_id]


@dataclass
class _MixtureItem:
    records: list
    plan: object

    def merged_events(self):
        events = []
        for rec, tau in zip(self.records, self.plan.taus):
            if rec.events is None:
                continue
            dt = tau / dsp.SAMPLE_RATE
            events.extend(e.shifted(dt) for e in rec.events)
        return events


def _plan_items(records, run: TrainRun, pool_records, rng) -> list[BatchItem]:
    pool = [(i, int(round(r.duration_s * dsp.SAMPLE_RATE)))
            for i, r in enumerate(pool_records)]
    items = []
    for rec in records:
        primary = (None, int(round(rec.duration_s * dsp.SAMPLE_RATE)))
        plan = sample_mixture_plan(run.augment, pool, rng, primary=primary)
        recs = [rec]
        for comp_id in plan.component_ids[1:]:
            recs.append(pool_records[comp_id])
        length = max(tau + n for tau, (_, n) in zip(
            plan.taus, [primary] + [pool[c] for c in plan.component_ids[1:]]))
        items.append(BatchItem(
            duration_s=length / dsp.SAMPLE_RATE,
            is_weak=rec.subset == "weak",
            payload=_MixtureItem(records=recs, plan=plan)))
    return items


def _assemble_batch(batch, run: TrainRun, stats, waves: _WaveCache,
                    aug_rng, classes, training=True):
    """Mixed, padded, augmented features plus targets for one mini-batch."""
    mixtures = []
    for item in batch:
        mix_item = item.payload
        comps = [waves.get(r) for r in mix_item.records]
        tags = [r.tag_vector(classes) for r in mix_item.records]
        mixed, merged = superpose(mix_item.plan, comps, tags)
        mixtures.append((mixed, merged, mix_item))
    max_len = max(len(m) for m, _, _ in mixtures)
    padded = np.zeros((len(mixtures), max_len))
    for i, (m, _, _) in enumerate(mixtures):
        padded[i, :len(m)] = m
    feats = dsp.logmel(dsp.stft(padded))
    feats = dsp.apply_global_norm(feats, stats)
    n_frames = feats.shape[-1]
    out = np.empty(feats.shape, dtype=np.float32)
    for i in range(len(mixtures)):
        x = feats[i]
        if training:
            x = augment_features(x, run.augment, aug_rng)
        out[i] = x.astype(np.float32)
    tag_targets = np.stack([t for _, t, _ in mixtures]).astype(np.float32)
    frame_targets = None
    if run.model_kind == "tagcnn":
        frame_targets = np.stack([
            rasterize_events_fast(mi.merged_events(), n_frames, classes)
            for _, _, mi in mixtures
        ]).astype(np.float32)
    return out, tag_targets, frame_targets


def _validate(model, val_records, stats, classes, root=None) -> float:
    """Fixed-threshold validation objective for checkpoint selection."""
    if isinstance(model, Fbcrnn):
        preds, refs = [], []
        for rec in val_records:
            feats = normalized_features(rec, stats, root)
            preds.append(model.tag(feats) > 0.5)
            refs.append(rec.tag_vector(classes))
        return tagging_f1(np.stack(preds), np.stack(refs), classes).macro_f1
    pred_masks, ref_masks = [], []
    for rec in val_records:
        feats = normalized_features(rec, stats, root)
        z = rec.tag_vector(classes)
        scores = model.forward(feats[None], z[None], training=False)[0]
        pred_masks.append(scores > 0.5)
        ref_masks.append(rasterize_events_fast(rec.events, feats.shape[1], classes))
    return frame_f1(pred_masks, ref_masks, classes).macro_f1


def train(run: TrainRun, train_records, val_records, stats, out_dir,
          root=None) -> TrainResult:
    """Run the full loop; returns paths to the best/last checkpoints and
    the checkpoint history. Aborts with DivergenceError after two
    consecutive non-finite losses."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    classes = tuple(run.classes)
    seeds = np.random.SeedSequence(run.seed).spawn(3)
    init_rng = np.random.default_rng(seeds[0])
    epoch_rng = np.random.default_rng(seeds[1])
    aug_rng = np.random.default_rng(seeds[2])

    dims = DIM_PRESETS[run.dims_preset]()
    if run.model_kind == "fbcrnn":
        model = Fbcrnn(classes, dims, init_rng, mode=run.mode)
    else:
        model = TagCnn(classes, dims, init_rng, conditioned=run.conditioned)

    # Schedulable records: these also serve as the mixup partner pool, so
    # every entry must carry usable targets.
    usable = [r for r in train_records
              if r.subset in ("weak", "synthetic")
              or (r.subset == "unlabeled" and (r.weak_pseudo or r.strong_pseudo))]
    if run.model_kind == "tagcnn":
        missing = [r.clip_id for r in usable if r.events is None]
        if missing:
            log.warning("skipping %d clips without strong targets: %s",
                        len(missing), ", ".join(missing[:5]))
        usable = [r for r in usable if r.events is not None]

    optimizer = Adam(model.params())
    waves = _WaveCache(root)
    schedule = EpochSchedule()
    cfg_hash = run.config_hash()
    log_path = out_dir / "train_log.jsonl"
    history = []
    best_objective = -1.0
    best_step = -1
    best_path = out_dir / "best.ckpt"
    last_path = out_dir / "last.ckpt"

    with open(log_path, "w") as log_fh:
        obj0 = _validate(model, val_records, stats, classes, root)
        entry = {"step": 0, "loss": None, "lr": 0.0, "objective": obj0}
        log_fh.write(json.dumps(entry, sort_keys=True) + "\n")
        history.append(entry)

        step = 0
        nan_streak = 0
        loss_accum = 0.0
        loss_count = 0
        while step < run.total_steps:
            epoch = build_epoch(usable, schedule, epoch_rng)
            items = _plan_items(epoch, run, usable, epoch_rng)
            for batch in sample_minibatches(items, run.batch_size, epoch_rng):
                if step >= run.total_steps:
                    break
                feats, tag_t, frame_t = _assemble_batch(
                    batch, run, stats, waves, aug_rng, classes)
                optimizer.zero_grad()
                if run.model_kind == "fbcrnn":
                    with_bwd = run.mode == MODE_FBCRNN
                    y_fwd, y_bwd = model.forward(feats, training=True,
                                                 with_backward=with_bwd)
                    loss, dy_fwd, dy_bwd = fbcrnn_training_loss(
                        y_fwd, y_bwd, tag_t, run.mode)
                else:
                    y = model.forward(feats, tag_t, training=True)
                    loss, dy = tagcnn_frame_loss(y, frame_t)
                if not np.isfinite(loss):
                    nan_streak += 1
                    log.warning("non-finite loss at step %d", step + 1)
                    if nan_streak >= 2:
                        raise DivergenceError(
                            f"loss non-finite twice in a row at step {step + 1} "
                            f"(last objective {history[-1]['objective']:.4f})")
                    step += 1
                    continue
                nan_streak = 0
                if run.model_kind == "fbcrnn":
                    model.backward(dy_fwd, dy_bwd)
                else:
                    model.backward(dy)
                try:
                    optimizer.step()
                except NonFiniteGradientError as exc:
                    log.warning("%s", exc)
                step = optimizer.step_count
                loss_accum += loss
                loss_count += 1
                if step % run.checkpoint_every == 0:
                    objective = _validate(model, val_records, stats, classes, root)
                    entry = {
                        "step": step,
                        "loss": loss_accum / max(loss_count, 1),
                        "lr": learning_rate(step),
                        "objective": objective,
                    }
                    log_fh.write(json.dumps(entry, sort_keys=True) + "\n")
                    log_fh.flush()
                    history.append(entry)
                    loss_accum = 0.0
                    loss_count = 0
                    rng_state = {
                        "epoch": epoch_rng.bit_generator.state,
                        "augment": aug_rng.bit_generator.state,
                    }
                    save_checkpoint(last_path, model, optimizer, step=step,
                                    rng_state=rng_state, config_hash=cfg_hash,
                                    extra_meta={"run": run.to_dict()})
                    if objective > best_objective:
                        best_objective = objective
                        best_step = step
                        save_checkpoint(best_path, model, optimizer, step=step,
                                        rng_state=rng_state, config_hash=cfg_hash,
                                        extra_meta={"run": run.to_dict()})
    return TrainResult(best_path=best_path, last_path=last_path,
                       log_path=log_path, history=history,
                       best_step=best_step, best_objective=best_objective)


def stats_from_records(records, root=None) -> dsp.GlobalStats:
    """Global normalization statistics over training clips (validation and
    eval subsets are excluded by the callers)."""
    def features():
        for rec in records:
            yield dsp.logmel_from_waveform(clip_waveform(rec, root))
    return dsp.compute_global_stats(features())
