"""Dataset manifests, epoch scheduling, constrained mini-batch sampling,
feature access and pseudo-label production.

Manifests are JSON-lines files, one clip record per line; an optional
first line of the form {"meta": {...}} carries provenance (e.g. the
checkpoint hashes a pseudo-label manifest was produced with). Record
fields: id, audio, duration_s, subset, tags (list of class names or
null), events (list of [class, onset_s, offset_s] or null), weak_pseudo,
strong_pseudo. Audio lives next to the manifest as 16 kHz mono 16-bit
WAV files.
"""

from __future__ import annotations

import json
import logging
import wave
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import dsp, storage
from .decode import DecodeParams, binarize_tags, decode_sed, ensemble_sed_scores
from .events import Event, sort_events
from .models import ensemble_average

log = logging.getLogger(__name__)

SUBSETS = ("weak", "synthetic", "unlabeled", "validation", "eval")


class ManifestError(ValueError):
    pass


@dataclass
class ClipRecord:
    clip_id: str
    audio_path: str
    duration_s: float
    subset: str
    tags: tuple[str, ...] | None = None
    events: tuple[Event, ...] | None = None
    weak_pseudo: bool = False
    strong_pseudo: bool = False

    def validate(self):
        problems = []
        if self.subset not in SUBSETS:
            problems.append(f"unknown subset {self.subset!r}")
        if self.duration_s <= 0:
            problems.append("duration must be positive")
        if self.subset == "weak" and self.tags is None:
            problems.append("weak clips need tags")
        if self.subset in ("synthetic", "validation") and self.events is None:
            problems.append(f"{self.subset} clips need strong events")
        if self.subset == "unlabeled":
            if self.tags is not None and not self.weak_pseudo:
                problems.append("unlabeled clips carry no tags unless weak_pseudo")
            if self.events is not None and not self.strong_pseudo:
                problems.append("unlabeled clips carry no events unless strong_pseudo")
        return problems

    def tag_vector(self, classes) -> np.ndarray:
        """Multi-hot tags; derived from events when only events are known."""
        vec = np.zeros(len(classes), dtype=np.int64)
        labels = self.tags
        if labels is None and self.events is not None:
            labels = tuple({e.label for e in self.events})
        if labels is None:
            raise ValueError(f"clip {self.clip_id} has no tag information")
        index = {c: i for i, c in enumerate(classes)}
        for name in labels:
            vec[index[name]] = 1
        return vec

    def to_json(self) -> dict:
        return {
            "id": self.clip_id,
            "audio": self.audio_path,
            "duration_s": self.duration_s,
            "subset": self.subset,
            "tags": list(self.tags) if self.tags is not None else None,
            "events": [e.to_list() for e in self.events] if self.events is not None else None,
            "weak_pseudo": self.weak_pseudo,
            "strong_pseudo": self.strong_pseudo,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ClipRecord":
        known = {"id", "audio", "duration_s", "subset", "tags", "events",
                 "weak_pseudo", "strong_pseudo"}
        unknown = set(d) - known
        if unknown:
            raise ManifestError(f"unknown record fields: {sorted(unknown)}")
        events = d.get("events")
        return cls(
            clip_id=str(d["id"]),
            audio_path=str(d["audio"]),
            duration_s=float(d["duration_s"]),
            subset=str(d["subset"]),
            tags=tuple(d["tags"]) if d.get("tags") is not None else None,
            events=tuple(sort_events(Event(str(c), float(a), float(b))
                                     for c, a, b in events)) if events is not None else None,
            weak_pseudo=bool(d.get("weak_pseudo", False)),
            strong_pseudo=bool(d.get("strong_pseudo", False)),
        )


def load_manifest(path) -> tuple[list[ClipRecord], dict]:
    """Parse and validate a manifest; returns (records, meta)."""
    path = Path(path)
    records = []
    meta = {}
    seen = {}
    problems = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            if lineno == 1 and set(payload) == {"meta"}:
                meta = payload["meta"]
                continue
            try:
                rec = ClipRecord.from_json(payload)
            except (KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"{path}:{lineno}: bad record ({exc})") from exc
            if rec.clip_id in seen:
                problems.append(f"line {lineno}: duplicate id {rec.clip_id!r} "
                                f"(first seen line {seen[rec.clip_id]})")
            seen[rec.clip_id] = lineno
            for problem in rec.validate():
                problems.append(f"line {lineno}: {rec.clip_id}: {problem}")
            records.append(rec)
    if problems:
        raise ManifestError(f"{path}: " + "; ".join(problems))
    return records, meta


def write_manifest(path, records, meta: dict | None = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        if meta:
            fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")


def write_wav(path, samples: np.ndarray, sample_rate: int = dsp.SAMPLE_RATE):
    """16-bit PCM mono WAV (symmetric 32767 scaling both ways)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    x = np.asarray(samples, dtype=np.float64)
    peak = np.max(np.abs(x)) if x.size else 0.0
    if peak > 1.0:
        x = x / peak
    pcm = np.clip(np.round(x * 32767.0), -32767, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(sample_rate)
        fh.writeframes(pcm.tobytes())


def read_wav(path) -> np.ndarray:
    with wave.open(str(path), "rb") as fh:
        if fh.getnchannels() != 1 or fh.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit mono WAV")
        if fh.getframerate() != dsp.SAMPLE_RATE:
            raise ValueError(f"{path}: expected {dsp.SAMPLE_RATE} Hz")
        raw = fh.readframes(fh.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0


def clip_waveform(record: ClipRecord, root: Path | None = None) -> np.ndarray:
    path = Path(record.audio_path)
    if root is not None and not path.is_absolute():
        path = Path(root) / path
    return dsp.normalize_waveform(read_wav(path))


def clip_features(record: ClipRecord, root: Path | None = None,
                  cache_dir=None) -> np.ndarray:
    """Un-normalized log-mel features, optionally cached per clip."""
    if cache_dir is not None:
        cache_path = Path(cache_dir) / f"{record.clip_id}.fbm"
        if cache_path.exists():
            return storage.load_matrix(cache_path)
    feats = dsp.logmel_from_waveform(clip_waveform(record, root))
    if cache_dir is not None:
        storage.save_matrix(cache_path, feats)
    return feats


@dataclass
class EpochSchedule:
    """How often each training subset is presented per epoch."""

    weak: int = 10
    synthetic: int = 2
    unlabeled: int = 1

    def __post_init__(self):
        if min(self.weak, self.synthetic, self.unlabeled) < 0:
            raise ValueError("repetition counts must be >= 0")


def build_epoch(records, schedule: EpochSchedule,
                rng: np.random.Generator) -> list[ClipRecord]:
    """Repeat weak/synthetic/pseudo-labeled-unlabeled clips per the
    schedule and shuffle. Unlabeled clips without pseudo labels and
    validation/eval clips are never scheduled."""
    instances = []
    for rec in records:
        if rec.subset == "weak":
            reps = schedule.weak
        elif rec.subset == "synthetic":
            reps = schedule.synthetic
        elif rec.subset == "unlabeled" and (rec.weak_pseudo or rec.strong_pseudo):
            reps = schedule.unlabeled
        else:
            continue
        instances.extend([rec] * reps)
    order = rng.permutation(len(instances))
    return [instances[i] for i in order]


@dataclass
class BatchItem:
    """One schedulable training signal: a clip or a planned mixture."""

    duration_s: float
    is_weak: bool
    payload: object = None


MAX_PAD_FRAC = 0.05


def sample_minibatches(items: list[BatchItem], batch_size: int,
                       rng: np.random.Generator,
                       max_pad_frac: float = MAX_PAD_FRAC):
    """Yield batches satisfying the padding and weak-count constraints.

    Every item in a batch must be padded to the batch maximum by at most
    max_pad_frac of the padded length, and each batch needs at least
    floor(B/3) weak items. Items are bucketed by duration (bucket
    boundaries jittered via random bucket capacities); inside a bucket
    each batch reserves its weak quota first and is filled from the rest,
    so the weak constraint holds whenever the bucket composition allows.
    When a bucket runs short of weak items the batch is completed with
    weak items resampled from the full pool (duration permitting); that
    fallback is logged. Bucket tails shorter than one batch are dropped.
    """
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    min_weak = batch_size // 3
    order = sorted(range(len(items)), key=lambda i: -items[i].duration_s)
    buckets = []
    current = []
    cap = int(rng.integers(2 * batch_size, 4 * batch_size + 1))
    for idx in order:
        if current:
            longest = items[current[0]].duration_s
            if items[idx].duration_s < (1.0 - max_pad_frac) * longest or len(current) >= cap:
                buckets.append(current)
                current = []
                cap = int(rng.integers(2 * batch_size, 4 * batch_size + 1))
        current.append(idx)
    if current:
        buckets.append(current)

    all_weak = [i for i, it in enumerate(items) if it.is_weak]
    for bucket in buckets:
        bucket = [bucket[i] for i in rng.permutation(len(bucket))]
        n_batches = len(bucket) // batch_size
        if n_batches == 0:
            continue
        weak_stack = [i for i in bucket if items[i].is_weak]
        reserved = min(len(weak_stack), min_weak * n_batches)
        fill = [i for i in bucket if not items[i].is_weak] + weak_stack[reserved:]
        fill = [fill[i] for i in rng.permutation(len(fill))]
        weak_stack = weak_stack[:reserved]
        for _ in range(n_batches):
            batch = [weak_stack.pop() for _ in range(min(min_weak, len(weak_stack)))]
            while len(batch) < batch_size and fill:
                batch.append(fill.pop())
            if len(batch) < batch_size:
                break
            n_weak = sum(items[i].is_weak for i in batch)
            if n_weak < min_weak:
                longest = max(items[i].duration_s for i in batch)
                fits = [i for i in all_weak
                        if i not in batch
                        and (1.0 - max_pad_frac) * longest <= items[i].duration_s <= longest]
                fits = [fits[i] for i in rng.permutation(len(fits))]
                non_weak = [i for i in batch if not items[i].is_weak]
                while n_weak < min_weak and fits and non_weak:
                    batch[batch.index(non_weak.pop())] = fits.pop()
                    n_weak += 1
                log.warning("mini-batch weak-count fallback: resampled from the "
                            "full pool (%d weak of %d required)", n_weak, min_weak)
            batch = [batch[i] for i in rng.permutation(len(batch))]
            yield [items[i] for i in batch]


def pseudo_label_weak(members, records, alphas, classes,
                      stats: dsp.GlobalStats, root: Path | None = None) -> list[ClipRecord]:
    """Tag unlabeled clips with an ensemble and the tuned alpha thresholds.

    Returns new records (tags set, weak_pseudo flagged); the inputs are
    not mutated and already-labeled subsets pass through unchanged. Clips
    whose pseudo tag vector comes out empty are retained.
    """
    alphas = np.asarray(alphas)
    out = []
    for rec in records:
        if rec.subset != "unlabeled":
            out.append(rec)
            continue
        feats = normalized_features(rec, stats, root)
        scores = ensemble_average([m.tag(feats) for m in members])
        tags = binarize_tags(scores, alphas)
        names = tuple(c for c, t in zip(classes, tags) if t)
        out.append(replace(rec, tags=names, weak_pseudo=True))
    return out


def pseudo_label_strong(members, records, params: DecodeParams, classes,
                        stats: dsp.GlobalStats, root: Path | None = None) -> list[ClipRecord]:
    """Decode ensemble detections into pseudo strong labels.

    Clips need (pseudo) tags, which both gate the detection scores and are
    stored for conditioning. Synthetic clips keep their true strong labels
    untouched.
    """
    contexts = params.contexts(classes)
    out = []
    for rec in records:
        if rec.subset == "synthetic" or rec.events is not None:
            out.append(rec)
            continue
        if rec.tags is None:
            raise ValueError(
                f"clip {rec.clip_id} has no (pseudo) tags for strong pseudo-labeling")
        feats = normalized_features(rec, stats, root)
        mask = rec.tag_vector(classes)
        scores = ensemble_sed_scores(members, feats, mask, contexts)
        events = decode_sed(scores, classes, params)
        out.append(replace(rec, events=tuple(events), strong_pseudo=True))
    return out


def normalized_features(rec: ClipRecord, stats: dsp.GlobalStats,
                        root: Path | None = None, cache_dir=None) -> np.ndarray:
    """Globally normalized log-mel features ready for a model."""
    feats = clip_features(rec, root, cache_dir)
    return dsp.apply_global_norm(feats, stats).astype(np.float32)
