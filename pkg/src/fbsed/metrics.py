"""Macro-averaged tagging, frame-based and collar-based event F1 scores.

Event matching: a hypothesis matches a reference of the same class when
the onset error is at most 200 ms and the offset error is at most
max(200 ms, 20% of the reference duration). Matching is one-to-one and
greedy: references in onset order each take the earliest-onset feasible
unmatched hypothesis. Counts are pooled per class across clips and the
macro score is the unweighted mean over the fixed class list; a class
without any reference or hypothesis contributes F1 = 0 (0/0 -> 0).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .events import Event

ONSET_COLLAR = 0.2
OFFSET_COLLAR = 0.2
OFFSET_DURATION_FRAC = 0.2


@dataclass
class ClassScore:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp > 0 else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn > 0 else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass
class F1Report:
    per_class: dict[str, ClassScore]

    @property
    def macro_f1(self) -> float:
        scores = [s.f1 for s in self.per_class.values()]
        return float(np.mean(scores)) if scores else 0.0

    def to_dict(self) -> dict:
        return {
            "macro_f1": self.macro_f1,
            "classes": {
                name: {"tp": s.tp, "fp": s.fp, "fn": s.fn,
                       "precision": s.precision, "recall": s.recall, "f1": s.f1}
                for name, s in self.per_class.items()
            },
        }

    def format_table(self) -> str:
        width = max([len(n) for n in self.per_class] + [5])
        lines = [f"{'class':<{width}}  {'tp':>5} {'fp':>5} {'fn':>5} "
                 f"{'prec':>6} {'rec':>6} {'f1':>6}"]
        for name in sorted(self.per_class):
            s = self.per_class[name]
            lines.append(f"{name:<{width}}  {s.tp:>5} {s.fp:>5} {s.fn:>5} "
                         f"{s.precision:>6.3f} {s.recall:>6.3f} {s.f1:>6.3f}")
        lines.append(f"{'macro F1':<{width}}  {self.macro_f1 * 100:.1f}%")
        return "\n".join(lines)

    def save(self, txt_path=None, json_path=None):
        if txt_path is not None:
            Path(txt_path).parent.mkdir(parents=True, exist_ok=True)
            Path(txt_path).write_text(self.format_table() + "\n")
        if json_path is not None:
            Path(json_path).parent.mkdir(parents=True, exist_ok=True)
            Path(json_path).write_text(
                json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def tagging_f1(pred_tags: np.ndarray, ref_tags: np.ndarray, classes) -> F1Report:
    """Clip-level multi-hot decisions (clips x K) scored per class."""
    pred = np.asarray(pred_tags) > 0
    ref = np.asarray(ref_tags) > 0
    if pred.shape != ref.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {ref.shape}")
    if pred.shape[1] != len(classes):
        raise ValueError("one column per class required")
    per_class = {}
    for k, name in enumerate(classes):
        tp = int(np.sum(pred[:, k] & ref[:, k]))
        fp = int(np.sum(pred[:, k] & ~ref[:, k]))
        fn = int(np.sum(~pred[:, k] & ref[:, k]))
        per_class[name] = ClassScore(tp, fp, fn)
    return F1Report(per_class=per_class)


def frame_f1(pred_masks, ref_masks, classes) -> F1Report:
    """Frame-wise counts pooled over clips; masks are per-clip (K, N)."""
    if len(pred_masks) != len(ref_masks):
        raise ValueError("clip sets must align")
    counts = {name: ClassScore(0, 0, 0) for name in classes}
    for pred, ref in zip(pred_masks, ref_masks):
        pred = np.asarray(pred) > 0
        ref = np.asarray(ref) > 0
        if pred.shape != ref.shape:
            raise ValueError(f"frame grid mismatch: {pred.shape} vs {ref.shape}")
        for k, name in enumerate(classes):
            counts[name].tp += int(np.sum(pred[k] & ref[k]))
            counts[name].fp += int(np.sum(pred[k] & ~ref[k]))
            counts[name].fn += int(np.sum(~pred[k] & ref[k]))
    return F1Report(per_class=counts)


def offset_tolerance(ref: Event) -> float:
    return max(OFFSET_COLLAR, OFFSET_DURATION_FRAC * ref.duration)


def event_feasible(ref: Event, hyp: Event) -> bool:
    return (abs(hyp.onset - ref.onset) <= ONSET_COLLAR
            and abs(hyp.offset - ref.offset) <= offset_tolerance(ref))


def match_events(refs: list[Event], hyps: list[Event]) -> int:
    """Greedy one-to-one matching: references in onset order take the
    earliest-onset feasible unmatched hypothesis. Returns the match count."""
    refs = sorted(refs, key=lambda e: (e.onset, e.offset))
    hyps = sorted(hyps, key=lambda e: (e.onset, e.offset))
    used = [False] * len(hyps)
    tp = 0
    for r in refs:
        for j, h in enumerate(hyps):
            if not used[j] and event_feasible(r, h):
                used[j] = True
                tp += 1
                break
    return tp


def event_f1(hyp_events: dict, ref_events: dict, classes) -> F1Report:
    """Collar-based event F1 from per-clip event lists keyed by clip id."""
    counts = {name: ClassScore(0, 0, 0) for name in classes}
    class_set = set(classes)
    clip_ids = set(hyp_events) | set(ref_events)
    for clip_id in clip_ids:
        hyps = hyp_events.get(clip_id, [])
        refs = ref_events.get(clip_id, [])
        for e in list(hyps) + list(refs):
            if e.label not in class_set:
                raise ValueError(f"unknown event class {e.label!r}")
        for name in classes:
            h = [e for e in hyps if e.label == name]
            r = [e for e in refs if e.label == name]
            if not h and not r:
                continue
            tp = match_events(r, h)
            counts[name].tp += tp
            counts[name].fp += len(h) - tp
            counts[name].fn += len(r) - tp
    return F1Report(per_class=counts)
