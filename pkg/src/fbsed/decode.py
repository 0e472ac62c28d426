"""From model scores to tags and timed events.

Pipeline for the forward-backward model: binarize clip tags with
per-class thresholds alpha_k; score each frame by tagging a small context
window around it (one-sided length C_k) and masking inactive classes;
binarize with per-class detection thresholds beta_k; median-filter each
row with an odd per-class size M_k; turn the maximal runs of ones into
events on the 20 ms grid. The tag-conditioned CNN path skips the context
scoring (its scores are already per frame) and ignores C_k.

Hyper-parameters are tuned exhaustively per class on a validation set:
alpha against tagging F1 first, then (beta, C, M) against the requested
objective with the tag masks fixed. Ties break towards the lowest
threshold, then the smallest context, then the smallest filter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import FRAME_HOP_S
from .events import Event, rasterize_events_fast, sort_events
from .models import Fbcrnn, ensemble_average

CONTEXT_GRID = (5, 10, 15, 20)
MEDIAN_GRID = (11, 21, 31, 41, 51)
THRESHOLD_GRID = tuple(np.round(np.arange(1, 50) * 0.02, 2))


@dataclass
class ClassDecodeParams:
    alpha: float
    beta: float
    context: int | None   # one-sided frames; None for per-frame (CNN) scores
    median: int

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0 or not 0.0 < self.beta < 1.0:
            raise ValueError("thresholds must lie in (0, 1)")
        if self.median % 2 == 0:
            raise ValueError("median filter size must be odd")


@dataclass
class DecodeParams:
    per_class: dict[str, ClassDecodeParams]

    def alphas(self, classes) -> np.ndarray:
        return np.array([self.per_class[c].alpha for c in classes])

    def betas(self, classes) -> np.ndarray:
        return np.array([self.per_class[c].beta for c in classes])

    def contexts(self, classes) -> list:
        return [self.per_class[c].context for c in classes]

    def medians(self, classes) -> list[int]:
        return [self.per_class[c].median for c in classes]

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            name: {"alpha": p.alpha, "beta": p.beta,
                   "context": p.context, "median": p.median}
            for name, p in self.per_class.items()
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        payload = json.loads(Path(path).read_text())
        return cls(per_class={
            name: ClassDecodeParams(alpha=d["alpha"], beta=d["beta"],
                                    context=d["context"], median=d["median"])
            for name, d in payload.items()
        })


def binarize_tags(y_tag: np.ndarray, alpha) -> np.ndarray:
    """Multi-hot decisions [y_k > alpha_k] (strict); alpha scalar or per class."""
    y = np.asarray(y_tag)
    alpha = np.asarray(alpha)
    if alpha.ndim == 1 and alpha.shape[0] != y.shape[-1]:
        raise ValueError("per-class alpha must match the class count")
    return (y > alpha).astype(np.int64)


def sed_scores_for_context(model: Fbcrnn, x: np.ndarray, context: int) -> np.ndarray:
    """(K, N) tag scores of the context window around every frame.

    Frame n is scored by tagging the slice x[:, max(0, n-C):min(N, n+C+1)].
    Equal-length windows are batched through the model together.
    """
    x = np.asarray(x)
    n = x.shape[1]
    scores = np.empty((model.n_classes, n), dtype=np.float64)
    by_length: dict[int, list[tuple[int, int]]] = {}
    for i in range(n):
        lo = max(0, i - context)
        hi = min(n, i + context + 1)
        by_length.setdefault(hi - lo, []).append((i, lo))
    for length, items in by_length.items():
        batch = np.stack([x[:, lo:lo + length] for _, lo in items])
        tags = model.tag(batch)
        for row, (i, _) in enumerate(items):
            scores[:, i] = tags[row]
    return scores


def fbcrnn_sed_scores(model: Fbcrnn, x: np.ndarray, tags: np.ndarray,
                      contexts) -> np.ndarray:
    """Masked (K, N) detection scores: context tagging for active classes,
    zeros elsewhere. `contexts` is one one-sided length per class (classes
    sharing a length share the underlying score computation)."""
    x = np.asarray(x)
    tags = np.asarray(tags)
    if np.isscalar(contexts) or getattr(contexts, "ndim", None) == 0:
        contexts = [int(contexts)] * model.n_classes
    contexts = list(contexts)
    if len(contexts) != model.n_classes:
        raise ValueError("one context per class required")
    out = np.zeros((model.n_classes, x.shape[1]), dtype=np.float64)
    active = [k for k in range(model.n_classes) if tags[k]]
    cached: dict[int, np.ndarray] = {}
    for k in active:
        c = int(contexts[k])
        if c not in cached:
            cached[c] = sed_scores_for_context(model, x, c)
        out[k] = cached[c][k]
    return out


def median_filter(row: np.ndarray, size: int) -> np.ndarray:
    """Sliding median of a binary row with replicate edge padding."""
    if size % 2 == 0:
        raise ValueError(f"median filter size must be odd, got {size}")
    row = np.asarray(row).astype(np.int64)
    if size == 1:
        return row.copy()
    half = size // 2
    padded = np.concatenate([np.full(half, row[0]), row, np.full(half, row[-1])])
    windows = np.lib.stride_tricks.sliding_window_view(padded, size)
    return (windows.sum(axis=1) * 2 > size).astype(np.int64)


def frames_to_events(mask: np.ndarray, classes,
                     hop_s: float = FRAME_HOP_S) -> list[Event]:
    """Maximal runs of ones per class row -> events on the frame grid."""
    mask = np.asarray(mask)
    if mask.shape[0] != len(classes):
        raise ValueError("one mask row per class required")
    events = []
    for k, name in enumerate(classes):
        row = np.asarray(mask[k], dtype=np.int64)
        edges = np.diff(np.concatenate([[0], row, [0]]))
        starts = np.flatnonzero(edges == 1)
        ends = np.flatnonzero(edges == -1)
        for s, e in zip(starts, ends):
            events.append(Event(name, s * hop_s, e * hop_s))
    return sort_events(events)


def decode_sed(scores: np.ndarray, classes, params: DecodeParams) -> list[Event]:
    """Threshold + median filter a (K, N) score matrix and extract events."""
    betas = params.betas(classes)
    medians = params.medians(classes)
    mask = np.zeros_like(scores, dtype=np.int64)
    for k in range(len(classes)):
        row = (scores[k] > betas[k]).astype(np.int64)
        mask[k] = median_filter(row, medians[k])
    return frames_to_events(mask, classes)


def _f1_from_counts(tp, fp, fn) -> float:
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def tune_tag_thresholds(tag_scores: np.ndarray, ref_tags: np.ndarray,
                        grid=THRESHOLD_GRID) -> np.ndarray:
    """Per-class alpha maximizing clip-level tagging F1 (ties: lowest)."""
    scores = np.asarray(tag_scores)
    refs = np.asarray(ref_tags)
    if scores.shape != refs.shape:
        raise ValueError("scores/references must align")
    if scores.shape[0] == 0:
        raise ValueError("empty validation set")
    n_classes = scores.shape[1]
    alphas = np.empty(n_classes)
    for k in range(n_classes):
        best_f1, best_alpha = -1.0, None
        for alpha in grid:
            pred = scores[:, k] > alpha
            tp = int(np.sum(pred & (refs[:, k] > 0)))
            fp = int(np.sum(pred & (refs[:, k] == 0)))
            fn = int(np.sum(~pred & (refs[:, k] > 0)))
            f1 = _f1_from_counts(tp, fp, fn)
            if f1 > best_f1:
                best_f1, best_alpha = f1, alpha
        alphas[k] = best_alpha
    return alphas


def _greedy_match_count(refs, hyps, onset_collar=0.2, offset_collar=0.2,
                        offset_frac=0.2):
    # Local twin of metrics.match_events to avoid a circular import; the
    # metrics module owns the authoritative version and its tests.
    refs = sorted(refs, key=lambda e: (e.onset, e.offset))
    hyps = sorted(hyps, key=lambda e: (e.onset, e.offset))
    used = [False] * len(hyps)
    tp = 0
    for r in refs:
        tol_off = max(offset_collar, offset_frac * r.duration)
        for j, h in enumerate(hyps):
            if used[j]:
                continue
            if abs(h.onset - r.onset) <= onset_collar and abs(h.offset - r.offset) <= tol_off:
                used[j] = True
                tp += 1
                break
    return tp


def tune_sed_params(sed_scores_by_context: dict, clip_refs: list,
                    tag_masks: np.ndarray, classes, objective: str,
                    threshold_grid=THRESHOLD_GRID, median_grid=MEDIAN_GRID,
                    alphas=None) -> DecodeParams:
    """Exhaustive per-class search over beta x context x median.

    sed_scores_by_context: {context: [per-clip (K, N) score matrices]};
    use {None: [...]} for per-frame (CNN) scores. clip_refs holds each
    clip's reference events; tag_masks (clips x K) gates the scores the
    way inference will. objective is "event_f1" or "frame_f1".
    """
    if objective not in ("event_f1", "frame_f1"):
        raise ValueError(f"unknown objective {objective!r}")
    contexts = sorted(sed_scores_by_context, key=lambda c: (c is None, c))
    n_clips = len(clip_refs)
    if n_clips == 0:
        raise ValueError("empty validation set")
    masked = {
        c: [np.asarray(mats[i]) * tag_masks[i][:, None] for i in range(n_clips)]
        for c, mats in sed_scores_by_context.items()
    }
    ref_rasters = None
    if objective == "frame_f1":
        ref_rasters = [
            rasterize_events_fast(refs, masked[contexts[0]][i].shape[1], classes)
            for i, refs in enumerate(clip_refs)
        ]
    if alphas is None:
        alphas = np.full(len(classes), 0.5)
    per_class = {}
    for k, name in enumerate(classes):
        refs_k = [[e for e in refs if e.label == name] for refs in clip_refs]
        best = None
        best_f1 = -1.0
        for beta in threshold_grid:
            for c in contexts:
                rows = [(masked[c][i][k] > beta).astype(np.int64) for i in range(n_clips)]
                for m in median_grid:
                    tp = fp = fn = 0
                    for i in range(n_clips):
                        filtered = median_filter(rows[i], m)
                        if objective == "frame_f1":
                            ref_row = ref_rasters[i][k]
                            tp += int(np.sum((filtered == 1) & (ref_row == 1)))
                            fp += int(np.sum((filtered == 1) & (ref_row == 0)))
                            fn += int(np.sum((filtered == 0) & (ref_row == 1)))
                        else:
                            hyps = _binary_row_events(filtered, name)
                            matched = _greedy_match_count(refs_k[i], hyps)
                            tp += matched
                            fp += len(hyps) - matched
                            fn += len(refs_k[i]) - matched
                    f1 = _f1_from_counts(tp, fp, fn)
                    if f1 > best_f1:
                        best_f1 = f1
                        best = ClassDecodeParams(alpha=float(alphas[k]), beta=float(beta),
                                                 context=c, median=int(m))
        per_class[name] = best
    return DecodeParams(per_class=per_class)


def _binary_row_events(row: np.ndarray, label: str,
                       hop_s: float = FRAME_HOP_S) -> list[Event]:
    edges = np.diff(np.concatenate([[0], row, [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return [Event(label, s * hop_s, e * hop_s) for s, e in zip(starts, ends)]


def ensemble_sed_scores(members: list, x: np.ndarray, tags: np.ndarray,
                        contexts) -> np.ndarray:
    """Mean of the members' masked detection score matrices."""
    return ensemble_average([fbcrnn_sed_scores(m, x, tags, contexts) for m in members])
