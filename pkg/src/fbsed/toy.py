"""Synthetic toy soundscapes with exact strong labels.

Three confusable-but-learnable event kinds over a low-level noise floor:
steady tones in two nearby bands (hard to tell apart without context) and
an amplitude-modulated band-limited noise burst. Each clip gets one or
two events; same-class events never overlap and keep a minimum gap so
event boundaries stay unambiguous.

The generator writes WAV audio plus per-subset manifests. Weak clips keep
tags only and unlabeled clips keep nothing; the full ground truth for
both lands in a sealed side file (sealed_truth.jsonl) that training code
paths never read — only evaluation tooling loads it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsp
from .data import ClipRecord, load_manifest, write_manifest, write_wav
from .events import Event

SEALED_TRUTH_NAME = "sealed_truth.jsonl"


@dataclass(frozen=True)
class ToyClassSpec:
    name: str
    kind: str                      # tone | chirp | noise_band
    f_lo: float
    f_hi: float
    am_rate: float = 0.0           # amplitude modulation, Hz (0 = none)


@dataclass
class ToyDatasetSpec:
    classes: tuple[ToyClassSpec, ...]
    counts: dict = field(default_factory=lambda: {
        "weak": 20, "synthetic": 10, "unlabeled": 56, "validation": 16, "eval": 24})
    clip_duration_range: tuple[float, float] = (1.7, 2.1)
    events_per_clip: tuple[int, int] = (1, 2)
    event_duration_range: tuple[float, float] = (0.7, 1.4)
    event_amplitude_range: tuple[float, float] = (0.3, 0.7)
    noise_floor: float = 0.04
    min_same_class_gap: float = 0.5
    min_event_gap: float = 0.35
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.clip_duration_range
        if hi > 10.0:
            raise ValueError("toy clips are capped at 10 s")
        if lo < 0.2:
            raise ValueError("clips must be long enough to frame")

    @property
    def class_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.classes)


def default_toy_spec(seed: int = 0) -> ToyDatasetSpec:
    # The two tones sit in nearby disjoint bands so tagging does not
    # saturate; the noise band is easy but spectrally wide. Calibrated so
    # the acceptance trends have measurable headroom.
    return ToyDatasetSpec(
        classes=(
            ToyClassSpec("tone_low", "tone", 760.0, 840.0),
            ToyClassSpec("tone_high", "tone", 930.0, 1020.0),
            ToyClassSpec("noise_band", "noise_band", 2400.0, 4200.0, am_rate=6.0),
        ),
        seed=seed,
    )


def _synth_event(spec: ToyClassSpec, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n_samples) / dsp.SAMPLE_RATE
    if spec.kind == "tone":
        f0 = rng.uniform(spec.f_lo, spec.f_hi)
        sig = np.sin(2 * np.pi * f0 * t + rng.uniform(0, 2 * np.pi))
    elif spec.kind == "chirp":
        f0 = rng.uniform(spec.f_lo, 0.5 * (spec.f_lo + spec.f_hi))
        f1 = rng.uniform(0.5 * (spec.f_lo + spec.f_hi), spec.f_hi)
        phase = 2 * np.pi * (f0 * t + 0.5 * (f1 - f0) / t[-1] * t**2)
        sig = np.sin(phase)
    elif spec.kind == "noise_band":
        white = rng.standard_normal(n_samples)
        spectrum = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(n_samples, d=1.0 / dsp.SAMPLE_RATE)
        spectrum[(freqs < spec.f_lo) | (freqs > spec.f_hi)] = 0.0
        sig = np.fft.irfft(spectrum, n=n_samples)
        peak = np.max(np.abs(sig))
        if peak > 0:
            sig = sig / peak
    else:
        raise ValueError(f"unknown toy class kind {spec.kind!r}")
    if spec.am_rate > 0:
        sig = sig * (0.6 + 0.4 * np.sin(2 * np.pi * spec.am_rate * t))
    # 20 ms raised-cosine edges against clicks.
    edge = min(320, n_samples // 4)
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(edge) / edge)
    sig[:edge] *= ramp
    sig[-edge:] *= ramp[::-1]
    return sig


def _place_events(spec: ToyDatasetSpec, clip_dur: float,
                  rng: np.random.Generator) -> list[Event]:
    n_events = int(rng.integers(spec.events_per_clip[0], spec.events_per_clip[1] + 1))
    events: list[Event] = []
    for _ in range(n_events):
        cls = spec.classes[rng.integers(len(spec.classes))]
        for _attempt in range(20):
            dur = rng.uniform(*spec.event_duration_range)
            dur = min(dur, clip_dur - 0.1)
            onset = rng.uniform(0.05, clip_dur - dur - 0.05)
            candidate = Event(cls.name, onset, onset + dur)
            clash = any(
                candidate.onset < e.offset + _gap(spec, e, candidate)
                and e.onset < candidate.offset + _gap(spec, e, candidate)
                for e in events
            )
            if not clash:
                events.append(candidate)
                break
    return sorted(events, key=lambda e: e.onset)


def _gap(spec: ToyDatasetSpec, a: Event, b: Event) -> float:
    # Events never overlap (clean boundaries for collar scoring); same-class
    # events keep extra separation so they stay distinct as events.
    # Multi-label overlap still occurs in training through mixup.
    if a.label == b.label:
        return spec.min_same_class_gap
    return spec.min_event_gap


def synthesize_clip(spec: ToyDatasetSpec, rng: np.random.Generator
                    ) -> tuple[np.ndarray, list[Event]]:
    clip_dur = rng.uniform(*spec.clip_duration_range)
    n = int(round(clip_dur * dsp.SAMPLE_RATE))
    audio = spec.noise_floor * rng.standard_normal(n)
    events = _place_events(spec, n / dsp.SAMPLE_RATE, rng)
    by_name = {c.name: c for c in spec.classes}
    for e in events:
        lo = int(round(e.onset * dsp.SAMPLE_RATE))
        hi = int(round(e.offset * dsp.SAMPLE_RATE))
        amp = rng.uniform(*spec.event_amplitude_range)
        audio[lo:hi] += amp * _synth_event(by_name[e.label], hi - lo, rng)
    peak = np.max(np.abs(audio))
    if peak > 1.0:
        audio = audio / peak
    return audio, events


def generate_toy_dataset(spec: ToyDatasetSpec, out_dir) -> dict[str, Path]:
    """Write audio + manifests; returns {subset: manifest_path} plus the
    sealed-truth path under key "sealed_truth"."""
    out_dir = Path(out_dir)
    audio_dir = out_dir / "audio"
    rng = np.random.default_rng(spec.seed)
    manifests: dict[str, Path] = {}
    sealed: list[ClipRecord] = []
    for subset, count in spec.counts.items():
        records = []
        for i in range(count):
            clip_id = f"{subset}_{i:04d}"
            audio, events = synthesize_clip(spec, rng)
            wav_path = audio_dir / f"{clip_id}.wav"
            write_wav(wav_path, audio)
            duration = len(audio) / dsp.SAMPLE_RATE
            tags = tuple(sorted({e.label for e in events}))
            full = ClipRecord(clip_id=clip_id, audio_path=str(wav_path),
                              duration_s=duration, subset=subset,
                              tags=tags, events=tuple(events))
            if subset == "weak":
                records.append(ClipRecord(clip_id=clip_id, audio_path=str(wav_path),
                                          duration_s=duration, subset=subset,
                                          tags=tags))
                sealed.append(full)
            elif subset == "unlabeled":
                records.append(ClipRecord(clip_id=clip_id, audio_path=str(wav_path),
                                          duration_s=duration, subset=subset))
                sealed.append(full)
            else:
                records.append(full)
        manifest_path = out_dir / f"{subset}.jsonl"
        write_manifest(manifest_path, records)
        manifests[subset] = manifest_path
    sealed_path = out_dir / SEALED_TRUTH_NAME
    write_manifest(sealed_path, [replace_subset_for_truth(r) for r in sealed],
                   meta={"kind": "sealed_truth",
                         "note": "ground truth for weak/unlabeled clips; "
                                 "scoring only, never used in training"})
    manifests["sealed_truth"] = sealed_path
    return manifests


def replace_subset_for_truth(rec: ClipRecord) -> ClipRecord:
    # Stored as validation-style records so the manifest validates.
    return ClipRecord(clip_id=rec.clip_id, audio_path=rec.audio_path,
                      duration_s=rec.duration_s, subset="validation",
                      tags=rec.tags, events=rec.events)


def load_sealed_truth(path) -> dict[str, ClipRecord]:
    """Evaluation-only access to the sealed ground truth, keyed by clip id."""
    records, meta = load_manifest(path)
    if meta.get("kind") != "sealed_truth":
        raise ValueError(f"{path} is not a sealed truth file")
    return {r.clip_id: r for r in records}
