"""Timed sound events and their mapping onto the 20 ms frame grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import FRAME_HOP_S


@dataclass(frozen=True)
class Event:
    label: str
    onset: float
    offset: float

    def __post_init__(self):
        if not self.onset < self.offset:
            raise ValueError(f"event needs onset < offset, got {self.onset}..{self.offset}")

    @property
    def duration(self) -> float:
        return self.offset - self.onset

    def shifted(self, dt: float) -> "Event":
        return Event(self.label, self.onset + dt, self.offset + dt)

    def to_list(self):
        return [self.label, self.onset, self.offset]


def sort_events(events) -> list[Event]:
    return sorted(events, key=lambda e: (e.onset, e.label, e.offset))


def validate_events(events, classes) -> list[Event]:
    class_set = set(classes)
    out = []
    for e in events:
        if e.label not in class_set:
            raise ValueError(f"unknown event class {e.label!r}")
        out.append(e)
    return sort_events(out)


def rasterize_events(events, n_frames: int, classes,
                     hop_s: float = FRAME_HOP_S) -> np.ndarray:
    """Binary (K, N) activity mask from an event list.

    Frame n is active for a class when the event interval overlaps at
    least half of the frame interval [n*hop, (n+1)*hop).
    """
    index = {c: i for i, c in enumerate(classes)}
    mask = np.zeros((len(classes), n_frames), dtype=np.int64)
    half = 0.5 * hop_s
    for e in events:
        k = index[e.label]
        for n in range(n_frames):
            lo = n * hop_s
            hi = lo + hop_s
            overlap = min(hi, e.offset) - max(lo, e.onset)
            if overlap >= half - 1e-12:
                mask[k, n] = 1
    return mask


def rasterize_events_fast(events, n_frames: int, classes,
                          hop_s: float = FRAME_HOP_S) -> np.ndarray:
    """Vectorized twin of rasterize_events (same >= 50% overlap rule)."""
    index = {c: i for i, c in enumerate(classes)}
    mask = np.zeros((len(classes), n_frames), dtype=np.int64)
    half = 0.5 * hop_s
    grid_lo = np.arange(n_frames) * hop_s
    grid_hi = grid_lo + hop_s
    for e in events:
        overlap = np.minimum(grid_hi, e.offset) - np.maximum(grid_lo, e.onset)
        mask[index[e.label]] |= overlap >= half - 1e-12
    return mask
