"""Waveform normalization, STFT and log-mel feature extraction.

All audio is mono at 16 kHz. Framing uses a 60 ms window (960 samples) and
a 20 ms hop (320 samples) with no edge padding: the first frame starts at
sample 0 and the last frame is the last one fully contained in the signal,
so a clip of T samples yields N = 1 + (T - 960) // 320 frames. Downstream
code maps frame n to the time interval [0.020*n, 0.020*(n+1)) seconds.

Mel filterbank construction (covered by the oracle tests):
  * mel scale m(f) = 2595 * log10(1 + f / 700)
  * 130 points equally spaced in mel between 0 Hz and 8 kHz give 128
    triangular filters; filter i rises from edge i to edge i+1 and falls
    to edge i+2, evaluated at the 481 rFFT bin centers (bin width
    16000/960 Hz)
  * each filter is area-normalized to unit weight sum (empty filters, if
    any, are left as zeros)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SAMPLE_RATE = 16000
FRAME_LEN = 960
FRAME_HOP = 320
N_FFT_BINS = FRAME_LEN // 2 + 1
N_MELS = 128
FRAME_LEN_S = 0.060
FRAME_HOP_S = 0.020
LOG_FLOOR = 1e-12
STD_FLOOR = 1e-3


def normalize_waveform(raw) -> np.ndarray:
    """Scale a waveform to peak absolute amplitude 1 (all-zero passes through)."""
    x = np.asarray(raw, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("waveform must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(x)):
        raise ValueError("waveform contains NaN or Inf")
    peak = np.max(np.abs(x))
    if peak == 0.0:
        return x.copy()
    return x / peak


def num_frames(n_samples: int) -> int:
    """Frame count for a signal of n_samples samples (no edge padding)."""
    if n_samples < FRAME_LEN:
        raise ValueError(f"signal too short: {n_samples} < {FRAME_LEN} samples")
    return 1 + (n_samples - FRAME_LEN) // FRAME_HOP


def hann_window(length: int = FRAME_LEN) -> np.ndarray:
    # Periodic Hann, the usual analysis choice for STFT.
    k = np.arange(length)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / length)


def stft(wave: np.ndarray) -> np.ndarray:
    """Complex spectrogram (481 x N) of a 1-D waveform.

    Accepts a batch (B, T) as well, returning (B, 481, N).
    """
    x = np.asarray(wave, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    n = num_frames(x.shape[-1])
    frames = np.lib.stride_tricks.sliding_window_view(x, FRAME_LEN, axis=-1)
    frames = frames[:, :: FRAME_HOP, :][:, :n, :]
    spec = np.fft.rfft(frames * hann_window(), axis=-1)
    spec = spec.transpose(0, 2, 1)
    return spec[0] if squeeze else spec


def mel_filterbank() -> np.ndarray:
    """Triangular mel filterbank, shape (128, 481). Cached after first call."""
    global _MEL_FB
    if _MEL_FB is None:
        def to_mel(f):
            return 2595.0 * np.log10(1.0 + f / 700.0)

        def from_mel(m):
            return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

        edges_hz = from_mel(np.linspace(to_mel(0.0), to_mel(SAMPLE_RATE / 2), N_MELS + 2))
        bin_hz = np.arange(N_FFT_BINS) * SAMPLE_RATE / FRAME_LEN
        fb = np.zeros((N_MELS, N_FFT_BINS))
        for i in range(N_MELS):
            lo, center, hi = edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]
            rising = (bin_hz - lo) / (center - lo)
            falling = (hi - bin_hz) / (hi - center)
            fb[i] = np.clip(np.minimum(rising, falling), 0.0, None)
            s = fb[i].sum()
            if s > 0:
                fb[i] /= s
        _MEL_FB = fb
    return _MEL_FB


_MEL_FB = None


def logmel(spec: np.ndarray) -> np.ndarray:
    """Log mel-energy matrix (128 x N) from a complex spectrogram (481 x N)."""
    spec = np.asarray(spec)
    if spec.shape[-2] != N_FFT_BINS:
        raise ValueError(f"expected {N_FFT_BINS} frequency bins, got {spec.shape[-2]}")
    power = np.abs(spec) ** 2
    mel_energy = np.einsum("mf,...fn->...mn", mel_filterbank(), power)
    return np.log(mel_energy + LOG_FLOOR)


def logmel_from_waveform(wave: np.ndarray) -> np.ndarray:
    return logmel(stft(wave))


@dataclass
class GlobalStats:
    """Per-mel-bin mean and (floored) standard deviation over a corpus."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        self.std = np.asarray(self.std, dtype=np.float64).reshape(-1)
        if self.mean.shape != (N_MELS,) or self.std.shape != (N_MELS,):
            raise ValueError("stats must have one entry per mel bin")
        if np.any(self.std <= 0):
            raise ValueError("std must be positive")


def compute_global_stats(feature_matrices) -> GlobalStats:
    """Per-bin mean/std over all frames of all provided log-mel matrices."""
    total = np.zeros(N_MELS)
    total_sq = np.zeros(N_MELS)
    count = 0
    for x in feature_matrices:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != N_MELS:
            raise ValueError(f"expected {N_MELS} mel rows, got {x.shape[0]}")
        total += x.sum(axis=1)
        total_sq += (x * x).sum(axis=1)
        count += x.shape[1]
    if count < 2:
        raise ValueError("need at least two frames to compute global stats")
    mean = total / count
    var = total_sq / count - mean**2
    std = np.sqrt(np.clip(var, 0.0, None))
    return GlobalStats(mean=mean, std=np.maximum(std, STD_FLOOR))


def apply_global_norm(x: np.ndarray, stats: GlobalStats) -> np.ndarray:
    """Per-bin (x - mean) / std; works on (128, N) and batches (..., 128, N)."""
    x = np.asarray(x)
    if x.shape[-2] != N_MELS:
        raise ValueError(f"expected {N_MELS} mel rows, got {x.shape[-2]}")
    return (x - stats.mean[:, None]) / stats.std[:, None]


def frame_interval(n: int) -> tuple[float, float]:
    """Onset/offset seconds covered by frame n on the 20 ms grid."""
    return n * FRAME_HOP_S, (n + 1) * FRAME_HOP_S


def save_stats(path, stats: GlobalStats) -> None:
    from . import storage

    storage.save_bundle(path, {"mean": stats.mean, "std": stats.std},
                        meta={"kind": "global_stats"})


def load_stats(path) -> GlobalStats:
    from . import storage

    arrays, meta = storage.load_bundle(path)
    if meta.get("kind") != "global_stats":
        raise ValueError(f"{path}: not a stats file")
    return GlobalStats(mean=arrays["mean"], std=arrays["std"])
