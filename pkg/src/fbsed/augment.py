"""Training-time data augmentation.

Waveform stage: random scaling and mixup realized as shifted superposition
of one or two clips; targets of mixed clips are OR-combined, never
interpolated. Feature stage (applied after global normalization, in this
order): frequency warping, gaussian blur, time/frequency masking, additive
gaussian noise. Every function takes an explicit numpy Generator, so a
fixed seed reproduces augmentations bit-exactly. All augmentation is a
training-only concern; validation and inference consume clean features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import N_MELS


@dataclass
class AugmentConfig:
    p_mix: float = 2.0 / 3.0
    t_max_s: float = 15.0
    blur_std_rate: float = 0.5
    noise_power_max: float = 0.2
    warp_factor_range: tuple[float, float] = (0.9, 1.1)
    warp_knot_range: tuple[float, float] = (32.0, 96.0)
    n_time_masks: int = 2
    max_time_mask_frac: float = 0.2
    n_freq_masks: int = 1
    max_freq_mask_bins: int = 16
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_mix <= 1.0:
            raise ValueError(f"p_mix must be in [0, 1], got {self.p_mix}")
        if self.t_max_s <= 0:
            raise ValueError("t_max_s must be positive")


@dataclass
class MixturePlan:
    """One or two scaled, shifted components summed into a training signal."""

    component_ids: list
    lambdas: np.ndarray
    taus: list[int]          # shift offsets in samples
    max_len: int             # sample budget the shifts were drawn under

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=np.float64)
        if len(self.component_ids) not in (1, 2):
            raise ValueError("mixtures have one or two components")
        if len(self.lambdas) != len(self.component_ids) or len(self.taus) != len(self.component_ids):
            raise ValueError("per-component fields must align")
        if np.any(self.lambdas <= 0):
            raise ValueError("scale factors must be positive")

    @property
    def n_components(self) -> int:
        return len(self.component_ids)


class PlanInvalidError(ValueError):
    pass


def sample_mixture_plan(cfg: AugmentConfig, pool, rng: np.random.Generator,
                        primary=None) -> MixturePlan:
    """Draw a mixture plan: Pr(two components) = p_mix, scales ~ LogNormal(0,1).

    `pool` is a sequence of (clip_id, n_samples) candidates for the extra
    component. `primary`, when given as (clip_id, n_samples), is always
    component 0; otherwise component 0 is drawn from the pool too. The
    first component is not shifted; extra components get a uniform shift
    that keeps the mixture within the t_max_s budget.
    """
    if primary is None:
        if len(pool) == 0:
            raise ValueError("candidate pool is empty")
        primary = pool[rng.integers(len(pool))]
    max_len = int(round(cfg.t_max_s * 16000))
    n_components = 2 if rng.random() < cfg.p_mix else 1
    components = [primary]
    if n_components == 2:
        if len(pool) == 0:
            raise ValueError("candidate pool is empty")
        components.append(pool[rng.integers(len(pool))])
    lambdas = rng.lognormal(mean=0.0, sigma=1.0, size=n_components)
    taus = [0]
    for _, length in components[1:]:
        taus.append(int(rng.integers(0, max(max_len - int(length), 0) + 1)))
    return MixturePlan(
        component_ids=[cid for cid, _ in components],
        lambdas=lambdas,
        taus=taus,
        max_len=max_len,
    )


def superpose(plan: MixturePlan, waveforms, targets) -> tuple[np.ndarray, np.ndarray]:
    """Sum scaled, shifted component waveforms and OR their tag vectors.

    `waveforms` and `targets` are sequences aligned with plan.component_ids.
    Output length is max over components of (shift + length).
    """
    if len(waveforms) != plan.n_components or len(targets) != plan.n_components:
        raise ValueError("waveforms/targets must align with the plan")
    out_len = max(tau + len(w) for tau, w in zip(plan.taus, waveforms))
    if out_len > plan.max_len:
        raise PlanInvalidError(
            f"mixture length {out_len} exceeds budget {plan.max_len}")
    mixed = np.zeros(out_len, dtype=np.float64)
    for lam, tau, w in zip(plan.lambdas, plan.taus, waveforms):
        mixed[tau:tau + len(w)] += lam * np.asarray(w, dtype=np.float64)
    merged = np.zeros_like(np.asarray(targets[0]), dtype=np.int64)
    for t in targets:
        merged = merged | (np.asarray(t, dtype=np.int64) != 0)
    return mixed, merged.astype(np.int64)


def gaussian_kernel(std: float, size: int = 5) -> np.ndarray:
    """Normalized size x size gaussian; near-zero std degenerates to a delta."""
    half = size // 2
    if std < 1e-3:
        k = np.zeros((size, size))
        k[half, half] = 1.0
        return k
    ax = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * std**2))
    return g / g.sum()


def gaussian_blur(x: np.ndarray, rng: np.random.Generator,
                  std_rate: float = 0.5, std: float | None = None) -> np.ndarray:
    """5x5 gaussian blur with replicate edge padding; std ~ Exp(rate) by default."""
    if std is None:
        std = rng.exponential(scale=1.0 / std_rate)
    kernel = gaussian_kernel(std)
    if kernel[2, 2] == 1.0:
        return np.array(x, dtype=np.float64, copy=True)
    xp = np.pad(np.asarray(x, dtype=np.float64), 2, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(xp, (5, 5))
    return np.einsum("hwij,ij->hw", windows, kernel, optimize=True)


def add_noise(x: np.ndarray, rng: np.random.Generator,
              noise_power_max: float = 0.2) -> np.ndarray:
    """Add N(0, s2) noise with per-clip power s2 ~ Uniform(0, noise_power_max)."""
    x = np.asarray(x, dtype=np.float64)
    if noise_power_max <= 0:
        return x.copy()
    power = rng.uniform(0.0, noise_power_max)
    return x + rng.normal(0.0, np.sqrt(power), size=x.shape)


def time_mask(x: np.ndarray, start: int, width: int) -> np.ndarray:
    out = np.array(x, copy=True)
    out[:, start:start + width] = 0.0
    return out


def freq_mask(x: np.ndarray, start: int, width: int) -> np.ndarray:
    out = np.array(x, copy=True)
    out[start:start + width, :] = 0.0
    return out


def mask(x: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Zero out up to n_time_masks time stripes and n_freq_masks mel stripes.

    Stripes are set to 0, the post-normalization mean. Widths are drawn
    uniformly up to the configured maxima and may round to zero.
    """
    out = np.array(x, copy=True)
    n = out.shape[1]
    for _ in range(cfg.n_time_masks):
        width = int(rng.uniform(0.0, cfg.max_time_mask_frac * n))
        if width > 0:
            start = int(rng.integers(0, n - width + 1))
            out[:, start:start + width] = 0.0
    for _ in range(cfg.n_freq_masks):
        width = int(rng.uniform(0.0, cfg.max_freq_mask_bins))
        if width > 0:
            start = int(rng.integers(0, N_MELS - width + 1))
            out[start:start + width, :] = 0.0
    return out


def warp_mel_axis(x: np.ndarray, factor: float, knot: float) -> np.ndarray:
    """Piecewise-linear remap of the mel axis with one breakpoint.

    The input position `knot` lands at output position factor*knot; the
    axis endpoints stay fixed and bins in between are linearly
    interpolated. factor == 1 is the identity.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    top = float(n - 1)
    out_knot = np.clip(factor * knot, 1e-6, top - 1e-6)
    pos = np.arange(n, dtype=np.float64)
    below = pos <= out_knot
    src = np.empty(n)
    src[below] = pos[below] * (knot / out_knot)
    src[~below] = knot + (pos[~below] - out_knot) * (top - knot) / (top - out_knot)
    lo = np.clip(np.floor(src).astype(int), 0, n - 2)
    frac = src - lo
    return x[lo, :] * (1.0 - frac[:, None]) + x[lo + 1, :] * frac[:, None]


def frequency_warp(x: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    factor = rng.uniform(*cfg.warp_factor_range)
    knot = rng.uniform(*cfg.warp_knot_range)
    return warp_mel_axis(x, factor, knot)


def augment_features(x: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Feature-domain chain on a normalized log-mel matrix: warp, blur, masks, noise."""
    x = frequency_warp(x, cfg, rng)
    x = gaussian_blur(x, rng, std_rate=cfg.blur_std_rate)
    x = mask(x, cfg, rng)
    x = add_noise(x, rng, noise_power_max=cfg.noise_power_max)
    return x
