"""Binary cross entropy on probabilities."""

from __future__ import annotations

import numpy as np

PROB_CLAMP = 1e-7


def bce_loss(y: np.ndarray, z: np.ndarray) -> tuple[float, np.ndarray]:
    """Summed binary cross entropy and its gradient w.r.t. y.

    L = -sum(z*log(y) + (1-z)*log(1-y)) with y clamped into
    [1e-7, 1 - 1e-7]. The sum runs over every element; callers divide by
    their frame/batch count to get the averaging they want. The gradient
    is evaluated at the clamped probabilities and passed through, so it
    stays bounded in saturation.
    """
    y = np.asarray(y)
    z = np.asarray(z)
    if y.shape != z.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {z.shape}")
    yc = np.clip(y, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = -float(np.sum(z * np.log(yc) + (1.0 - z) * np.log1p(-yc)))
    grad = (yc - z) / (yc * (1.0 - yc))
    return loss, grad.astype(y.dtype)
