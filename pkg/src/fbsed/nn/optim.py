"""Adam with global-norm gradient clipping and the ramp/decay LR schedule."""

from __future__ import annotations

import numpy as np

LR_PEAK = 5e-4
LR_RAMP_STEPS = 1000
LR_DECAY_STEP = 15000
LR_FLOOR = 1e-4
CLIP_NORM = 20.0


def learning_rate(step: int) -> float:
    """Linear 0 -> 5e-4 over steps 1..1000, flat to 15000, then 1e-4."""
    if step <= LR_RAMP_STEPS:
        return LR_PEAK * step / LR_RAMP_STEPS
    if step <= LR_DECAY_STEP:
        return LR_PEAK
    return LR_FLOOR


class NonFiniteGradientError(RuntimeError):
    """Raised when a step meets NaN/Inf gradients; the step counter still
    advances but parameters and moments are untouched."""


class Adam:
    # beta/eps defaults are a recorded choice; the schedule constants above
    # are fixed.
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8,
                 clip_norm=CLIP_NORM, schedule=learning_rate):
        self.params = list(params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.schedule = schedule
        self.step_count = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def grad_global_norm(self) -> float:
        total = 0.0
        for p in self.params:
            g = p.grad.astype(np.float64, copy=False)
            total += float(np.sum(g * g))
        return float(np.sqrt(total))

    def step(self):
        self.step_count += 1
        norm = self.grad_global_norm()
        if not np.isfinite(norm):
            raise NonFiniteGradientError(
                f"non-finite gradient at step {self.step_count}; step skipped")
        scale = 1.0 if norm <= self.clip_norm else self.clip_norm / norm
        lr = self.schedule(self.step_count)
        t = self.step_count
        bias1 = 1.0 - self.beta1**t
        bias2 = 1.0 - self.beta2**t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad * scale
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / bias1
            v_hat = v / bias2
            p.value -= (lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.value.dtype)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for p, m, v in zip(self.params, self.m, self.v):
            out[f"adam_m/{p.name}"] = m
            out[f"adam_v/{p.name}"] = v
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray], step_count: int):
        for i, p in enumerate(self.params):
            self.m[i] = np.array(arrays[f"adam_m/{p.name}"], dtype=p.value.dtype)
            self.v[i] = np.array(arrays[f"adam_v/{p.name}"], dtype=p.value.dtype)
        self.step_count = int(step_count)
