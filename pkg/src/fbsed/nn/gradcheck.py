"""Finite-difference gradient checking helpers (float64, central differences).

Per-layer checks perturb one element at a time with a 1e-3 step. Whole-model
directional checks perturb every parameter at once; through a dozen layers
of ReLU/max-pool switches a 1e-3 step crosses many activation kinks, so
they default to a 1e-5 step (the analytic gradients themselves agree to
~1e-9 there).
"""

from __future__ import annotations

import numpy as np

FD_EPS = 1e-3
DIRECTIONAL_EPS = 1e-5


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    denom = np.linalg.norm(a) + np.linalg.norm(n)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - n) / denom)


def numerical_grad(f, x: np.ndarray, eps: float = FD_EPS) -> np.ndarray:
    """Central-difference gradient of scalar f w.r.t. every element of x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x)
        flat[i] = orig - eps
        lo = f(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad


def check_layer(layer, x: np.ndarray, rng: np.random.Generator,
                training: bool = True, eps: float = FD_EPS) -> float:
    """Max relative error between analytic and numeric grads of a layer.

    The scalar objective is a fixed random projection of the output, which
    exercises every output element. Checks the input gradient and every
    parameter gradient; returns the worst relative error.
    """
    x = np.asarray(x, dtype=np.float64)
    y = layer.forward(x, training=training)
    proj = rng.standard_normal(y.shape)

    def objective_input(xv):
        return float(np.sum(layer.forward(xv, training=training) * proj))

    for p in layer.params():
        p.zero_grad()
    dx = layer.backward(proj.copy())
    worst = relative_error(dx, numerical_grad(objective_input, x, eps))

    for p in layer.params():
        value = p.value

        def objective_param(v, _p=p):
            _p.value = v
            out = float(np.sum(layer.forward(x, training=training) * proj))
            _p.value = value
            return out

        num = numerical_grad(objective_param, value.copy(), eps)
        p.value = value
        worst = max(worst, relative_error(p.grad, num))
    return worst


def directional_check(f_loss, params: list, n_directions: int,
                      rng: np.random.Generator, eps: float = DIRECTIONAL_EPS) -> float:
    """Directional finite-difference check over a whole model.

    f_loss() -> (loss, grads aligned with params); perturbs all parameters
    along random unit directions and compares the directional derivative
    with the analytic gradient dot the direction. Returns the worst
    relative error over the sampled directions.
    """
    _, grads = f_loss()
    worst = 0.0
    for _ in range(n_directions):
        dirs = [rng.standard_normal(p.value.shape) for p in params]
        norm = np.sqrt(sum(float(np.sum(d * d)) for d in dirs))
        dirs = [d / norm for d in dirs]
        analytic = sum(float(np.sum(g * d)) for g, d in zip(grads, dirs))
        originals = [p.value.copy() for p in params]
        for p, d in zip(params, dirs):
            p.value = p.value + eps * d
        hi, _ = f_loss()
        for p, orig, d in zip(params, originals, dirs):
            p.value = orig - eps * d
        lo, _ = f_loss()
        for p, orig in zip(params, originals):
            p.value = orig
        numeric = (hi - lo) / (2.0 * eps)
        denom = max(abs(analytic) + abs(numeric), 1e-12)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst
