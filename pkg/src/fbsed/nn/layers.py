"""Layers with explicit forward/backward passes.

Conventions:
  * 2-D feature maps are (batch, channels, mel, time); 1-D maps are
    (batch, channels, time).
  * forward(x, training=...) caches whatever backward needs on the layer
    instance; backward(dy) returns dx and accumulates parameter gradients.
    A layer therefore supports one in-flight forward at a time and model
    instances are not thread-safe.
  * Convolutions are kernel 3, stride 1, padding 1 (the time/mel extent is
    preserved); pooling is 2x1 max over the mel axis.

Large per-step transients (im2col buffers, recurrent caches, norm
intermediates) are carved out of persistent per-layer scratch buffers
instead of being reallocated every step; fresh multi-megabyte allocations
per training step otherwise dominate the runtime via page faults. Scratch
contents are only valid between one forward and its backward.
"""

from __future__ import annotations

import numpy as np


class Parameter:
    __slots__ = ("value", "grad", "name")

    def __init__(self, value: np.ndarray, name: str = ""):
        self.value = np.asarray(value)
        self.grad = np.zeros_like(self.value)
        self.name = name

    def zero_grad(self):
        self.grad[...] = 0.0


def _uniform_init(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Layer:
    def params(self) -> list[Parameter]:
        return []

    def forward(self, x, training: bool = False):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    def _scratch(self, name: str, shape, dtype) -> np.ndarray:
        """Contiguous reusable buffer of the requested shape."""
        bufs = getattr(self, "_bufs", None)
        if bufs is None:
            bufs = self._bufs = {}
        need = int(np.prod(shape))
        arr = bufs.get(name)
        if arr is None or arr.size < need or arr.dtype != np.dtype(dtype):
            arr = bufs[name] = np.empty(max(need, 1), dtype=dtype)
        return arr[:need].reshape(shape)


class Sequential(Layer):
    def __init__(self, layers):
        self.layers = list(layers)

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def forward(self, x, training=False):
        for layer in self.layers:
            x = layer.forward(x, training=training)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy


class Conv2d(Layer):
    """Kernel-3, stride-1, padding-1 2-D convolution via im2col + GEMM.

    The im2col buffer holds nine shifted copies in (B, C*9, H*W) layout,
    so the forward product and the weight gradient are plain batched
    matmuls and the input gradient folds back with nine strided adds.
    """

    def __init__(self, in_ch, out_ch, rng, dtype=np.float32):
        self.w = Parameter(_uniform_init(rng, (out_ch, in_ch, 3, 3), in_ch * 9, dtype))
        self.b = Parameter(np.zeros(out_ch, dtype=dtype))

    def params(self):
        return [self.w, self.b]

    def forward(self, x, training=False):
        if x.shape[1] != self.w.value.shape[1]:
            raise ValueError(
                f"conv2d expected {self.w.value.shape[1]} input channels, got {x.shape[1]}")
        b, c, h, w = x.shape
        xp = self._scratch("xp", (b, c, h + 2, w + 2), x.dtype)
        xp.fill(0.0)
        xp[:, :, 1:-1, 1:-1] = x
        cols = self._scratch("cols", (b, c, 3, 3, h, w), x.dtype)
        for i in range(3):
            for j in range(3):
                cols[:, :, i, j] = xp[:, :, i:i + h, j:j + w]
        self._cols = cols.reshape(b, c * 9, h * w)
        self._shape = (b, c, h, w)
        o = self.w.value.shape[0]
        wmat = self.w.value.reshape(o, c * 9)
        y = self._scratch("y", (b, o, h * w), x.dtype)
        np.matmul(np.broadcast_to(wmat, (b, o, c * 9)), self._cols, out=y)
        y = y.reshape(b, o, h, w)
        y += self.b.value[None, :, None, None]
        return y

    def backward(self, dy):
        b, c, h, w = self._shape
        o = dy.shape[1]
        dy3 = np.ascontiguousarray(dy).reshape(b, o, h * w)
        self.w.grad += np.matmul(dy3, self._cols.transpose(0, 2, 1)).sum(axis=0) \
                             .reshape(o, c, 3, 3)
        self.b.grad += dy3.sum(axis=(0, 2))
        wmat = self.w.value.reshape(o, c * 9)
        dcols = self._scratch("dcols", (b, c * 9, h * w), dy.dtype)
        np.matmul(np.broadcast_to(wmat.T, (b, c * 9, o)), dy3, out=dcols)
        dcols = dcols.reshape(b, c, 3, 3, h, w)
        dxp = self._scratch("dxp", (b, c, h + 2, w + 2), dy.dtype)
        dxp.fill(0.0)
        for i in range(3):
            for j in range(3):
                dxp[:, :, i:i + h, j:j + w] += dcols[:, :, i, j]
        return dxp[:, :, 1:-1, 1:-1]


class Conv1d(Layer):
    """Kernel-3, stride-1, padding-1 1-D convolution (same scheme as Conv2d)."""

    def __init__(self, in_ch, out_ch, rng, dtype=np.float32):
        self.w = Parameter(_uniform_init(rng, (out_ch, in_ch, 3), in_ch * 3, dtype))
        self.b = Parameter(np.zeros(out_ch, dtype=dtype))

    def params(self):
        return [self.w, self.b]

    def forward(self, x, training=False):
        if x.shape[1] != self.w.value.shape[1]:
            raise ValueError(
                f"conv1d expected {self.w.value.shape[1]} input channels, got {x.shape[1]}")
        b, c, n = x.shape
        xp = self._scratch("xp", (b, c, n + 2), x.dtype)
        xp.fill(0.0)
        xp[:, :, 1:-1] = x
        cols = self._scratch("cols", (b, c, 3, n), x.dtype)
        for i in range(3):
            cols[:, :, i] = xp[:, :, i:i + n]
        self._cols = cols.reshape(b, c * 3, n)
        self._shape = (b, c, n)
        o = self.w.value.shape[0]
        wmat = self.w.value.reshape(o, c * 3)
        y = self._scratch("y", (b, o, n), x.dtype)
        np.matmul(np.broadcast_to(wmat, (b, o, c * 3)), self._cols, out=y)
        y = y + self.b.value[None, :, None]
        return y

    def backward(self, dy):
        b, c, n = self._shape
        o = dy.shape[1]
        dy = np.ascontiguousarray(dy)
        self.w.grad += np.matmul(dy, self._cols.transpose(0, 2, 1)).sum(axis=0) \
                             .reshape(o, c, 3)
        self.b.grad += dy.sum(axis=(0, 2))
        wmat = self.w.value.reshape(o, c * 3)
        dcols = self._scratch("dcols", (b, c * 3, n), dy.dtype)
        np.matmul(np.broadcast_to(wmat.T, (b, c * 3, o)), dy, out=dcols)
        dcols = dcols.reshape(b, c, 3, n)
        dxp = self._scratch("dxp", (b, c, n + 2), dy.dtype)
        dxp.fill(0.0)
        for i in range(3):
            dxp[:, :, i:i + n] += dcols[:, :, i]
        return dxp[:, :, 1:-1]


class _BatchNorm(Layer):
    """Per-channel normalization; batch statistics while training, running
    statistics in eval mode. Variance is the biased (population) estimate
    everywhere."""

    def __init__(self, n_ch, axes, dtype=np.float32, eps=1e-5, momentum=0.1):
        self.gamma = Parameter(np.ones(n_ch, dtype=dtype))
        self.beta = Parameter(np.zeros(n_ch, dtype=dtype))
        self.running_mean = np.zeros(n_ch, dtype=dtype)
        self.running_var = np.ones(n_ch, dtype=dtype)
        self.eps = eps
        self.momentum = momentum
        self._axes = axes

    def params(self):
        return [self.gamma, self.beta]

    def _expand(self, v, ndim):
        shape = [1] * ndim
        shape[1] = -1
        return v.reshape(shape)

    def forward(self, x, training=False):
        ax = self._axes
        if training:
            mean = x.mean(axis=ax)
            var = x.var(axis=ax)
            m = self.momentum
            self.running_mean = ((1 - m) * self.running_mean + m * mean).astype(x.dtype)
            self.running_var = ((1 - m) * self.running_var + m * var).astype(x.dtype)
        else:
            mean = self.running_mean.astype(x.dtype)
            var = self.running_var.astype(x.dtype)
        ivar = 1.0 / np.sqrt(var + self.eps)
        xhat = self._scratch("xhat", x.shape, x.dtype)
        np.subtract(x, self._expand(mean, x.ndim), out=xhat)
        xhat *= self._expand(ivar, x.ndim)
        self._xhat = xhat
        self._ivar = ivar
        self._training = training
        self._count = x.size // x.shape[1]
        out = self._scratch("out", x.shape, x.dtype)
        np.multiply(xhat, self._expand(self.gamma.value, x.ndim), out=out)
        out += self._expand(self.beta.value, x.ndim)
        return out

    def backward(self, dy):
        ax = self._axes
        ndim = dy.ndim
        xhat = self._xhat
        self.gamma.grad += (dy * xhat).sum(axis=ax)
        self.beta.grad += dy.sum(axis=ax)
        dxhat = self._scratch("dxhat", dy.shape, dy.dtype)
        np.multiply(dy, self._expand(self.gamma.value, ndim), out=dxhat)
        ivar = self._expand(self._ivar, ndim)
        if not self._training:
            dxhat *= ivar
            return dxhat
        m = self._count
        s1 = dxhat.sum(axis=ax) / m
        s2 = (dxhat * xhat).sum(axis=ax) / m
        # dx = ivar * (dxhat - s1 - xhat * s2)
        dx = self._scratch("dx", dy.shape, dy.dtype)
        np.multiply(xhat, self._expand(s2.astype(dy.dtype), ndim), out=dx)
        np.subtract(dxhat, dx, out=dx)
        dx -= self._expand(s1.astype(dy.dtype), ndim)
        dx *= ivar
        return dx

    def state(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def load_state(self, state):
        self.running_mean = np.asarray(state["running_mean"])
        self.running_var = np.asarray(state["running_var"])


class BatchNorm2d(_BatchNorm):
    def __init__(self, n_ch, dtype=np.float32, eps=1e-5, momentum=0.1):
        super().__init__(n_ch, axes=(0, 2, 3), dtype=dtype, eps=eps, momentum=momentum)


class BatchNorm1d(_BatchNorm):
    def __init__(self, n_ch, dtype=np.float32, eps=1e-5, momentum=0.1):
        super().__init__(n_ch, axes=(0, 2), dtype=dtype, eps=eps, momentum=momentum)


class ReLU(Layer):
    def forward(self, x, training=False):
        mask = self._scratch("mask", x.shape, bool)
        np.greater(x, 0, out=mask)
        self._mask = mask
        out = self._scratch("out", x.shape, x.dtype)
        np.multiply(x, mask, out=out)
        return out

    def backward(self, dy):
        dx = self._scratch("dx", dy.shape, dy.dtype)
        np.multiply(dy, self._mask, out=dx)
        return dx


class Sigmoid(Layer):
    def forward(self, x, training=False):
        self._y = sigmoid(x)
        return self._y

    def backward(self, dy):
        return dy * self._y * (1.0 - self._y)


def sigmoid(x):
    # exp overflow saturates to exactly 0/1, which is what we want.
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


class MaxPool2d(Layer):
    """2x1 max pooling over the mel axis; the time axis is untouched.

    Ties route the gradient to the upper of the two pooled rows."""

    def forward(self, x, training=False):
        b, c, h, w = x.shape
        if h % 2 != 0:
            raise ValueError(f"pool2d needs an even height, got {h}")
        view = x.reshape(b, c, h // 2, 2, w)
        top = view[:, :, :, 0, :]
        bottom = view[:, :, :, 1, :]
        wins = self._scratch("wins", top.shape, bool)
        np.greater_equal(top, bottom, out=wins)
        self._top_wins = wins
        self._in_shape = x.shape
        out = self._scratch("out", top.shape, x.dtype)
        np.copyto(out, bottom)
        np.copyto(out, top, where=wins)
        return out

    def backward(self, dy):
        b, c, h, w = self._in_shape
        dview = self._scratch("dview", (b, c, h // 2, 2, w), dy.dtype)
        wins = self._top_wins
        np.multiply(dy, wins, out=dview[:, :, :, 0, :])
        np.multiply(dy, ~wins, out=dview[:, :, :, 1, :])
        return dview.reshape(b, c, h, w)


class ChannelFlatten(Layer):
    """(B, C, H, N) -> (B, C*H, N), merging channels and mel rows per frame."""

    def forward(self, x, training=False):
        self._in_shape = x.shape
        b, c, h, n = x.shape
        return np.ascontiguousarray(x).reshape(b, c * h, n)

    def backward(self, dy):
        return np.ascontiguousarray(dy).reshape(self._in_shape)


class Dense(Layer):
    """Per-frame fully connected layer on (B, F, N)."""

    def __init__(self, in_features, out_features, rng, dtype=np.float32):
        self.w = Parameter(_uniform_init(rng, (out_features, in_features), in_features, dtype))
        self.b = Parameter(np.zeros(out_features, dtype=dtype))

    def params(self):
        return [self.w, self.b]

    def forward(self, x, training=False):
        self._x = x
        y = np.einsum("bfn,of->bon", x, self.w.value, optimize=True)
        return y + self.b.value[None, :, None]

    def backward(self, dy):
        self.w.grad += np.einsum("bon,bfn->of", dy, self._x, optimize=True)
        self.b.grad += dy.sum(axis=(0, 2))
        return np.einsum("bon,of->bfn", dy, self.w.value, optimize=True)


class GRU(Layer):
    """Single forward-direction GRU layer over (B, F, N) -> (B, H, N).

    Gate convention (matching the scalar-loop oracle in the tests): with
    stacked gates (r, z, n),
        r = sigmoid(Wi_r x + bi_r + Wh_r h + bh_r)
        z = sigmoid(Wi_z x + bi_z + Wh_z h + bh_z)
        n = tanh(Wi_n x + bi_n + r * (Wh_n h + bh_n))
        h' = (1 - z) * n + z * h
    i.e. the reset gate multiplies the projected hidden state before the
    candidate activation. The initial hidden state is zero. Backward
    direction is realized by the caller flipping input and output in time.
    """

    def __init__(self, in_features, hidden, rng, dtype=np.float32):
        self.hidden = hidden
        self.w_i = Parameter(_uniform_init(rng, (3 * hidden, in_features), hidden, dtype))
        self.w_h = Parameter(_uniform_init(rng, (3 * hidden, hidden), hidden, dtype))
        self.b_i = Parameter(np.zeros(3 * hidden, dtype=dtype))
        self.b_h = Parameter(np.zeros(3 * hidden, dtype=dtype))

    def params(self):
        return [self.w_i, self.w_h, self.b_i, self.b_h]

    def forward(self, x, training=False):
        b, f, n = x.shape
        hd = self.hidden
        xs = self._scratch("xs", (n, b, f), x.dtype)
        xs[:] = x.transpose(2, 0, 1)
        gi = self._scratch("gi", (n, b, 3 * hd), x.dtype)
        np.matmul(xs, self.w_i.value.T, out=gi)
        # The r/z parts of the hidden bias fold into the input projection;
        # the n part must stay inside the reset product.
        bias = self.b_i.value.copy()
        bias[:2 * hd] += self.b_h.value[:2 * hd]
        gi += bias
        b_hn = self.b_h.value[2 * hd:]
        h = np.zeros((b, hd), dtype=x.dtype)
        hs = self._scratch("hs", (n, b, hd), x.dtype)
        hprev = self._scratch("hprev", (n, b, hd), x.dtype)
        rz_all = self._scratch("rz", (n, b, 2 * hd), x.dtype)
        cand_all = self._scratch("cand", (n, b, hd), x.dtype)
        hh_all = self._scratch("hh", (n, b, hd), x.dtype)
        w_h_t = self.w_h.value.T
        with np.errstate(over="ignore"):
            for t in range(n):
                gh = h @ w_h_t
                rz = 1.0 / (1.0 + np.exp(-(gi[t, :, :2 * hd] + gh[:, :2 * hd])))
                r = rz[:, :hd]
                z = rz[:, hd:]
                hh = gh[:, 2 * hd:] + b_hn
                cand = np.tanh(gi[t, :, 2 * hd:] + r * hh)
                hprev[t] = h
                rz_all[t] = rz
                cand_all[t] = cand
                hh_all[t] = hh
                h = cand + z * (h - cand)
                hs[t] = h
        self._xs = xs
        self._cache = (hprev, rz_all, cand_all, hh_all)
        return hs.transpose(1, 2, 0)

    def backward(self, dy):
        hprev, rz_all, cand_all, hh_all = self._cache
        n, b, hd = hprev.shape
        dys = self._scratch("dys", (n, b, hd), dy.dtype)
        dys[:] = dy.transpose(2, 0, 1)
        d_gi = self._scratch("d_gi", (n, b, 3 * hd), dy.dtype)
        d_gh = self._scratch("d_gh", (n, b, 3 * hd), dy.dtype)
        dh = np.zeros((b, hd), dtype=dy.dtype)
        w_h = self.w_h.value
        for t in range(n - 1, -1, -1):
            r = rz_all[t, :, :hd]
            z = rz_all[t, :, hd:]
            cand = cand_all[t]
            dht = dys[t] + dh
            dz = dht * (hprev[t] - cand)
            dn_pre = (dht - dht * z) * (1.0 - cand**2)
            dh = dht * z
            dhh = dn_pre * r
            dr_pre = dn_pre * hh_all[t] * r * (1.0 - r)
            dz_pre = dz * z * (1.0 - z)
            d_gi[t, :, :hd] = dr_pre
            d_gi[t, :, hd:2 * hd] = dz_pre
            d_gi[t, :, 2 * hd:] = dn_pre
            d_gh[t, :, :hd] = dr_pre
            d_gh[t, :, hd:2 * hd] = dz_pre
            d_gh[t, :, 2 * hd:] = dhh
            dh += d_gh[t] @ w_h
        flat_gi = d_gi.reshape(n * b, 3 * hd)
        flat_gh = d_gh.reshape(n * b, 3 * hd)
        self.w_i.grad += flat_gi.T @ self._xs.reshape(n * b, -1)
        self.w_h.grad += flat_gh.T @ hprev.reshape(n * b, hd)
        self.b_i.grad += flat_gi.sum(axis=0)
        self.b_h.grad += flat_gh.sum(axis=0)
        dx = self._scratch("dx", (n, b, self._xs.shape[2]), dy.dtype)
        np.matmul(d_gi, self.w_i.value, out=dx)
        return dx.transpose(1, 2, 0)
