"""Sound event models: forward-backward CRNN and tag-conditioned CNN.

The FBCRNN runs one shared convolutional encoder over the log-mel input
and feeds two independent recurrent classifiers, one consuming the
encoded frames forward in time and one backward (no hidden state is
exchanged, unlike a bidirectional RNN). Training drives the point-wise
maximum of the two per-frame tag predictions towards the clip's tag
vector at every frame, which pushes each classifier to tag events as soon
as it has seen them.

The tag-conditioned CNN predicts per-frame event activity directly. It is
the same convolutional stack with a final score convolution, conditioned
on the clip's (possibly predicted) tag vector by concatenating it to every
time-frequency bin of the input and to the flattened hidden representation
before the first 1-D convolution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import storage
from .nn.layers import (
    BatchNorm1d,
    BatchNorm2d,
    ChannelFlatten,
    Conv1d,
    Conv2d,
    Dense,
    GRU,
    MaxPool2d,
    ReLU,
    Sequential,
    Sigmoid,
    _BatchNorm,
)
from .nn.loss import bce_loss

DEFAULT_CLASSES = (
    "Alarm_bell_ringing",
    "Blender",
    "Cat",
    "Dishes",
    "Dog",
    "Electric_shaver_toothbrush",
    "Frying",
    "Running_water",
    "Speech",
    "Vacuum_cleaner",
)

MODE_FBCRNN = "fbcrnn"
MODE_FWD_FRAME = "fwd_frame"
MODE_FWD_LAST = "fwd_last"
FBCRNN_MODES = (MODE_FBCRNN, MODE_FWD_FRAME, MODE_FWD_LAST)

N_MEL_ROWS = 128


@dataclass(frozen=True)
class ModelDims:
    """Channel widths of the convolutional and recurrent stacks."""

    conv2d_channels: tuple[int, ...] = (16, 32, 64, 128, 256)
    conv1d_channels: int = 256
    rnn_units: int = 256
    fc_units: int = 256

    def __post_init__(self):
        if len(self.conv2d_channels) != 5:
            raise ValueError("expected five conv2d stages")

    @property
    def flat_features(self) -> int:
        # Five 2x1 pools shrink 128 mel rows to 4.
        return self.conv2d_channels[-1] * 4

    def to_dict(self):
        return {
            "conv2d_channels": list(self.conv2d_channels),
            "conv1d_channels": self.conv1d_channels,
            "rnn_units": self.rnn_units,
            "fc_units": self.fc_units,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            conv2d_channels=tuple(d["conv2d_channels"]),
            conv1d_channels=int(d["conv1d_channels"]),
            rnn_units=int(d["rnn_units"]),
            fc_units=int(d["fc_units"]),
        )


def full_dims() -> ModelDims:
    return ModelDims()


def toy_dims() -> ModelDims:
    """Widths divided by 8: the desk-scale preset used by tests and the
    acceptance runs."""
    return ModelDims(conv2d_channels=(2, 4, 8, 16, 32),
                     conv1d_channels=32, rnn_units=32, fc_units=32)


def tiny_dims() -> ModelDims:
    """4-channel CNN with 8-unit GRUs for gradient checks."""
    return ModelDims(conv2d_channels=(4, 4, 4, 4, 4),
                     conv1d_channels=8, rnn_units=8, fc_units=8)


DIM_PRESETS = {"full": full_dims, "toy": toy_dims, "tiny": tiny_dims}


def _conv_stack_2d(in_ch, dims, rng, dtype):
    layers = []
    prev = in_ch
    for stage, ch in enumerate(dims.conv2d_channels):
        n_convs = 2 if stage < 4 else 1
        for _ in range(n_convs):
            layers += [Conv2d(prev, ch, rng, dtype), BatchNorm2d(ch, dtype), ReLU()]
            prev = ch
        layers.append(MaxPool2d())
    layers.append(ChannelFlatten())
    return layers, prev * 4


def _walk(prefix, layer):
    yield prefix, layer
    if isinstance(layer, Sequential):
        for i, sub in enumerate(layer.layers):
            yield from _walk(f"{prefix}.{i}_{type(sub).__name__.lower()}", sub)


class _ModelBase:
    """Shared parameter/buffer bookkeeping for checkpointing."""

    def _register(self, children: dict):
        self._children = children
        self._named_params = {}
        self._named_buffers = {}
        for child_name, child in children.items():
            for path, layer in _walk(child_name, child):
                if isinstance(layer, Sequential):
                    continue
                for attr in ("w", "b", "gamma", "beta", "w_i", "w_h", "b_i", "b_h"):
                    p = getattr(layer, attr, None)
                    if p is not None:
                        p.name = f"{path}.{attr}"
                        self._named_params[p.name] = p
                if isinstance(layer, _BatchNorm):
                    self._named_buffers[path] = layer

    def params(self):
        return list(self._named_params.values())

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = {f"param/{name}": p.value for name, p in self._named_params.items()}
        for path, bn in self._named_buffers.items():
            out[f"buffer/{path}.running_mean"] = bn.running_mean
            out[f"buffer/{path}.running_var"] = bn.running_var
        return out

    def load_named_arrays(self, arrays: dict[str, np.ndarray]):
        for name, p in self._named_params.items():
            key = f"param/{name}"
            if key not in arrays:
                raise ValueError(f"checkpoint is missing {key}")
            value = arrays[key]
            if value.shape != p.value.shape:
                raise ValueError(
                    f"{key}: shape {value.shape} does not match model {p.value.shape}")
            p.value = np.array(value, dtype=p.value.dtype)
            p.grad = np.zeros_like(p.value)
        for path, bn in self._named_buffers.items():
            bn.running_mean = np.array(arrays[f"buffer/{path}.running_mean"],
                                       dtype=bn.running_mean.dtype)
            bn.running_var = np.array(arrays[f"buffer/{path}.running_var"],
                                      dtype=bn.running_var.dtype)


class RnnTagger(Sequential):
    """Recurrent per-frame tagger: 2 stacked GRUs, fc+ReLU, fc+sigmoid."""

    def __init__(self, in_features, n_classes, dims, rng, dtype):
        super().__init__([
            GRU(in_features, dims.rnn_units, rng, dtype),
            GRU(dims.rnn_units, dims.rnn_units, rng, dtype),
            Dense(dims.rnn_units, dims.fc_units, rng, dtype),
            ReLU(),
            Dense(dims.fc_units, n_classes, rng, dtype),
            Sigmoid(),
        ])


class Fbcrnn(_ModelBase):
    KIND = "fbcrnn"

    def __init__(self, classes=DEFAULT_CLASSES, dims: ModelDims | None = None,
                 rng: np.random.Generator | None = None, dtype=np.float32,
                 mode: str = MODE_FBCRNN):
        if mode not in FBCRNN_MODES:
            raise ValueError(f"unknown mode {mode!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        dims = dims or full_dims()
        self.classes = tuple(classes)
        self.dims = dims
        self.mode = mode
        self.dtype = dtype
        layers_2d, flat = _conv_stack_2d(1, dims, rng, dtype)
        layers_1d = []
        prev = flat
        for _ in range(3):
            layers_1d += [Conv1d(prev, dims.conv1d_channels, rng, dtype),
                          BatchNorm1d(dims.conv1d_channels, dtype), ReLU()]
            prev = dims.conv1d_channels
        self.cnn = Sequential(layers_2d + layers_1d)
        self.rnn_fwd = RnnTagger(dims.conv1d_channels, len(self.classes), dims, rng, dtype)
        self.rnn_bwd = RnnTagger(dims.conv1d_channels, len(self.classes), dims, rng, dtype)
        self._register({"cnn": self.cnn, "rnn_fwd": self.rnn_fwd, "rnn_bwd": self.rnn_bwd})

    @property
    def n_classes(self):
        return len(self.classes)

    def meta(self) -> dict:
        return {"kind": self.KIND, "mode": self.mode, "classes": list(self.classes),
                "dims": self.dims.to_dict()}

    def forward(self, x, training=False, with_backward=True):
        """x: (B, 128, N) -> (y_fwd, y_bwd), each (B, K, N).

        The backward classifier consumes the time-flipped encoding and its
        output is flipped back, so column n of both outputs refers to
        frame n. with_backward=False skips the backward branch (used by
        the forward-only ablations) and returns y_bwd as None.
        """
        x = np.asarray(x, dtype=self.dtype)
        h = self.cnn.forward(x[:, None, :, :], training=training)
        y_fwd = self.rnn_fwd.forward(h, training=training)
        y_bwd = None
        if with_backward:
            y_bwd = self.rnn_bwd.forward(h[:, :, ::-1], training=training)[:, :, ::-1]
        self._h_shape = h.shape
        return y_fwd, y_bwd

    def backward(self, dy_fwd, dy_bwd=None):
        dh = self.rnn_fwd.backward(dy_fwd)
        if dy_bwd is not None:
            dh = dh + self.rnn_bwd.backward(dy_bwd[:, :, ::-1])[:, :, ::-1]
        return self.cnn.backward(dh)

    def tag(self, x) -> np.ndarray:
        """Clip-level tag probabilities.

        x: (128, N) or (B, 128, N); returns (K,) or (B, K). For the full
        model this is the mean of the forward prediction at the last frame
        and the backward prediction at the first frame, i.e. both
        classifiers after they processed the whole input; the forward-only
        ablations use the forward prediction at the last frame.
        """
        x = np.asarray(x)
        single = x.ndim == 2
        if single:
            x = x[None]
        if self.mode == MODE_FBCRNN:
            y_fwd, y_bwd = self.forward(x, training=False, with_backward=True)
            out = 0.5 * (y_fwd[:, :, -1] + y_bwd[:, :, 0])
        else:
            y_fwd, _ = self.forward(x, training=False, with_backward=False)
            out = y_fwd[:, :, -1]
        return out[0] if single else out


class TagCnn(_ModelBase):
    KIND = "tagcnn"

    def __init__(self, classes=DEFAULT_CLASSES, dims: ModelDims | None = None,
                 rng: np.random.Generator | None = None, dtype=np.float32,
                 conditioned: bool = True):
        rng = rng if rng is not None else np.random.default_rng(0)
        dims = dims or full_dims()
        self.classes = tuple(classes)
        self.dims = dims
        self.dtype = dtype
        self.conditioned = bool(conditioned)
        k = len(self.classes)
        in_ch = 1 + k if self.conditioned else 1
        layers_2d, flat = _conv_stack_2d(in_ch, dims, rng, dtype)
        self.cnn2d = Sequential(layers_2d)
        prev = flat + (k if self.conditioned else 0)
        layers_1d = []
        for _ in range(3):
            layers_1d += [Conv1d(prev, dims.conv1d_channels, rng, dtype),
                          BatchNorm1d(dims.conv1d_channels, dtype), ReLU()]
            prev = dims.conv1d_channels
        layers_1d += [Conv1d(prev, k, rng, dtype), Sigmoid()]
        self.cnn1d = Sequential(layers_1d)
        self._register({"cnn2d": self.cnn2d, "cnn1d": self.cnn1d})

    @property
    def n_classes(self):
        return len(self.classes)

    def meta(self) -> dict:
        return {"kind": self.KIND, "conditioned": self.conditioned,
                "classes": list(self.classes), "dims": self.dims.to_dict()}

    def forward(self, x, z_tag, training=False):
        """x: (B, 128, N), z_tag: (B, K) -> per-frame scores (B, K, N)."""
        x = np.asarray(x, dtype=self.dtype)
        z = np.asarray(z_tag, dtype=self.dtype)
        b, _, n = x.shape
        inp = x[:, None, :, :]
        if self.conditioned:
            tiles = np.broadcast_to(z[:, :, None, None], (b, self.n_classes, N_MEL_ROWS, n))
            inp = np.concatenate([inp, tiles], axis=1)
        hidden = self.cnn2d.forward(inp, training=training)
        if self.conditioned:
            tiles1d = np.broadcast_to(z[:, :, None], (b, self.n_classes, n))
            hidden = np.concatenate([hidden, tiles1d], axis=1)
        self._flat = self.dims.flat_features
        return self.cnn1d.forward(hidden, training=training)

    def backward(self, dy):
        dh = self.cnn1d.backward(dy)
        if self.conditioned:
            dh = dh[:, :self._flat, :]
        dx = self.cnn2d.backward(dh)
        return dx[:, 0, :, :]


def build_model(meta: dict, rng=None, dtype=np.float32):
    dims = ModelDims.from_dict(meta["dims"])
    classes = tuple(meta["classes"])
    if meta["kind"] == Fbcrnn.KIND:
        return Fbcrnn(classes, dims, rng, dtype, mode=meta.get("mode", MODE_FBCRNN))
    if meta["kind"] == TagCnn.KIND:
        return TagCnn(classes, dims, rng, dtype, conditioned=meta.get("conditioned", True))
    raise ValueError(f"unknown model kind {meta['kind']!r}")


def fbcrnn_forward(model: Fbcrnn, x) -> tuple[np.ndarray, np.ndarray]:
    """Forward and backward per-frame tag probabilities for (128, N) input
    (or a (B, 128, N) batch), in eval mode, both aligned to absolute frames."""
    x = np.asarray(x)
    single = x.ndim == 2
    if single:
        x = x[None]
    y_fwd, y_bwd = model.forward(x, training=False, with_backward=True)
    if single:
        return y_fwd[0], y_bwd[0]
    return y_fwd, y_bwd


def fbcrnn_tag(model: Fbcrnn, x) -> np.ndarray:
    return model.tag(x)


def tagcnn_forward(model: TagCnn, x, z_tag) -> np.ndarray:
    """Per-frame detection scores (K, N) for (128, N) input, eval mode."""
    x = np.asarray(x)
    single = x.ndim == 2
    if single:
        x = x[None]
        z_tag = np.asarray(z_tag)[None]
    y = model.forward(x, z_tag, training=False)
    return y[0] if single else y


def fbcrnn_frame_loss(y_fwd, y_bwd, z_tag):
    """Max-combined per-frame tagging loss.

    y_fwd/y_bwd: (B, K, N) probabilities; z_tag: (B, K) multi-hot. The
    per-frame prediction is the point-wise max of the two branches; the
    loss is the per-frame BCE summed over classes and averaged over frames
    and batch. Returns (loss, dy_fwd, dy_bwd); at ties the gradient is
    routed to the forward branch.
    """
    y_fwd = np.asarray(y_fwd)
    y_bwd = np.asarray(y_bwd)
    z = np.asarray(z_tag)
    if y_fwd.shape != y_bwd.shape:
        raise ValueError("branch outputs must have identical shapes")
    b, k, n = y_fwd.shape
    y_tag = np.maximum(y_fwd, y_bwd)
    targets = np.broadcast_to(z[:, :, None], y_tag.shape)
    loss, dy = bce_loss(y_tag, targets)
    scale = 1.0 / (b * n)
    fwd_wins = y_fwd >= y_bwd
    dy_fwd = np.where(fwd_wins, dy, 0.0) * scale
    dy_bwd = np.where(fwd_wins, 0.0, dy) * scale
    return loss * scale, dy_fwd.astype(y_fwd.dtype), dy_bwd.astype(y_bwd.dtype)


def fbcrnn_training_loss(y_fwd, y_bwd, z_tag, mode: str):
    """Loss and output gradients for the training mode.

    fbcrnn: max-combined per-frame loss; fwd_frame: per-frame BCE on the
    forward branch only; fwd_last: BCE on the forward branch's last frame
    only. dy_bwd is None for the forward-only modes.
    """
    y_fwd = np.asarray(y_fwd)
    z = np.asarray(z_tag)
    b, k, n = y_fwd.shape
    if mode == MODE_FBCRNN:
        return fbcrnn_frame_loss(y_fwd, y_bwd, z)
    if mode == MODE_FWD_FRAME:
        targets = np.broadcast_to(z[:, :, None], y_fwd.shape)
        loss, dy = bce_loss(y_fwd, targets)
        scale = 1.0 / (b * n)
        return loss * scale, (dy * scale).astype(y_fwd.dtype), None
    if mode == MODE_FWD_LAST:
        loss, dlast = bce_loss(y_fwd[:, :, -1], z)
        scale = 1.0 / b
        dy = np.zeros_like(y_fwd)
        dy[:, :, -1] = dlast * scale
        return loss * scale, dy, None
    raise ValueError(f"unknown mode {mode!r}")


def tagcnn_frame_loss(y_sed, z_sed):
    """Frame-wise BCE between (B, K, N) scores and strong frame targets,
    summed over classes, averaged over all frames in the mini-batch."""
    y = np.asarray(y_sed)
    z = np.asarray(z_sed)
    b, k, n = y.shape
    loss, dy = bce_loss(y, z)
    scale = 1.0 / (b * n)
    return loss * scale, (dy * scale).astype(y.dtype)


def ensemble_average(outputs) -> np.ndarray:
    """Element-wise arithmetic mean of same-shape score arrays."""
    outputs = [np.asarray(o) for o in outputs]
    if not outputs:
        raise ValueError("ensemble needs at least one member")
    shape = outputs[0].shape
    for o in outputs[1:]:
        if o.shape != shape:
            raise ValueError(f"shape mismatch: {o.shape} vs {shape}")
    return np.mean(np.stack(outputs, axis=0), axis=0)


def config_hash_of(meta: dict) -> str:
    import hashlib

    return hashlib.sha256(json.dumps(meta, sort_keys=True).encode()).hexdigest()[:16]


def save_checkpoint(path, model, optimizer=None, step: int = 0,
                    rng_state: dict | None = None, config_hash: str = "",
                    extra_meta: dict | None = None) -> None:
    """Write parameters, optimizer state, step counter and RNG state.

    The header embeds the model kind, class list and config hash; loading
    against a different model or config is an error.
    """
    arrays = dict(model.named_arrays())
    meta = {
        "format": "fbsed-checkpoint-1",
        "model": model.meta(),
        "step": int(step),
        "rng_state": rng_state or {},
        "config_hash": config_hash,
    }
    if extra_meta:
        meta.update(extra_meta)
    if optimizer is not None:
        arrays.update(optimizer.state_arrays())
        meta["optimizer"] = {"step_count": optimizer.step_count,
                             "beta1": optimizer.beta1, "beta2": optimizer.beta2,
                             "eps": optimizer.eps, "clip_norm": optimizer.clip_norm}
    storage.save_bundle(path, arrays, meta)


def load_checkpoint(path, expected_config_hash: str | None = None,
                    dtype=np.float32):
    """Rebuild the model stored at path; returns (model, arrays, meta)."""
    arrays, meta = storage.load_bundle(path)
    if meta.get("format") != "fbsed-checkpoint-1":
        raise ValueError(f"{path}: not a checkpoint file")
    if expected_config_hash is not None and meta["config_hash"] != expected_config_hash:
        raise ValueError(
            f"{path}: config hash {meta['config_hash']} does not match "
            f"expected {expected_config_hash}")
    model = build_model(meta["model"], rng=np.random.default_rng(0), dtype=dtype)
    model.load_named_arrays(arrays)
    return model, arrays, meta
