"""Minimal differentiable-computation core on numpy.

Exactly the layer set the models need (kernel-3 stride-1 convolutions,
batch norm, ReLU, 2x1 max pooling, GRU, per-frame dense layers, sigmoid,
channel flattening) with hand-written reverse-mode gradients, binary
cross entropy, and Adam with gradient clipping and the ramp/decay
learning-rate schedule.
"""

from .layers import (
    Parameter,
    Layer,
    Sequential,
    Conv2d,
    Conv1d,
    BatchNorm2d,
    BatchNorm1d,
    ReLU,
    Sigmoid,
    MaxPool2d,
    ChannelFlatten,
    Dense,
    GRU,
)
from .loss import bce_loss
from .optim import (
    Adam,
    NonFiniteGradientError,
    learning_rate,
    CLIP_NORM,
    LR_PEAK,
    LR_RAMP_STEPS,
    LR_DECAY_STEP,
    LR_FLOOR,
)

__all__ = [
    "Parameter", "Layer", "Sequential", "Conv2d", "Conv1d", "BatchNorm2d",
    "BatchNorm1d", "ReLU", "Sigmoid", "MaxPool2d", "ChannelFlatten", "Dense",
    "GRU", "bce_loss", "Adam", "NonFiniteGradientError", "learning_rate",
    "CLIP_NORM", "LR_PEAK", "LR_RAMP_STEPS", "LR_DECAY_STEP", "LR_FLOOR",
]
