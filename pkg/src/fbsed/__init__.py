"""Weakly-labeled sound event detection toolkit.

Feature extraction, waveform/spectrogram augmentation, a small numpy
neural-network core, forward-backward CRNN tagging, tag-conditioned CNN
detection, decoding, evaluation metrics, pseudo-labeling and a CLI that
binds everything into reproducible experiment steps.
"""

__version__ = "0.1.0"
