"""Data augmentation on raw (C, T, H, W) arrays, pre-tensor.

Training: random spatial crop, horizontal flip with p=0.5, and a random
contiguous sub-sequence (the retained length becomes the sample's valid
length; the tail is zero-padded so batches stay rectangular). Evaluation:
deterministic center crop, full length. All randomness comes from the
caller's generator, drawn in a fixed order.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError, ShapeError


def horizontal_flip(frames):
    """Mirror the width axis; applying it twice restores the input."""
    return frames[..., ::-1].copy()


def random_crop(frames, size, rng):
    h, w = frames.shape[-2:]
    if size > h or size > w:
        raise ShapeError(f"crop {size} larger than frame {h}x{w}")
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    return frames[..., top:top + size, left:left + size].copy()


def center_crop(frames, size):
    h, w = frames.shape[-2:]
    if size > h or size > w:
        raise ShapeError(f"crop {size} larger than frame {h}x{w}")
    top = (h - size) // 2
    left = (w - size) // 2
    return frames[..., top:top + size, left:left + size].copy()


def variable_length(seq, rng, t_min=None):
    """Keep a random contiguous window, right-pad with zeros.

    Returns (padded sequence of the original length, valid length k) with
    k drawn uniformly from {t_min .. T}; t_min defaults to ceil(T/2).
    """
    t = seq.shape[1]
    if t_min is None:
        t_min = (t + 1) // 2
    if not 1 <= t_min <= t:
        raise ShapeError(f"t_min {t_min} out of range for length {t}")
    k = int(rng.integers(t_min, t + 1))
    start = int(rng.integers(0, t - k + 1))
    out = np.zeros_like(seq)
    out[:, :k] = seq[:, start:start + k]
    return out, k


def augment(seq, rng, train_mode, crop_size, flip=True, crop=True, varlen=True):
    """Full per-sample pipeline; returns (augmented sequence, valid_len)."""
    if train_mode:
        if crop:
            seq = random_crop(seq, crop_size, rng)
        if flip and rng.random() < 0.5:
            seq = horizontal_flip(seq)
        if varlen:
            return variable_length(seq, rng)
        return seq, seq.shape[1]
    if crop:
        seq = center_crop(seq, crop_size)
    return seq, seq.shape[1]


def mixup(batch_a, batch_b, labels_a, labels_b, alpha=0.4, rng=None):
    """Convex pairwise combination with one Beta(alpha, alpha) weight per pair.

    Labels must already be dense (one-hot or soft); the same weight mixes
    a sample and its label row.
    """
    if alpha <= 0:
        raise ConfigError(f"mixup alpha must be positive, got {alpha}")
    if batch_a.shape != batch_b.shape or labels_a.shape != labels_b.shape:
        raise ShapeError("mixup inputs must have matching shapes")
    if rng is None:
        raise ConfigError("mixup needs an explicit random generator")
    n = batch_a.shape[0]
    lam = rng.beta(alpha, alpha, size=n).astype(batch_a.dtype)
    lx = lam.reshape((n,) + (1,) * (batch_a.ndim - 1))
    ly = lam.reshape((n,) + (1,) * (labels_a.ndim - 1))
    mixed_x = lx * batch_a + (1.0 - lx) * batch_b
    mixed_y = ly * labels_a + (1.0 - ly) * labels_b
    return mixed_x, mixed_y, lam
