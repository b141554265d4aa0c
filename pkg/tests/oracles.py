"""Independent reference implementations used to verify the package.

Everything here is deliberately slow and obvious: nested loops, direct
formulas, no shared code with the library under test beyond numpy.
"""
from __future__ import annotations

import math

import numpy as np


def conv_oracle(x, w, b=None, stride=None, dilation=None, padding=None, groups=1):
    """Direct nested-loop N-D convolution (cross-correlation).

    x: (N, C, *spatial)   w: (O, C//groups, *kernel)   b: (O,) or None
    stride / dilation / padding: per-dim tuples (padding is symmetric
    unless given as explicit (lo, hi) pairs).
    Returns (N, O, *out_spatial) in float64.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    rank = x.ndim - 2
    kernel = w.shape[2:]
    stride = tuple(stride) if stride is not None else (1,) * rank
    dilation = tuple(dilation) if dilation is not None else (1,) * rank
    if padding is None:
        padding = (0,) * rank
    pairs = []
    for p in padding:
        pairs.append(tuple(p) if isinstance(p, (tuple, list)) else (int(p), int(p)))
    xp = np.pad(x, [(0, 0), (0, 0)] + [list(p) for p in pairs])

    n, c = x.shape[:2]
    o = w.shape[0]
    cg = c // groups
    og = o // groups
    out_spatial = []
    for i in range(rank):
        span = (kernel[i] - 1) * dilation[i] + 1
        out_spatial.append((xp.shape[2 + i] - span) // stride[i] + 1)
    out = np.zeros((n, o) + tuple(out_spatial))

    for ni in range(n):
        for oi in range(o):
            g = oi // og
            for pos in np.ndindex(*out_spatial):
                acc = 0.0
                for ci in range(cg):
                    for tap in np.ndindex(*kernel):
                        idx = tuple(pos[i] * stride[i] + tap[i] * dilation[i]
                                    for i in range(rank))
                        acc += (xp[(ni, g * cg + ci) + idx]
                                * w[(oi, ci) + tap])
                out[(ni, oi) + pos] = acc
    if b is not None:
        out += np.asarray(b, dtype=np.float64).reshape((1, o) + (1,) * rank)
    return out


def causal_conv1d_oracle(x, w, b=None, dilation=1):
    """Causal 1-D convolution: left-pad (k-1)*dilation zeros, stride 1."""
    k = w.shape[-1]
    return conv_oracle(x, w, b, stride=(1,), dilation=(dilation,),
                       padding=(((k - 1) * dilation, 0),))


def numeric_grad(fn, arrays, h=1e-5):
    """Central-difference gradient of scalar fn(*arrays) w.r.t. each array.

    Independent of the library's own finite-difference checker: plain
    two-point stencil over every coordinate, all in float64.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    grads = []
    for i, a in enumerate(arrays):
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gf = g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = fn(*arrays)
            flat[j] = orig - h
            dn = fn(*arrays)
            flat[j] = orig
            gf[j] = (up - dn) / (2.0 * h)
        grads.append(g)
    return grads


def cosine_rate_oracle(base, epoch, total):
    """Half-cosine annealing computed straight from the formula."""
    return base * 0.5 * (1.0 + math.cos(math.pi * epoch / total))


def batchnorm_oracle(x, gamma, beta, axis_keep=1, eps=1e-5):
    """Normalize over every axis except ``axis_keep`` using batch stats."""
    x = np.asarray(x, dtype=np.float64)
    axes = tuple(i for i in range(x.ndim) if i != axis_keep)
    mean = x.mean(axis=axes, keepdims=True)
    var = x.var(axis=axes, keepdims=True)
    shape = [1] * x.ndim
    shape[axis_keep] = x.shape[axis_keep]
    g = np.asarray(gamma, dtype=np.float64).reshape(shape)
    b = np.asarray(beta, dtype=np.float64).reshape(shape)
    return g * (x - mean) / np.sqrt(var + eps) + b


def template_predict(dataset, split, index):
    """Classify one toy sample by correlating frames against class motifs.

    Uses only the dataset's published motif bank and raw arrays — none of
    the model stack. With zero noise this recovers the label exactly.
    """
    seq, _label = dataset.sample(split, index)
    frames = seq[0] if seq.ndim == 4 else seq  # (T, H, W)
    motifs = dataset.motifs  # (classes, H, W)
    # score every class by its best frame correlation
    flat_m = motifs.reshape(motifs.shape[0], -1).astype(np.float64)
    flat_f = frames.reshape(frames.shape[0], -1).astype(np.float64)
    scores = flat_f @ flat_m.T  # (T, classes)
    return int(np.argmax(scores.max(axis=0)))
