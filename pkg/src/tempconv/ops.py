"""Differentiable array operations: convolution, normalization, elementwise.

All ops take and return :class:`~tempconv.tensor.Tensor` and register a
backward rule on the active :class:`~tempconv.tensor.GradTape`, if any.
Convolution is one generic implementation covering 1-D/2-D/3-D by kernel
rank, with stride, dilation, groups, and either symmetric zero padding or
causal left padding (1-D only, output length equals input length).

Layout convention: channels-first, with an optional leading batch axis.
An input of rank ``len(kernel) + 1`` is treated as a single unbatched sample.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NumericError, ShapeError
from .tensor import Tensor, apply_op

_OUT_AXES = "xyz"
_KER_AXES = "uvw"


def _tuplify(value, rank, name):
    if isinstance(value, int):
        return (value,) * rank
    value = tuple(int(v) for v in value)
    if len(value) != rank:
        raise ShapeError(f"{name} must have {rank} entries, got {value}")
    return value


@dataclass(frozen=True)
class ConvSpec:
    """Static description of a convolution: shapes, strides, padding mode.

    ``causal=True`` selects causal left padding of exactly ``(k-1)*dilation``
    zeros and is only valid for rank-1 (temporal) convolution with stride 1.
    Otherwise symmetric zero padding is used; ``padding=None`` defaults to
    the size-preserving ``((k-1)*d)//2`` per axis.
    """

    in_channels: int
    out_channels: int
    kernel: tuple
    stride: tuple = None
    dilation: tuple = None
    groups: int = 1
    causal: bool = False
    padding: tuple = None

    def __post_init__(self):
        kernel = tuple(int(k) for k in (self.kernel if not isinstance(self.kernel, int) else (self.kernel,)))
        rank = len(kernel)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "stride", _tuplify(self.stride if self.stride is not None else 1, rank, "stride"))
        object.__setattr__(self, "dilation", _tuplify(self.dilation if self.dilation is not None else 1, rank, "dilation"))
        if self.in_channels < 1 or self.out_channels < 1:
            raise ShapeError("channel counts must be positive")
        if any(k < 1 for k in kernel) or any(s < 1 for s in self.stride) or any(d < 1 for d in self.dilation):
            raise ShapeError("kernel, stride and dilation entries must be positive")
        if self.groups < 1 or self.in_channels % self.groups or self.out_channels % self.groups:
            raise ShapeError(
                f"groups={self.groups} must divide in_channels={self.in_channels} "
                f"and out_channels={self.out_channels}"
            )
        if self.causal:
            if rank != 1:
                raise ShapeError("causal padding is only defined for 1-D convolution")
            if self.stride != (1,):
                raise ShapeError("causal convolution requires stride 1")
            object.__setattr__(self, "padding", None)
        elif self.padding is None:
            object.__setattr__(
                self, "padding", tuple((k - 1) * d // 2 for k, d in zip(kernel, self.dilation))
            )
        else:
            object.__setattr__(self, "padding", _tuplify(self.padding, rank, "padding"))

    @property
    def rank(self):
        return len(self.kernel)

    def pad_pairs(self):
        if self.causal:
            return (((self.kernel[0] - 1) * self.dilation[0], 0),)
        return tuple((p, p) for p in self.padding)

    def out_sizes(self, in_sizes):
        """Spatial/temporal output sizes by the standard convolution arithmetic."""
        sizes = []
        for s, k, st, d, (pl, pr) in zip(in_sizes, self.kernel, self.stride, self.dilation, self.pad_pairs()):
            eff = (k - 1) * d + 1
            padded = s + pl + pr
            if padded < eff:
                raise ShapeError(f"input size {s} too small for kernel {k} with dilation {d}")
            sizes.append((padded - eff) // st + 1)
        return tuple(sizes)


def _dilated_patches(xp, spec, out_sizes):
    """View of all receptive-field patches: (N, C, *out, *kernel)."""
    rank = spec.rank
    eff = tuple((k - 1) * d + 1 for k, d in zip(spec.kernel, spec.dilation))
    win = sliding_window_view(xp, eff, axis=tuple(range(2, 2 + rank)))
    index = (slice(None), slice(None))
    index += tuple(slice(None, None, s) for s in spec.stride)
    index += tuple(slice(None, None, d) for d in spec.dilation)
    patches = win[index]
    assert patches.shape[2 : 2 + rank] == out_sizes
    return patches


def _conv_input_grad(gout, w, spec, padded_shape):
    """Scatter the output gradient back through each kernel tap."""
    rank = spec.rank
    groups = spec.groups
    n = gout.shape[0]
    out_sizes = gout.shape[2:]
    og = spec.out_channels // groups
    cg = spec.in_channels // groups
    gout_g = gout.reshape(n, groups, og, *out_sizes)
    wg = w.reshape(groups, og, cg, *spec.kernel)
    sub = _OUT_AXES[:rank]
    eq = f"ngo{sub},goc->ngc{sub}"
    gx_pad = np.zeros(padded_shape, dtype=gout.dtype)
    gx_view = gx_pad.reshape(n, groups, cg, *padded_shape[2:])
    for tap in np.ndindex(*spec.kernel):
        w_tap = wg[(slice(None), slice(None), slice(None)) + tap]
        contrib = np.einsum(eq, gout_g, w_tap, optimize=True)
        index = (slice(None), slice(None), slice(None))
        index += tuple(
            slice(t * d, t * d + st * (o - 1) + 1, st)
            for t, d, st, o in zip(tap, spec.dilation, spec.stride, out_sizes)
        )
        gx_view[index] += contrib
    return gx_pad


def conv(x, weight, bias=None, spec=None):
    """Grouped, strided, dilated convolution of rank 1..3.

    ``x``: (C_in, *S) or (N, C_in, *S); ``weight``: (C_out, C_in/groups, *k);
    ``bias``: (C_out,) or None. Causal mode preserves the temporal length
    exactly and uses only past context.
    """
    if spec is None:
        raise ShapeError("conv requires a ConvSpec")
    rank = spec.rank
    if x.ndim == rank + 1:
        batched = False
        xb = x.data[None]
    elif x.ndim == rank + 2:
        batched = True
        xb = x.data
    else:
        raise ShapeError(f"conv rank {rank} expects input of rank {rank + 1} or {rank + 2}, got {x.ndim}")
    if xb.shape[1] != spec.in_channels:
        raise ShapeError(f"input has {xb.shape[1]} channels, spec expects {spec.in_channels}")
    wshape = (spec.out_channels, spec.in_channels // spec.groups) + spec.kernel
    if weight.shape != wshape:
        raise ShapeError(f"weight shape {tuple(weight.shape)} does not match {wshape}")
    if bias is not None and bias.shape != (spec.out_channels,):
        raise ShapeError(f"bias shape {tuple(bias.shape)} does not match ({spec.out_channels},)")

    out_sizes = spec.out_sizes(xb.shape[2:])
    pad = ((0, 0), (0, 0)) + spec.pad_pairs()
    xp = np.pad(xb, pad) if any(p != (0, 0) for p in spec.pad_pairs()) else xb

    n = xb.shape[0]
    groups = spec.groups
    og = spec.out_channels // groups
    cg = spec.in_channels // groups
    sub_out = _OUT_AXES[:rank]
    sub_k = _KER_AXES[:rank]

    patches = _dilated_patches(xp, spec, out_sizes)
    patches_g = patches.reshape(n, groups, cg, *out_sizes, *spec.kernel)
    wg = weight.data.reshape(groups, og, cg, *spec.kernel)
    y = np.einsum(
        f"ngc{sub_out}{sub_k},goc{sub_k}->ngo{sub_out}", patches_g, wg, optimize=True
    ).reshape(n, spec.out_channels, *out_sizes)
    if bias is not None:
        y = y + bias.data.reshape((1, -1) + (1,) * rank)
    out_data = y if batched else y[0]

    inputs = (x, weight) if bias is None else (x, weight, bias)

    def make_backward():
        padded_shape = xp.shape
        pad_pairs = spec.pad_pairs()

        def bwd(up):
            upb = up if batched else up[None]
            gx = gw = gb = None
            if x.requires_grad:
                gxp = _conv_input_grad(upb, weight.data, spec, padded_shape)
                index = (slice(None), slice(None)) + tuple(
                    slice(pl, gxp.shape[2 + i] - pr) for i, (pl, pr) in enumerate(pad_pairs)
                )
                gx = gxp[index]
                if not batched:
                    gx = gx[0]
            if weight.requires_grad:
                up_g = upb.reshape(n, groups, og, *out_sizes)
                gw = np.einsum(
                    f"ngc{sub_out}{sub_k},ngo{sub_out}->goc{sub_k}",
                    patches_g, up_g, optimize=True,
                ).reshape(wshape)
            if bias is not None and bias.requires_grad:
                gb = upb.sum(axis=(0,) + tuple(range(2, 2 + rank)))
            if bias is None:
                return gx, gw
            return gx, gw, gb

        return bwd

    return apply_op("conv", inputs, out_data, make_backward)


def batch_norm(x, gamma, beta, running_mean, running_var, eps=1e-5,
               momentum=0.1, training=False):
    """Per-channel batch normalization over a batched (N, C, *S) input.

    Training mode normalizes with batch statistics and updates the running
    arrays in place (plain ndarrays, not tensors); inference mode uses the
    running statistics. ``gamma``/``beta`` are the affine parameters.
    """
    if x.ndim < 2:
        raise ShapeError("batch_norm expects a batched (N, C, ...) input")
    c = x.shape[1]
    for name, p in (("gamma", gamma), ("beta", beta)):
        if p.shape != (c,):
            raise ShapeError(f"{name} length {p.shape} does not match {c} channels")
    if running_mean.shape != (c,) or running_var.shape != (c,):
        raise ShapeError("running statistics length does not match channel count")

    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, c) + (1,) * (x.ndim - 2)
    m = x.size // c

    if training:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        unbias = m / (m - 1) if m > 1 else 1.0
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * unbias
    else:
        mu = running_mean.astype(x.dtype)
        var = running_var.astype(x.dtype)
    denom = var + eps
    if np.any(denom <= 0):
        raise NumericError("batch_norm variance estimate is non-positive after eps")
    inv = 1.0 / np.sqrt(denom)
    xhat = (x.data - mu.reshape(bshape)) * inv.reshape(bshape)
    y = gamma.data.reshape(bshape) * xhat + beta.data.reshape(bshape)

    def make_backward():
        def bwd(up):
            gg = (up * xhat).sum(axis=axes) if gamma.requires_grad else None
            gb = up.sum(axis=axes) if beta.requires_grad else None
            gx = None
            if x.requires_grad:
                scale = (gamma.data * inv).reshape(bshape)
                if training:
                    mean_up = up.mean(axis=axes).reshape(bshape)
                    mean_up_xhat = (up * xhat).mean(axis=axes).reshape(bshape)
                    gx = scale * (up - mean_up - xhat * mean_up_xhat)
                else:
                    gx = scale * up
            return gx, gg, gb

        return bwd

    return apply_op("batch_norm", (x, gamma, beta), y, make_backward)


def relu(x):
    def make_backward():
        mask = x.data > 0

        def bwd(up):
            return (up * mask,)

        return bwd

    return apply_op("relu", (x,), np.maximum(x.data, 0), make_backward)


def relu6(x):
    def make_backward():
        mask = (x.data > 0) & (x.data < 6)

        def bwd(up):
            return (up * mask,)

        return bwd

    return apply_op("relu6", (x,), np.clip(x.data, 0, 6), make_backward)


def activation(x, kind):
    if kind == "relu":
        return relu(x)
    if kind == "relu6":
        return relu6(x)
    raise ShapeError(f"unknown activation kind '{kind}'")


def hadamard(a, b):
    """Elementwise product of two equal-shaped tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"hadamard shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")

    def make_backward():
        def bwd(up):
            ga = up * b.data if a.requires_grad else None
            gb = up * a.data if b.requires_grad else None
            return ga, gb

        return bwd

    return apply_op("hadamard", (a, b), a.data * b.data, make_backward)


def add(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"add shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")

    def make_backward():
        def bwd(up):
            return (up if a.requires_grad else None, up if b.requires_grad else None)

        return bwd

    return apply_op("add", (a, b), a.data + b.data, make_backward)


def concat(tensors, axis):
    tensors = list(tensors)
    ref = tensors[0].shape
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(
            i != axis and a != b for i, (a, b) in enumerate(zip(t.shape, ref))
        ):
            raise ShapeError("concat inputs differ on a non-concatenated axis")
    sizes = [t.shape[axis] for t in tensors]

    def make_backward():
        def bwd(up):
            grads = []
            start = 0
            for t, s in zip(tensors, sizes):
                index = tuple(
                    slice(start, start + s) if i == axis else slice(None)
                    for i in range(len(ref))
                )
                grads.append(up[index] if t.requires_grad else None)
                start += s
            return tuple(grads)

        return bwd

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return apply_op("concat", tuple(tensors), data, make_backward)


def narrow(x, axis, start, stop):
    """Contiguous slice along one axis."""
    if not (0 <= start < stop <= x.shape[axis]):
        raise ShapeError(f"invalid slice [{start}:{stop}] for axis of size {x.shape[axis]}")
    index = tuple(slice(start, stop) if i == axis else slice(None) for i in range(x.ndim))

    def make_backward():
        def bwd(up):
            g = np.zeros_like(x.data)
            g[index] = up
            return (g,)

        return bwd

    return apply_op("narrow", (x,), x.data[index].copy(), make_backward)


def chunk(x, parts, axis):
    """Split into ``parts`` equal pieces along ``axis``; inverse of concat."""
    size = x.shape[axis]
    if size % parts:
        raise ShapeError(f"axis size {size} not divisible into {parts} parts")
    step = size // parts
    return [narrow(x, axis, i * step, (i + 1) * step) for i in range(parts)]


def global_average_pool(x, axes, valid_len=None):
    """Mean over ``axes``; with ``valid_len``, only the leading valid positions
    of the single reduced axis contribute (per sample when batched)."""
    axes = (axes,) if isinstance(axes, int) else tuple(axes)
    if any(a < 0 or a >= x.ndim for a in axes):
        raise ShapeError(f"axes {axes} out of range for rank {x.ndim}")
    if valid_len is None:
        count = 1
        for a in axes:
            count *= x.shape[a]

        def make_backward():
            def bwd(up):
                return (np.broadcast_to(np.expand_dims(up, axes) / count, x.shape).copy(),)

            return bwd

        return apply_op("mean", (x,), x.data.mean(axis=axes), make_backward)

    if len(axes) != 1:
        raise ShapeError("valid_len masking applies to exactly one axis")
    axis = axes[0]
    t = x.shape[axis]
    lens = np.asarray(valid_len, dtype=np.int64)
    if np.any(lens <= 0) or np.any(lens > t):
        raise ShapeError(f"valid lengths must lie in 1..{t}, got {lens}")
    # mask broadcast over the reduced axis, per batch entry when lens is a vector
    pos = np.arange(t).reshape((1,) * axis + (t,) + (1,) * (x.ndim - axis - 1))
    lshape = ((-1,) + (1,) * (x.ndim - 1)) if lens.ndim else lens.shape
    mask = (pos < lens.reshape(lshape)).astype(x.dtype)
    denom = np.broadcast_to(lens.reshape(lshape).astype(x.dtype), mask.shape)
    weights = mask / denom
    data = (x.data * weights).sum(axis=axis)

    def make_backward():
        def bwd(up):
            return (np.expand_dims(up, axis) * weights,)

        return bwd

    return apply_op("masked_mean", (x,), data, make_backward)


def linear(x, weight, bias=None):
    """Affine map on the last axis: y = x W^T + b, weight (out, in)."""
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(
            f"linear input dim {x.shape[-1]} does not match weight in-dim {weight.shape[1]}"
        )
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeError("bias length does not match weight out-dim")
    y = x.data @ weight.data.T
    if bias is not None:
        y = y + bias.data
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def make_backward():
        def bwd(up):
            gx = up @ weight.data if x.requires_grad else None
            gw = None
            if weight.requires_grad:
                up2 = up.reshape(-1, weight.shape[0])
                x2 = x.data.reshape(-1, weight.shape[1])
                gw = up2.T @ x2
            gb = None
            if bias is not None and bias.requires_grad:
                gb = up.reshape(-1, weight.shape[0]).sum(axis=0)
            if bias is None:
                return gx, gw
            return gx, gw, gb

        return bwd

    return apply_op("linear", inputs, y, make_backward)


def softmax(x, axis=-1):
    """Numerically stable softmax along ``axis`` (max-subtracted)."""
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def make_backward():
        def bwd(up):
            dot = (up * s).sum(axis=axis, keepdims=True)
            return (s * (up - dot),)

        return bwd

    return apply_op("softmax", (x,), s, make_backward)


def cross_entropy(logits, targets):
    """Mean soft-target cross entropy over the batch; stable log-softmax form.

    ``logits``: (N, K); ``targets``: (N, K) rows that sum to 1 (one-hot or
    mixed). Returns a scalar tensor.
    """
    if logits.ndim != 2 or logits.shape != targets.shape:
        raise ShapeError(
            f"cross_entropy expects matching (N, K), got {tuple(logits.shape)} and {tuple(targets.shape)}"
        )
    n = logits.shape[0]
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    loss = -(targets.data * logp).sum() / n

    def make_backward():
        def bwd(up):
            gl = None
            if logits.requires_grad:
                p = np.exp(logp)
                gl = up * (p - targets.data) / n
            gt = (-up * logp / n) if targets.requires_grad else None
            return gl, gt

        return bwd

    return apply_op("cross_entropy", (logits, targets), loss, make_backward)


def dropout(x, p, rng, training):
    """Inverted dropout: scales kept units by 1/(1-p) during training only."""
    if not training or p == 0.0:
        return x
    if not 0.0 <= p < 1.0:
        raise ShapeError(f"dropout rate must lie in [0, 1), got {p}")
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)

    def make_backward():
        def bwd(up):
            return (up * keep,)

        return bwd

    return apply_op("dropout", (x,), x.data * keep, make_backward)


def reshape(x, shape):
    def make_backward():
        def bwd(up):
            return (up.reshape(x.shape),)

        return bwd

    return apply_op("reshape", (x,), x.data.reshape(shape), make_backward)


def moveaxis(x, src, dst):
    def make_backward():
        def bwd(up):
            return (np.moveaxis(up, dst, src),)

        return bwd

    return apply_op("moveaxis", (x,), np.moveaxis(x.data, src, dst).copy(), make_backward)


def tensor_sum(x):
    def make_backward():
        def bwd(up):
            return (np.broadcast_to(up, x.shape).copy(),)

        return bwd

    return apply_op("sum", (x,), x.data.sum(), make_backward)


def tensor_mean(x):
    def make_backward():
        def bwd(up):
            return (np.broadcast_to(up / x.size, x.shape).copy(),)

        return bwd

    return apply_op("mean", (x,), x.data.mean(), make_backward)
