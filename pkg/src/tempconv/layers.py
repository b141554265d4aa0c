"""Stateful layers on top of the functional ops.

``Module`` auto-registers parameters (``Tensor`` attributes) and child
modules in definition order, which fixes the iteration order used for
initialization, checkpoints, and optimizer updates. Every layer also knows
its output shape and multiply-accumulate cost for a single unbatched input,
so analytic audits never have to run data through the network.

MAC convention: one unit per multiply-accumulate inside convolutions and
affine maps. Bias adds, normalization, activations, and other elementwise
work are excluded.
"""
from __future__ import annotations

import math
from collections import OrderedDict

import numpy as np

from . import ops
from .errors import FormatError, ShapeError
from .ops import ConvSpec
from .tensor import Tensor


class Module:
    """Base class: parameter/submodule registry, train/eval mode, casting."""

    def __init__(self):
        object.__setattr__(self, "_params", OrderedDict())
        object.__setattr__(self, "_buffers", OrderedDict())
        object.__setattr__(self, "_modules", OrderedDict())
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        params = self.__dict__.get("_params")
        if params is None:
            # plain attributes may precede __init__; tracked values may not
            if isinstance(value, (Tensor, Module)):
                raise TypeError(
                    "Module.__init__ must run before assigning parameters or submodules"
                )
            object.__setattr__(self, name, value)
            return
        for registry in (self._params, self._buffers, self._modules):
            registry.pop(name, None)
        if isinstance(value, Tensor):
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name, array):
        """Track a non-learnable array (e.g. running statistics)."""
        self._buffers[name] = array
        object.__setattr__(self, name, array)

    # -- registry walks ----------------------------------------------------

    def named_parameters(self, prefix=""):
        for name, p in self._params.items():
            yield prefix + name, p
        for name, m in self._modules.items():
            yield from m.named_parameters(prefix + name + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix=""):
        for name, b in self._buffers.items():
            yield prefix + name, b
        for name, m in self._modules.items():
            yield from m.named_buffers(prefix + name + ".")

    def modules(self):
        yield self
        for m in self._modules.values():
            yield from m.modules()

    def param_count(self):
        return sum(p.size for p in self.parameters())

    # -- mode and dtype ----------------------------------------------------

    def train(self, mode=True):
        object.__setattr__(self, "training", mode)
        for m in self._modules.values():
            m.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def astype(self, dtype):
        """Cast parameters and buffers in place; tensor identity is kept."""
        for m in self.modules():
            m._cast(np.dtype(dtype))
        return self

    def _cast(self, dtype):
        for p in self._params.values():
            p.data = p.data.astype(dtype)
            p.grad = None
        for name in list(self._buffers):
            self.register_buffer(name, self._buffers[name].astype(dtype))

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    # -- init and state ----------------------------------------------------

    def init_parameters(self, rng):
        """Deterministically (re)initialize every layer in definition order."""
        for m in self.modules():
            m.reset_parameters(rng)
        return self

    def reset_parameters(self, rng):
        pass

    def state_dict(self):
        state = OrderedDict((k, v.data.copy()) for k, v in self.named_parameters())
        for k, v in self.named_buffers():
            state[k] = v.copy()
        return state

    def load_state_dict(self, state):
        own = OrderedDict(self.named_parameters())
        bufs = OrderedDict(self.named_buffers())
        expected = set(own) | set(bufs)
        got = set(state)
        if expected != got:
            missing = sorted(expected - got)[:4]
            extra = sorted(got - expected)[:4]
            raise FormatError(f"state mismatch; missing {missing}, unexpected {extra}")
        for k, p in own.items():
            arr = np.asarray(state[k])
            if arr.shape != p.shape:
                raise ShapeError(f"state entry '{k}' has shape {arr.shape}, expected {tuple(p.shape)}")
            p.data = arr.astype(p.dtype, copy=True)
            p.grad = None
        for k in bufs:
            arr = np.asarray(state[k])
            if arr.shape != bufs[k].shape:
                raise ShapeError(f"state entry '{k}' has shape {arr.shape}, expected {bufs[k].shape}")
            bufs[k][...] = arr

    # -- forward and audit -------------------------------------------------

    def forward(self, x):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def output_shape(self, in_shape):
        raise NotImplementedError

    def macs(self, in_shape):
        """Multiply-accumulates for one unbatched input of ``in_shape``."""
        raise NotImplementedError


def _uniform_fill(rng, tensor, bound):
    tensor.data[...] = rng.uniform(-bound, bound, size=tensor.shape).astype(tensor.dtype)


class Conv(Module):
    """Convolution of rank 1..3 driven by a :class:`ConvSpec`."""

    def __init__(self, spec, bias=True):
        super().__init__()
        self.spec = spec
        wshape = (spec.out_channels, spec.in_channels // spec.groups) + spec.kernel
        self.weight = Tensor(np.zeros(wshape, dtype=np.float32), requires_grad=True)
        self.bias = Tensor(np.zeros(spec.out_channels, dtype=np.float32), requires_grad=True) if bias else None

    def reset_parameters(self, rng):
        fan_in = (self.spec.in_channels // self.spec.groups) * math.prod(self.spec.kernel)
        bound = 1.0 / math.sqrt(fan_in)
        _uniform_fill(rng, self.weight, bound)
        if self.bias is not None:
            _uniform_fill(rng, self.bias, bound)

    def forward(self, x):
        return ops.conv(x, self.weight, self.bias, self.spec)

    def output_shape(self, in_shape):
        spatial = in_shape[1:]
        if in_shape[0] != self.spec.in_channels:
            raise ShapeError(f"expected {self.spec.in_channels} channels, got shape {in_shape}")
        return (self.spec.out_channels,) + self.spec.out_sizes(spatial)

    def macs(self, in_shape):
        out = self.output_shape(in_shape)
        per_position = (self.spec.in_channels // self.spec.groups) * math.prod(self.spec.kernel)
        return math.prod(out) * per_position


def Conv1d(in_channels, out_channels, kernel, dilation=1, groups=1,
           causal=False, padding=None, bias=True):
    spec = ConvSpec(in_channels, out_channels, (kernel,), dilation=(dilation,),
                    groups=groups, causal=causal,
                    padding=None if padding is None else (padding,))
    return Conv(spec, bias=bias)


def Conv2d(in_channels, out_channels, kernel, stride=1, padding=None, groups=1, bias=True):
    spec = ConvSpec(in_channels, out_channels, _pair(kernel, 2), stride=_pair(stride, 2),
                    padding=padding if padding is None else _pair(padding, 2), groups=groups)
    return Conv(spec, bias=bias)


def Conv3d(in_channels, out_channels, kernel, stride=1, padding=None, groups=1, bias=True):
    spec = ConvSpec(in_channels, out_channels, _pair(kernel, 3), stride=_pair(stride, 3),
                    padding=padding if padding is None else _pair(padding, 3), groups=groups)
    return Conv(spec, bias=bias)


def _pair(v, rank):
    return (v,) * rank if isinstance(v, int) else tuple(v)


class BatchNorm(Module):
    """Batch normalization over channel axis 1 of a batched input."""

    def __init__(self, channels, eps=1e-5, momentum=0.1):
        super().__init__()
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = Tensor(np.ones(channels, dtype=np.float32), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=np.float32), requires_grad=True)
        self.register_buffer("running_mean", np.zeros(channels, dtype=np.float32))
        self.register_buffer("running_var", np.ones(channels, dtype=np.float32))

    def reset_parameters(self, rng):
        self.gamma.data[...] = 1.0
        self.beta.data[...] = 0.0
        self.running_mean[...] = 0.0
        self.running_var[...] = 1.0

    def forward(self, x):
        return ops.batch_norm(x, self.gamma, self.beta, self.running_mean,
                              self.running_var, eps=self.eps,
                              momentum=self.momentum, training=self.training)

    def output_shape(self, in_shape):
        return in_shape

    def macs(self, in_shape):
        return 0


class ReLU(Module):
    def forward(self, x):
        return ops.relu(x)

    def output_shape(self, in_shape):
        return in_shape

    def macs(self, in_shape):
        return 0


class ReLU6(Module):
    def forward(self, x):
        return ops.relu6(x)

    def output_shape(self, in_shape):
        return in_shape

    def macs(self, in_shape):
        return 0


class Dropout(Module):
    """Inverted dropout with a private, reseedable generator."""

    def __init__(self, p):
        super().__init__()
        if not 0.0 <= p < 1.0:
            raise ShapeError(f"dropout rate must lie in [0, 1), got {p}")
        self.p = p
        object.__setattr__(self, "_rng", np.random.default_rng(0))

    def reset_parameters(self, rng):
        # draw a child seed so dropout streams are part of the init seed
        self.reseed(int(rng.integers(0, 2**63 - 1)))

    def reseed(self, seed):
        object.__setattr__(self, "_rng", np.random.default_rng(seed))

    def forward(self, x):
        return ops.dropout(x, self.p, self._rng, self.training)

    def output_shape(self, in_shape):
        return in_shape

    def macs(self, in_shape):
        return 0


class Linear(Module):
    def __init__(self, in_features, out_features, bias=True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Tensor(np.zeros((out_features, in_features), dtype=np.float32),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(out_features, dtype=np.float32), requires_grad=True) if bias else None

    def reset_parameters(self, rng):
        bound = 1.0 / math.sqrt(self.in_features)
        _uniform_fill(rng, self.weight, bound)
        if self.bias is not None:
            _uniform_fill(rng, self.bias, bound)

    def forward(self, x):
        return ops.linear(x, self.weight, self.bias)

    def output_shape(self, in_shape):
        if in_shape[-1] != self.in_features:
            raise ShapeError(f"expected last dim {self.in_features}, got shape {in_shape}")
        return in_shape[:-1] + (self.out_features,)

    def macs(self, in_shape):
        lead = math.prod(in_shape[:-1]) if len(in_shape) > 1 else 1
        return lead * self.in_features * self.out_features


class Identity(Module):
    def forward(self, x):
        return x

    def output_shape(self, in_shape):
        return in_shape

    def macs(self, in_shape):
        return 0


class Sequential(Module):
    def __init__(self, *layers):
        super().__init__()
        for layer in layers:
            self.append(layer)

    def append(self, layer):
        self._modules[str(len(self._modules))] = layer
        return self

    def __iter__(self):
        return iter(self._modules.values())

    def __len__(self):
        return len(self._modules)

    def __getitem__(self, i):
        return list(self._modules.values())[i]

    def forward(self, x):
        for layer in self:
            x = layer(x)
        return x

    def output_shape(self, in_shape):
        for layer in self:
            in_shape = layer.output_shape(in_shape)
        return in_shape

    def macs(self, in_shape):
        total = 0
        for layer in self:
            total += layer.macs(in_shape)
            in_shape = layer.output_shape(in_shape)
        return total
