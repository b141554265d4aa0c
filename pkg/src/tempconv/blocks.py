"""Temporal block zoo: interchangeable [C, T] -> [C, T] causal units.

Every block is residual (input added to the body output) and ends in
dropout. All temporal convolutions are causal with the block's dilation,
so a block never reads future frames. Convolutions directly followed by a
norm carry no bias; the plain two-conv block keeps its biases so that its
closed-form parameter count 2*(k*C^2 + C) + 4*C holds exactly.

Closed-form parameter counts (k = conv kernel, K = depthwise kernel of the
star family, E = expanded width, M = internal width of the compact
bottleneck) are exported in ``PARAM_FORMS`` and unit-tested against the
generic registry counter.
"""
from __future__ import annotations

from . import ops
from .errors import ConfigError, ShapeError
from .layers import BatchNorm, Conv1d, Dropout, Module, ReLU, Sequential

BLOCK_KINDS = (
    "baseline", "linear", "fusedmb", "invertedresidual", "cib", "uib",
    "starv", "stari", "starii", "stariii", "stariv",
)
EXPERIMENTAL_KINDS = ("stari", "starii", "stariii", "stariv")

_ALIASES = {
    "baselinetcn": "baseline",
    "invres": "invertedresidual",
    "inverted_residual": "invertedresidual",
    "star": "starv",
    "star-v": "starv",
}

DEFAULT_EXPANSION = {
    "fusedmb": 3.5,
    "invertedresidual": 2.0,
    "cib": 2.0,
    "uib": 4.0,
    "starv": 4.0,
    "stari": 4.0,
    "starii": 4.0,
    "stariii": 4.0,
    "stariv": 4.0,
}

STAR_DW_KERNEL = 7


def canonical_kind(name):
    key = str(name).strip().lower().replace(" ", "")
    key = _ALIASES.get(key, key)
    if key not in BLOCK_KINDS:
        raise ConfigError(f"unknown block kind '{name}'; choose from {', '.join(BLOCK_KINDS)}")
    return key


def expanded_width(channels, expansion):
    e = int(round(expansion * channels))
    if e < 1 or abs(e - expansion * channels) > 1e-9:
        raise ConfigError(f"expansion {expansion} does not give a whole width at {channels} channels")
    return e


class TemporalBlock(Module):
    """Residual + dropout wrapper; subclasses provide the body."""

    kind = None

    def __init__(self, channels, dilation, dropout=0.2):
        super().__init__()
        self.channels = channels
        self.dilation = dilation
        self.drop = Dropout(dropout)

    def forward(self, x):
        if x.ndim == 2:
            h = ops.reshape(x, (1,) + tuple(x.shape))
            y = self.drop(ops.add(self._body(h), h))
            return ops.reshape(y, tuple(x.shape))
        y = self._body(x)
        return self.drop(ops.add(y, x))

    def _body(self, x):
        raise NotImplementedError

    def output_shape(self, in_shape):
        if in_shape[0] != self.channels:
            raise ShapeError(f"block expects {self.channels} channels, got shape {in_shape}")
        return in_shape

    def rf_taps(self):
        """(kernel, dilation) of every temporal conv, for receptive-field sums."""
        raise NotImplementedError


class _SequentialBlock(TemporalBlock):
    """Body is a plain layer stack."""

    def __init__(self, channels, dilation, dropout=0.2):
        super().__init__(channels, dilation, dropout)
        self.body = Sequential(*self._build())

    def _build(self):
        raise NotImplementedError

    def _body(self, x):
        return self.body(x)

    def macs(self, in_shape):
        self.output_shape(in_shape)
        return self.body.macs(in_shape)

    def rf_taps(self):
        return [(m.spec.kernel[0], m.spec.dilation[0])
                for m in self.body if hasattr(m, "spec") and m.spec.kernel[0] > 1]


class BaselineBlock(_SequentialBlock):
    """Two full causal convolutions, each followed by norm and relu."""

    kind = "baseline"

    def __init__(self, channels, dilation, kernel=3, dropout=0.2):
        self.kernel = kernel
        super().__init__(channels, dilation, dropout)

    def _build(self):
        c, d, k = self.channels, self.dilation, self.kernel
        return [
            Conv1d(c, c, k, dilation=d, causal=True, bias=True), BatchNorm(c), ReLU(),
            Conv1d(c, c, k, dilation=d, causal=True, bias=True), BatchNorm(c), ReLU(),
        ]


class LinearBlock(_SequentialBlock):
    """Depthwise, pointwise, depthwise; norms only, no activation."""

    kind = "linear"

    def __init__(self, channels, dilation, kernel=3, dropout=0.2):
        self.kernel = kernel
        super().__init__(channels, dilation, dropout)

    def _build(self):
        c, d, k = self.channels, self.dilation, self.kernel
        return [
            Conv1d(c, c, k, dilation=d, groups=c, causal=True, bias=False), BatchNorm(c),
            Conv1d(c, c, 1, causal=True, bias=False), BatchNorm(c),
            Conv1d(c, c, k, dilation=d, groups=c, causal=True, bias=False), BatchNorm(c),
        ]


class FusedMBBlock(_SequentialBlock):
    """Full conv expands the width, pointwise projects back."""

    kind = "fusedmb"

    def __init__(self, channels, dilation, expansion=3.5, kernel=3, dropout=0.2):
        self.kernel = kernel
        self.expansion = expansion
        self.width = expanded_width(channels, expansion)
        super().__init__(channels, dilation, dropout)

    def _build(self):
        c, d, k, e = self.channels, self.dilation, self.kernel, self.width
        return [
            Conv1d(c, e, k, dilation=d, causal=True, bias=False), BatchNorm(e), ReLU(),
            Conv1d(e, c, 1, causal=True, bias=False), BatchNorm(c),
        ]


class InvertedResidualBlock(_SequentialBlock):
    """Pointwise expand, depthwise, pointwise project."""

    kind = "invertedresidual"

    def __init__(self, channels, dilation, expansion=2.0, kernel=3, dropout=0.2):
        self.kernel = kernel
        self.expansion = expansion
        self.width = expanded_width(channels, expansion)
        super().__init__(channels, dilation, dropout)

    def _build(self):
        c, d, k, e = self.channels, self.dilation, self.kernel, self.width
        return [
            Conv1d(c, e, 1, causal=True, bias=False), BatchNorm(e), ReLU(),
            Conv1d(e, e, k, dilation=d, groups=e, causal=True, bias=False), BatchNorm(e), ReLU(),
            Conv1d(e, c, 1, causal=True, bias=False), BatchNorm(c),
        ]


class CIBBlock(_SequentialBlock):
    """Compact inverted bottleneck: dw / pw-expand / dw / pw-project / dw."""

    kind = "cib"

    def __init__(self, channels, dilation, expansion=2.0, kernel=3, dropout=0.2):
        self.kernel = kernel
        self.expansion = expansion
        self.width = expanded_width(channels, expansion)
        super().__init__(channels, dilation, dropout)

    def _build(self):
        c, d, k, m = self.channels, self.dilation, self.kernel, self.width
        return [
            Conv1d(c, c, k, dilation=d, groups=c, causal=True, bias=False), BatchNorm(c),
            Conv1d(c, m, 1, causal=True, bias=False), BatchNorm(m),
            Conv1d(m, m, k, dilation=d, groups=m, causal=True, bias=False), BatchNorm(m),
            Conv1d(m, c, 1, causal=True, bias=False), BatchNorm(c),
            Conv1d(c, c, k, dilation=d, groups=c, causal=True, bias=False), BatchNorm(c),
        ]


class UIBBlock(_SequentialBlock):
    """Extra-depthwise universal bottleneck: dw / pw-expand / dw / pw-project."""

    kind = "uib"

    def __init__(self, channels, dilation, expansion=4.0, kernel=3, dropout=0.2):
        self.kernel = kernel
        self.expansion = expansion
        self.width = expanded_width(channels, expansion)
        super().__init__(channels, dilation, dropout)

    def _build(self):
        c, d, k, e = self.channels, self.dilation, self.kernel, self.width
        return [
            Conv1d(c, c, k, dilation=d, groups=c, causal=True, bias=False), BatchNorm(c),
            Conv1d(c, e, 1, causal=True, bias=False), BatchNorm(e), ReLU(),
            Conv1d(e, e, k, dilation=d, groups=e, causal=True, bias=False), BatchNorm(e),
            Conv1d(e, c, 1, causal=True, bias=False), BatchNorm(c),
        ]


class StarBlock(TemporalBlock):
    """Multiplicative mixing: two pointwise branches joined elementwise.

    Body: dw(K) + norm -> branches x1, x2 (pointwise C->E, biased) ->
    relu6(x1) * x2 -> pointwise E->C + norm -> dw(K, biased). The variant
    tagged "iii" inserts one extra pointwise E->E after the product; the
    other experimental tags share this exact structure.
    """

    kind = "starv"

    def __init__(self, channels, dilation, expansion=4.0, dw_kernel=STAR_DW_KERNEL,
                 dropout=0.2, extra_pw=False):
        super().__init__(channels, dilation, dropout)
        self.expansion = expansion
        self.dw_kernel = dw_kernel
        self.width = expanded_width(channels, expansion)
        c, d, kk, e = channels, dilation, dw_kernel, self.width
        self.dw_in = Conv1d(c, c, kk, dilation=d, groups=c, causal=True, bias=False)
        self.bn_in = BatchNorm(c)
        self.branch1 = Conv1d(c, e, 1, causal=True, bias=True)
        self.branch2 = Conv1d(c, e, 1, causal=True, bias=True)
        self.mid = None
        if extra_pw:
            self.mid = Conv1d(e, e, 1, causal=True, bias=False)
            self.bn_mid = BatchNorm(e)
        self.project = Conv1d(e, c, 1, causal=True, bias=False)
        self.bn_out = BatchNorm(c)
        self.dw_out = Conv1d(c, c, kk, dilation=d, groups=c, causal=True, bias=True)

    def _body(self, x):
        h = self.bn_in(self.dw_in(x))
        mixed = ops.hadamard(ops.relu6(self.branch1(h)), self.branch2(h))
        if self.mid is not None:
            mixed = self.bn_mid(self.mid(mixed))
        return self.dw_out(self.bn_out(self.project(mixed)))

    def macs(self, in_shape):
        self.output_shape(in_shape)
        e_shape = (self.width,) + in_shape[1:]
        total = self.dw_in.macs(in_shape)
        total += self.branch1.macs(in_shape) + self.branch2.macs(in_shape)
        if self.mid is not None:
            total += self.mid.macs(e_shape)
        total += self.project.macs(e_shape) + self.dw_out.macs(in_shape)
        return total

    def rf_taps(self):
        return [(self.dw_kernel, self.dilation), (self.dw_kernel, self.dilation)]


class StarIBlock(StarBlock):
    kind = "stari"


class StarIIBlock(StarBlock):
    kind = "starii"


class StarIIIBlock(StarBlock):
    kind = "stariii"

    def __init__(self, channels, dilation, expansion=4.0, dw_kernel=STAR_DW_KERNEL, dropout=0.2):
        super().__init__(channels, dilation, expansion, dw_kernel, dropout, extra_pw=True)


class StarIVBlock(StarBlock):
    kind = "stariv"


_CLASSES = {
    "baseline": BaselineBlock,
    "linear": LinearBlock,
    "fusedmb": FusedMBBlock,
    "invertedresidual": InvertedResidualBlock,
    "cib": CIBBlock,
    "uib": UIBBlock,
    "starv": StarBlock,
    "stari": StarIBlock,
    "starii": StarIIBlock,
    "stariii": StarIIIBlock,
    "stariv": StarIVBlock,
}

_STAR_FAMILY = ("starv",) + EXPERIMENTAL_KINDS


def make_block(kind, channels, dilation, expansion=None, kernel=3,
               dw_kernel=STAR_DW_KERNEL, dropout=0.2, experimental=False):
    """Construct one temporal block; experimental kinds need the flag."""
    kind = canonical_kind(kind)
    if kind in EXPERIMENTAL_KINDS and not experimental:
        raise ConfigError(
            f"block kind '{kind}' is experimental; pass experimental=True "
            "(CLI/config: experimental = true) to use it"
        )
    cls = _CLASSES[kind]
    if kind == "baseline":
        return cls(channels, dilation, kernel=kernel, dropout=dropout)
    if kind == "linear":
        return cls(channels, dilation, kernel=kernel, dropout=dropout)
    e = DEFAULT_EXPANSION[kind] if expansion is None else expansion
    if kind in _STAR_FAMILY:
        return cls(channels, dilation, expansion=e, dw_kernel=dw_kernel, dropout=dropout)
    return cls(channels, dilation, expansion=e, kernel=kernel, dropout=dropout)


# Closed-form parameter counts, one per kind. E/M widths are rounded the
# same way the constructors round them.
def _e(c, e):
    return int(round(e * c))


PARAM_FORMS = {
    "baseline": lambda c, e=None, k=3, K=None: 2 * (k * c * c + c) + 4 * c,
    "linear": lambda c, e=None, k=3, K=None: c * c + (2 * k + 6) * c,
    "fusedmb": lambda c, e=3.5, k=3, K=None: (k + 1) * c * _e(c, e) + 2 * _e(c, e) + 2 * c,
    "invertedresidual": lambda c, e=2.0, k=3, K=None: 2 * c * _e(c, e) + (k + 4) * _e(c, e) + 2 * c,
    "cib": lambda c, e=2.0, k=3, K=None: 2 * c * _e(c, e) + (k + 4) * _e(c, e) + (2 * k + 6) * c,
    "uib": lambda c, e=4.0, k=3, K=None: 2 * c * _e(c, e) + (k + 4) * _e(c, e) + (k + 4) * c,
    "starv": lambda c, e=4.0, k=3, K=7: 3 * c * _e(c, e) + 2 * _e(c, e) + (2 * K + 5) * c,
    "stariii": lambda c, e=4.0, k=3, K=7: (
        3 * c * _e(c, e) + 2 * _e(c, e) + (2 * K + 5) * c + _e(c, e) ** 2 + 2 * _e(c, e)
    ),
}
PARAM_FORMS["stari"] = PARAM_FORMS["starv"]
PARAM_FORMS["starii"] = PARAM_FORMS["starv"]
PARAM_FORMS["stariv"] = PARAM_FORMS["starv"]


def block_param_form(kind, channels, expansion=None, kernel=3, dw_kernel=STAR_DW_KERNEL):
    kind = canonical_kind(kind)
    e = DEFAULT_EXPANSION.get(kind) if expansion is None else expansion
    return PARAM_FORMS[kind](channels, e, kernel, dw_kernel)
