"""Visual frontend: 3-D stem, per-frame feature extractor, classifier head.

The stem mixes a short temporal window (kernel 3, stride 1) while halving
both spatial axes; no pooling follows it. The extractor then processes
each frame independently (it never mixes time): frames are folded into the
batch axis, run through 2-D stages, spatially pooled, and unfolded back to
a [D, T] feature sequence. Any module with the same mapping and an
``out_dim`` attribute can replace the reference extractor.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import ops
from .errors import ShapeError
from .layers import BatchNorm, Conv2d, Conv3d, Linear, Module, ReLU, Sequential


@dataclass(frozen=True)
class StemSpec:
    out_channels: int = 32
    kernel: tuple = (3, 5, 5)
    stride: tuple = (1, 2, 2)
    padding: tuple = (1, 2, 2)

    def __post_init__(self):
        if self.stride[0] != 1 or self.padding[0] * 2 != self.kernel[0] - 1:
            raise ShapeError("stem must preserve temporal length (stride 1, symmetric padding)")


class Stem(Module):
    """conv3d -> norm -> relu over (C, T, H, W); keeps T, halves H and W."""

    def __init__(self, spec=None, in_channels=1):
        super().__init__()
        self.spec = spec if spec is not None else StemSpec()
        self.in_channels = in_channels
        self.conv = Conv3d(in_channels, self.spec.out_channels, self.spec.kernel,
                           stride=self.spec.stride, padding=self.spec.padding, bias=True)
        self.bn = BatchNorm(self.spec.out_channels)
        self.act = ReLU()

    def _check(self, shape):
        c, t, h, w = shape
        if c != self.in_channels:
            raise ShapeError(f"stem expects {self.in_channels} input channels, got {c}")
        if t < self.spec.kernel[0]:
            raise ShapeError(f"need at least {self.spec.kernel[0]} frames, got {t}")
        if h % 2 or w % 2:
            raise ShapeError(f"spatial size must be even, got {h}x{w}")

    def forward(self, x):
        squeeze = x.ndim == 4
        self._check(tuple(x.shape[-4:]))
        h = ops.reshape(x, (1,) + tuple(x.shape)) if squeeze else x
        y = self.act(self.bn(self.conv(h)))
        return ops.reshape(y, tuple(y.shape[1:])) if squeeze else y

    def output_shape(self, in_shape):
        self._check(in_shape)
        return self.conv.output_shape(in_shape)

    def macs(self, in_shape):
        return self.conv.macs(in_shape)


@dataclass(frozen=True)
class ExtractorSpec:
    """Reference extractor layout: one downsampling stage per width."""

    in_channels: int = 32
    stage_widths: tuple = (64, 128, 256, 512)
    blocks_per_stage: int = 1
    expansion: float = 4.0

    def __post_init__(self):
        if not self.stage_widths:
            raise ShapeError("extractor needs at least one stage")
        if self.blocks_per_stage < 1:
            raise ShapeError("blocks_per_stage must be at least 1")

    @property
    def out_dim(self):
        return self.stage_widths[-1]


class _SpatialBottleneck(Module):
    """2-D inverted bottleneck; residual only when shape-preserving."""

    def __init__(self, cin, cout, stride, expansion):
        super().__init__()
        e = int(round(cin * expansion))
        self.residual = stride == 1 and cin == cout
        self.body = Sequential(
            Conv2d(cin, e, 1, bias=False), BatchNorm(e), ReLU(),
            Conv2d(e, e, 3, stride=stride, groups=e, bias=False), BatchNorm(e), ReLU(),
            Conv2d(e, cout, 1, bias=False), BatchNorm(cout),
        )

    def forward(self, x):
        y = self.body(x)
        return ops.add(y, x) if self.residual else y

    def output_shape(self, in_shape):
        return self.body.output_shape(in_shape)

    def macs(self, in_shape):
        return self.body.macs(in_shape)


class ReferenceExtractor(Module):
    """Stack of stride-2 2-D stages applied per frame, then spatial mean.

    In training mode the norm statistics are batch-wide, so exact frame
    independence holds in eval mode (the mode every extractor contract
    test uses).
    """

    def __init__(self, spec=None):
        super().__init__()
        self.spec = spec if spec is not None else ExtractorSpec()
        self.out_dim = self.spec.out_dim
        stages = []
        cin = self.spec.in_channels
        for width in self.spec.stage_widths:
            stages.append(_SpatialBottleneck(cin, width, 2, self.spec.expansion))
            for _ in range(self.spec.blocks_per_stage - 1):
                stages.append(_SpatialBottleneck(width, width, 1, self.spec.expansion))
            cin = width
        self.stages = Sequential(*stages)

    def _check_spatial(self, h, w):
        size = min(h, w)
        for i in range(len(self.spec.stage_widths) - 1):
            size = (size + 2 - 3) // 2 + 1
            if size <= 1:
                raise ShapeError(
                    f"spatial input {h}x{w} collapses before the final stage "
                    f"(stage {i + 1} of {len(self.spec.stage_widths)})"
                )

    def forward(self, x):
        squeeze = x.ndim == 4
        if squeeze:
            x = ops.reshape(x, (1,) + tuple(x.shape))
        n, c, t, h, w = x.shape
        self._check_spatial(h, w)
        frames = ops.reshape(ops.moveaxis(x, 2, 1), (n * t, c, h, w))
        feats = self.stages(frames)
        pooled = ops.global_average_pool(feats, axes=(2, 3))
        seq = ops.moveaxis(ops.reshape(pooled, (n, t, self.out_dim)), 1, 2)
        return ops.reshape(seq, (self.out_dim, t)) if squeeze else seq

    def output_shape(self, in_shape):
        c, t, h, w = in_shape
        self._check_spatial(h, w)
        self.stages.output_shape((c, h, w))
        return (self.out_dim, t)

    def macs(self, in_shape):
        c, t, h, w = in_shape
        return t * self.stages.macs((c, h, w))


class ClassifierHead(Module):
    """Masked temporal mean pool, then an affine map to class logits."""

    def __init__(self, in_dim, num_classes):
        super().__init__()
        self.in_dim = in_dim
        self.num_classes = num_classes
        self.fc = Linear(in_dim, num_classes, bias=True)

    def forward(self, x, valid_len=None):
        """x: (C, T) or (N, C, T); returns logits (num_classes,) or (N, num_classes)."""
        squeeze = x.ndim == 2
        h = ops.reshape(x, (1,) + tuple(x.shape)) if squeeze else x
        pooled = ops.global_average_pool(
            h, axes=(2,), valid_len=valid_len if valid_len is not None else h.shape[2]
        )
        logits = self.fc(pooled)
        return ops.reshape(logits, (self.num_classes,)) if squeeze else logits

    def predict_proba(self, x, valid_len=None):
        return ops.softmax(self.forward(x, valid_len), axis=-1)

    def output_shape(self, in_shape):
        return (self.num_classes,)

    def macs(self, in_shape):
        return self.in_dim * self.num_classes
