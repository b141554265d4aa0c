"""Assemble configured networks and compute their structural properties.

Pipeline: stem -> per-frame extractor -> (projection when widths differ)
-> dilated causal temporal stack -> masked-pool classifier. A config with
the frontend disabled builds the temporal stack alone, consuming [C, T]
feature sequences directly; that mode is what the complexity audit uses
for the column that excludes the frontend.
"""
from __future__ import annotations

import math

import numpy as np

from . import ops
from .blocks import DEFAULT_EXPANSION, canonical_kind, make_block, block_param_form
from .config import ModelConfig, config_hash, config_to_dict
from .errors import ConfigError, ShapeError
from .frontend import ClassifierHead, ReferenceExtractor, Stem
from .layers import Conv1d, Module, Sequential

BUILD_VERSION = "0.1.0"

# refuse configs whose parameter total would not fit in desk-scale memory
PARAM_BUDGET_CAP = 1_000_000_000

# temporal taps per block body: how many convs with kernel > 1 each kind has
_TAPS_PER_BLOCK = {
    "baseline": 2, "linear": 2, "fusedmb": 1, "invertedresidual": 1,
    "cib": 3, "uib": 2,
    "starv": 2, "stari": 2, "starii": 2, "stariii": 2, "stariv": 2,
}
_STAR_FAMILY = ("starv", "stari", "starii", "stariii", "stariv")


class TCN(Module):
    """Stack of temporal blocks with dilation doubled at every stage.

    Stage widths may differ; a biased pointwise transition is inserted at
    each boundary where they do.
    """

    def __init__(self, cfg, experimental=False):
        super().__init__()
        self.cfg = cfg
        items = []
        prev = cfg.channels[0]
        for i, width in enumerate(cfg.channels):
            if i > 0 and width != prev:
                items.append(Conv1d(prev, width, 1, causal=True, bias=True))
            items.append(make_block(
                cfg.block_kind, width, 2 ** i, expansion=cfg.expansion,
                kernel=cfg.kernel, dw_kernel=cfg.dw_kernel,
                dropout=cfg.dropout, experimental=experimental,
            ))
            prev = width
        self.body = Sequential(*items)

    @property
    def in_channels(self):
        return self.cfg.channels[0]

    @property
    def out_channels(self):
        return self.cfg.channels[-1]

    def forward(self, x):
        return self.body(x)

    def output_shape(self, in_shape):
        return self.body.output_shape(in_shape)

    def macs(self, in_shape):
        return self.body.macs(in_shape)

    def rf_taps(self):
        taps = []
        for layer in self.body:
            if hasattr(layer, "rf_taps"):
                taps.extend(layer.rf_taps())
        return taps


class Model(Module):
    """The end-to-end network; also usable frontend-less on [C, T] input."""

    def __init__(self, config):
        super().__init__()
        self.config = config
        self.config_hash = config_hash(config)
        self.build_version = BUILD_VERSION
        tcn_cfg = config.tcn
        if config.extractor is not None:
            self.stem = Stem(config.stem, in_channels=config.in_channels)
            self.extractor = ReferenceExtractor(config.extractor)
            if self.extractor.out_dim != tcn_cfg.channels[0]:
                self.projection = Conv1d(self.extractor.out_dim, tcn_cfg.channels[0],
                                         1, causal=True, bias=True)
            else:
                self.projection = None
        else:
            self.stem = None
            self.extractor = None
            self.projection = None
        self.tcn = TCN(tcn_cfg, experimental=config.experimental)
        self.head = ClassifierHead(tcn_cfg.channels[-1], config.classifier.num_classes)

    @property
    def has_frontend(self):
        return self.extractor is not None

    def features(self, x):
        """Everything before the classifier; returns a [*, C, T] sequence."""
        if self.has_frontend:
            x = self.extractor(self.stem(x))
            if self.projection is not None:
                if x.ndim == 2:
                    x = ops.reshape(self.projection(ops.reshape(x, (1,) + tuple(x.shape))),
                                    (self.tcn.in_channels, x.shape[-1]))
                else:
                    x = self.projection(x)
        return self.tcn(x)

    def forward(self, x, valid_len=None):
        expect = 4 if self.has_frontend else 2
        if x.ndim not in (expect, expect + 1):
            raise ShapeError(
                f"model expects rank {expect} (single) or {expect + 1} (batched) input, "
                f"got rank {x.ndim}"
            )
        return self.head(self.features(x), valid_len=valid_len)

    def predict_proba(self, x, valid_len=None):
        return ops.softmax(self.forward(x, valid_len=valid_len), axis=-1)

    def input_shape(self, frames=29, size=88):
        if self.has_frontend:
            return (self.config.in_channels, frames, size, size)
        return (self.tcn.in_channels, frames)


def predict_param_count(config):
    """Closed-form parameter total for a config, without building it."""
    tcn = config.tcn
    total = 0
    prev = tcn.channels[0]
    for width in tcn.channels:
        total += block_param_form(tcn.block_kind, width, tcn.expansion,
                                  tcn.kernel, tcn.dw_kernel)
        if width != prev:
            total += prev * width + width
        prev = width
    if config.extractor is not None:
        stem = config.stem
        total += config.in_channels * stem.out_channels * math.prod(stem.kernel)
        total += stem.out_channels + 2 * stem.out_channels
        cin = config.extractor.in_channels
        e_ratio = config.extractor.expansion
        for width in config.extractor.stage_widths:
            chain = [(cin, width)] + [(width, width)] * (config.extractor.blocks_per_stage - 1)
            for a, b in chain:
                e = int(round(a * e_ratio))
                total += a * e + 2 * e + 9 * e + 2 * e + e * b + 2 * b
            cin = width
        d = config.extractor.stage_widths[-1]
        if d != tcn.channels[0]:
            total += d * tcn.channels[0] + tcn.channels[0]
    total += tcn.channels[-1] * config.classifier.num_classes + config.classifier.num_classes
    return total


def build_model(config, seed=0, init=True):
    """Construct the network; parameters are a pure function of the seed."""
    if not isinstance(config, ModelConfig):
        raise ConfigError("build_model expects a parsed ModelConfig")
    predicted = predict_param_count(config)
    if predicted > PARAM_BUDGET_CAP:
        raise ConfigError(
            f"config implies {predicted:,} parameters, over the "
            f"{PARAM_BUDGET_CAP:,} budget cap"
        )
    model = Model(config)
    if init:
        model.init_parameters(np.random.default_rng(seed))
    actual = model.param_count()
    assert actual == predicted, f"closed-form {predicted} vs built {actual}"
    return model


def receptive_field(config):
    """Frames of input influencing one output frame.

    1 + sum over blocks of (kernel - 1) * dilation per temporal conv;
    the stem widens it by 2 more when the frontend is present.
    """
    tcn = config.tcn
    kind = canonical_kind(tcn.block_kind)
    taps = _TAPS_PER_BLOCK[kind]
    k = tcn.dw_kernel if kind in _STAR_FAMILY else tcn.kernel
    rf = 1
    for i in range(tcn.stages):
        rf += taps * (k - 1) * (2 ** i)
    if config.extractor is not None:
        rf += 2
    return rf


def _fmt(n):
    return f"{n:,}"


def describe(model):
    """Stable human-readable summary; embeds the full config verbatim."""
    config = model.config
    lines = []
    lines.append(f"temporal network summary (build {model.build_version})")
    lines.append(f"config hash: {model.config_hash}")
    lines.append("")
    lines.append("configuration:")
    for section, body in config_to_dict(config).items():
        lines.append(f"  [{section}]")
        for key, value in body.items():
            lines.append(f"    {key} = {value}")
    lines.append("")
    lines.append("modules:")
    tcn = config.tcn
    if model.has_frontend:
        stem = model.stem
        lines.append(
            f"  stem        conv3d {config.in_channels}->{stem.spec.out_channels} "
            f"k{stem.spec.kernel} s{stem.spec.stride}  "
            f"params {_fmt(stem.param_count())}"
        )
        ext = model.extractor
        lines.append(
            f"  extractor   {len(ext.spec.stage_widths)} stage(s) widths {ext.spec.stage_widths}  "
            f"params {_fmt(ext.param_count())}"
        )
        if model.projection is not None:
            lines.append(
                f"  projection  pw {model.extractor.out_dim}->{model.tcn.in_channels}  "
                f"params {_fmt(model.projection.param_count())}"
            )
    stage = 0
    for layer in model.tcn.body:
        if hasattr(layer, "kind"):
            lines.append(
                f"  tcn[{stage}]      {layer.kind} C={layer.channels} d={layer.dilation}  "
                f"params {_fmt(layer.param_count())}"
            )
            stage += 1
        else:
            lines.append(
                f"  tcn[{stage - 1}->{stage}] transition pw {layer.spec.in_channels}->"
                f"{layer.spec.out_channels}  params {_fmt(layer.param_count())}"
            )
    lines.append(
        f"  classifier  {tcn.channels[-1]}->{config.classifier.num_classes}  "
        f"params {_fmt(model.head.param_count())}"
    )
    lines.append("")
    lines.append(f"dilations: {[2 ** i for i in range(tcn.stages)]}")
    lines.append(f"receptive field: {receptive_field(config)} frame(s)")
    lines.append(f"total parameters: {_fmt(model.param_count())}")
    return "\n".join(lines)
