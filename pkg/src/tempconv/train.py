"""Training recipe: plain SGD with weight decay, cosine annealing, MixUp,
crop/flip/variable-length augmentation, and best-checkpoint selection.

The schedule is exact: rate(e) = base_lr * (1 + cos(pi * e / total)) / 2,
evaluated per epoch. Weight decay is coupled by default (it enters the
update as lr * (g + wd * w)); the decoupled variant subtracts wd * w at a
rate independent of the annealed lr, for comparison runs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .augment import augment, mixup
from .config import TrainConfig
from .errors import ConfigError, NumericError
from .tensor import GradTape, Tensor
from . import ops


def cosine_lr(epoch, total_epochs=80, base_lr=0.02):
    """Annealed rate at integer epoch e in 0..total_epochs."""
    if total_epochs < 1:
        raise ConfigError(f"total_epochs must be ≥ 1, got {total_epochs}")
    if not 0 <= epoch <= total_epochs:
        raise ConfigError(f"epoch {epoch} outside 0..{total_epochs}")
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / total_epochs))


def lr_schedule(total_epochs=80, base_lr=0.02):
    return [cosine_lr(e, total_epochs, base_lr) for e in range(total_epochs + 1)]


def sgd_step(params, lr, weight_decay=0.01, decoupled=False):
    """In-place descent step over all params that received gradients."""
    for p in params:
        g = p.grad
        if g is None:
            continue
        if not np.isfinite(g).all():
            raise NumericError("non-finite gradient encountered in sgd_step")
        if decoupled:
            p.data = p.data - lr * g - weight_decay * p.data
        else:
            p.data = p.data - lr * (g + weight_decay * p.data)


def one_hot(labels, num_classes, dtype=np.float32):
    out = np.zeros((len(labels), num_classes), dtype=dtype)
    out[np.arange(len(labels)), labels] = 1.0
    return out


@dataclass
class TrainResult:
    history: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_acc: float = 0.0
    best_state: dict = None


def _augment_batch(videos, rng, train_mode, tcfg):
    out = []
    lens = []
    for clip in videos:
        a, k = augment(clip, rng, train_mode, tcfg.crop_size,
                       flip=tcfg.flip, crop=tcfg.crop, varlen=tcfg.variable_length)
        out.append(a)
        lens.append(k)
    return np.stack(out), np.asarray(lens, dtype=np.int64)


def _forward_loss(model, x, targets, valid_len):
    logits = model(Tensor(x), valid_len=valid_len)
    return ops.cross_entropy(logits, Tensor(targets))


def evaluate(model, dataset, split, tcfg=None):
    """Top-1 accuracy on a split: eval mode, center crop, full lengths."""
    tcfg = tcfg if tcfg is not None else TrainConfig()
    n = dataset.split_size(split)
    if n < 1:
        raise ConfigError(f"cannot evaluate empty split '{split}'")
    was_training = model.training
    model.eval()
    correct = 0
    for start in range(0, n, tcfg.batch_size):
        idx = range(start, min(start + tcfg.batch_size, n))
        videos, labels = dataset.batch(split, idx)
        x, lens = _augment_batch(videos, None, False, tcfg)
        logits = model(Tensor(x), valid_len=lens)
        correct += int((logits.data.argmax(axis=1) == labels).sum())
    model.train(was_training)
    return correct / n


def train_loop(model, dataset, tcfg, log_stream=None):
    """Run the full recipe; leaves the model holding the best weights.

    History is one record per epoch: {"epoch", "lr", "train_loss",
    "val_acc"}, also written to ``log_stream`` as JSON lines when given.
    A non-finite loss aborts with the offending epoch/step in the error.
    """
    if model.head.num_classes != dataset.spec.num_classes:
        raise ConfigError(
            f"model has {model.head.num_classes} classes, dataset has "
            f"{dataset.spec.num_classes}"
        )
    num_classes = dataset.spec.num_classes
    n_train = dataset.split_size("train")
    rng = np.random.default_rng(np.random.SeedSequence([tcfg.seed, 11]))
    result = TrainResult()

    for epoch in range(tcfg.epochs):
        lr = cosine_lr(epoch, tcfg.epochs, tcfg.base_lr)
        model.train()
        perm = rng.permutation(n_train)
        losses = []
        for step, start in enumerate(range(0, n_train, tcfg.batch_size)):
            idx = perm[start:start + tcfg.batch_size]
            videos, labels = dataset.batch("train", idx)
            x, lens = _augment_batch(videos, rng, True, tcfg)
            y = one_hot(labels, num_classes)
            if tcfg.mixup_alpha > 0:
                pair = rng.permutation(len(idx))
                x, y, _ = mixup(x, x[pair], y, y[pair], tcfg.mixup_alpha, rng)
                lens = np.maximum(lens, lens[pair])  # pool over the union extent
            try:
                model.zero_grad()
                with GradTape() as tape:
                    loss = _forward_loss(model, x, y, lens)
                tape.backward(loss)
                sgd_step(model.parameters(), lr, tcfg.weight_decay, tcfg.decoupled_decay)
            except NumericError as exc:
                raise NumericError(
                    f"training diverged at epoch {epoch}, step {step}: {exc}"
                ) from exc
            losses.append(float(loss.data))
        val_acc = evaluate(model, dataset, "val", tcfg)
        record = {
            "epoch": epoch,
            "lr": lr,
            "train_loss": sum(losses) / len(losses),
            "val_acc": val_acc,
        }
        result.history.append(record)
        if log_stream is not None:
            log_stream.write(json.dumps(record) + "\n")
            log_stream.flush()
        if val_acc > result.best_val_acc or result.best_epoch < 0:
            result.best_epoch = epoch
            result.best_val_acc = val_acc
            result.best_state = model.state_dict()

    model.load_state_dict(result.best_state)
    return result
