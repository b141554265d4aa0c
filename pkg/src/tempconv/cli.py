"""Command-line entry point.

Commands: describe, count, verify, infer, gradcheck, schedule, train-toy,
gen-data. Exit codes: 0 success, 1 usage, 2 validation/config/format
error, 3 numeric failure (divergence, failed verification or gradcheck).
``--seed`` falls back to the TEMPCONV_SEED environment variable, then 0.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import complexity, lwt
from .config import (load_config_file, parse_config, parse_toy_spec,
                     parse_train_config)
from .errors import ConfigError, FormatError, NumericError, ShapeError, TapeError
from .model import build_model, describe, receptive_field
from .tensor import Tensor
from .train import cosine_lr, evaluate, lr_schedule, train_loop

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3

_FORMATS = ("text", "json", "markdown")


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures on exit code 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _resolve_seed(args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("TEMPCONV_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"TEMPCONV_SEED='{env}' is not an integer") from None
    return None


def _load_model_config(args):
    overrides = args.set or []
    if args.config:
        return load_config_file(args.config, overrides)
    return parse_config("", overrides)


def _read_text(args):
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            return f.read()
    return ""


def _emit(args, document):
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(document if document.endswith("\n") else document + "\n")
    else:
        print(document)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="path to a config document")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config key (repeatable, last wins)")
    common.add_argument("--seed", type=int, help="seed (fallback: TEMPCONV_SEED, then 0)")
    common.add_argument("--format", choices=_FORMATS, default="text")
    common.add_argument("--out", help="write the output document to this path")

    parser = _Parser(prog="tempconv",
                     description="causal temporal-convolution model toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("describe", parents=[common],
                   help="build a model and print its structure")

    p = sub.add_parser("count", parents=[common],
                       help="analytic parameter/MAC audit")
    p.add_argument("--frames", type=int, default=29, help="temporal length to audit at")
    p.add_argument("--size", type=int, default=88, help="spatial edge to audit at")

    p = sub.add_parser("verify", parents=[common],
                       help="check configs against an expectations fixture")
    p.add_argument("--fixture", default="fixtures/paper_tables.json")
    p.add_argument("--only", action="append", help="restrict to fixture row id (repeatable)")

    p = sub.add_parser("infer", parents=[common],
                       help="classify one stored tensor")
    p.add_argument("--input", required=True, help="tensor file to classify")
    p.add_argument("--checkpoint", help="trained weights; omitted = fresh seeded model")
    p.add_argument("--crop-size", type=int, default=88,
                   help="center-crop larger inputs to this edge")

    p = sub.add_parser("gradcheck", parents=[common],
                       help="finite-difference check of block gradients")
    p.add_argument("--kind", default="all", help="block kind, 'head', or 'all'")

    p = sub.add_parser("schedule", parents=[common],
                       help="print the annealed learning-rate table")
    p.add_argument("--epochs", type=int, default=80)
    p.add_argument("--base-lr", type=float, default=0.02)

    p = sub.add_parser("train-toy", parents=[common],
                       help="train on the synthetic task with the full recipe")
    p.add_argument("--run-dir", default="runs/toy",
                   help="directory for history, checkpoint and summary")

    p = sub.add_parser("gen-data", parents=[common],
                       help="materialize the synthetic dataset to an .npz file")
    return parser


# -- command bodies --------------------------------------------------------

def _cmd_describe(args):
    config = _load_model_config(args)
    model = build_model(config, seed=_resolve_seed(args) or 0, init=False)
    if args.format == "json":
        from .config import config_to_dict
        doc = json.dumps({
            "build": model.build_version,
            "config_hash": model.config_hash,
            "config": config_to_dict(config),
            "receptive_field": receptive_field(config),
            "total_params": model.param_count(),
        }, indent=2)
    else:
        doc = describe(model)
    _emit(args, doc)
    return EXIT_OK


def _cmd_count(args):
    config = _load_model_config(args)
    model = build_model(config, init=False)
    shape = ((config.in_channels, args.frames, args.size, args.size)
             if model.has_frontend else (model.tcn.in_channels, args.frames))
    report = complexity.audit(model, shape)
    _emit(args, complexity.emit_report(report, args.format))
    return EXIT_OK


def _cmd_verify(args):
    results = complexity.verify_fixture(args.fixture, row_ids=args.only)
    fmt = "json" if args.format == "json" else "text"
    _emit(args, complexity.emit_verify(results, fmt))
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def _cmd_schedule(args):
    if args.epochs < 1:
        raise ConfigError(f"epochs must be ≥ 1, got {args.epochs}")
    rates = lr_schedule(args.epochs, args.base_lr)
    if args.format == "json":
        doc = json.dumps({"base_lr": args.base_lr, "total_epochs": args.epochs,
                          "rates": rates}, indent=2)
    else:
        lines = [f"cosine annealing: base {args.base_lr}, {args.epochs} epochs"]
        lines += [f"  epoch {e:>3}  lr {r:.10f}" for e, r in enumerate(rates)]
        doc = "\n".join(lines)
    _emit(args, doc)
    return EXIT_OK


def _cmd_gradcheck(args):
    from .gradcheck import block_suite

    seed = _resolve_seed(args) or 0
    results = block_suite(args.kind, seed=seed)
    passed = all(r.ok for _, r in results)
    if args.format == "json":
        doc = json.dumps({
            "passed": passed,
            "results": [
                {"kind": kind, "ok": r.ok, "checked": r.checked,
                 "max_rel_err": r.max_rel_err}
                for kind, r in results
            ],
        }, indent=2)
    else:
        lines = [f"  {kind:<18} {'PASS' if r.ok else 'FAIL'}  "
                 f"{r.checked} coords, max rel err {r.max_rel_err:.3e}"
                 for kind, r in results]
        lines.append(f"overall: {'PASS' if passed else 'FAIL'}")
        doc = "\n".join(lines)
    _emit(args, doc)
    return EXIT_OK if passed else EXIT_NUMERIC


def _center_crop_to(arr, size):
    h, w = arr.shape[-2:]
    if h < size or w < size:
        raise ShapeError(f"input spatial {h}x{w} smaller than expected {size}x{size}")
    top, left = (h - size) // 2, (w - size) // 2
    return arr[..., top:top + size, left:left + size]


def _cmd_infer(args):
    config = _load_model_config(args)
    seed = _resolve_seed(args) or 0
    model = build_model(config, seed=seed)
    if args.checkpoint:
        state, meta = lwt.load_checkpoint(args.checkpoint)
        if meta.get("config_hash") and meta["config_hash"] != model.config_hash:
            raise FormatError(
                f"checkpoint was trained on config {meta['config_hash']}, "
                f"current config is {model.config_hash}"
            )
        model.load_state_dict(state)
    model.eval()
    arr = lwt.load_tensor(args.input)
    if model.has_frontend:
        if arr.ndim != 4:
            raise ShapeError(f"expected a (C, T, H, W) tensor, got rank {arr.ndim}")
        if arr.shape[0] != config.in_channels:
            raise ShapeError(
                f"tensor has {arr.shape[0]} channels, model expects {config.in_channels}"
            )
        if arr.shape[-2:] != (args.crop_size, args.crop_size):
            arr = _center_crop_to(arr, args.crop_size)
    elif arr.ndim != 2:
        raise ShapeError(f"frontend-less model expects a (C, T) tensor, got rank {arr.ndim}")
    probs = model.predict_proba(Tensor(arr.astype(np.float32))).data
    order = np.argsort(-probs, kind="stable")
    top5 = [(int(i), float(probs[i])) for i in order[:5]]
    if args.format == "json":
        doc = json.dumps({
            "top1": top5[0][0],
            "top5": [{"class": c, "prob": p} for c, p in top5],
            "prob_sum": float(probs.sum()),
        }, indent=2)
    else:
        lines = [f"top-1 class: {top5[0][0]}"]
        lines += [f"  class {c:>4}  p={p:.6f}" for c, p in top5]
        doc = "\n".join(lines)
    _emit(args, doc)
    return EXIT_OK


def _cmd_train_toy(args):
    text = _read_text(args)
    overrides = args.set or []
    config = parse_config(text, overrides)
    tcfg = parse_train_config(text, overrides)
    toy = parse_toy_spec(text, overrides)
    seed = _resolve_seed(args)
    if seed is not None:
        from dataclasses import replace
        tcfg = replace(tcfg, seed=seed)

    from .toydata import gen_toy_dataset
    dataset = gen_toy_dataset(toy)
    model = build_model(config, seed=tcfg.seed)
    os.makedirs(args.run_dir, exist_ok=True)
    history_path = os.path.join(args.run_dir, "history.jsonl")
    with open(history_path, "w", encoding="utf-8") as log:
        result = train_loop(model, dataset, tcfg, log_stream=log)
    test_acc = evaluate(model, dataset, "test", tcfg)
    ckpt_path = os.path.join(args.run_dir, "best.lwtc")
    lwt.save_checkpoint(ckpt_path, model.state_dict(), meta={
        "config_hash": model.config_hash,
        "best_epoch": result.best_epoch,
        "best_val_acc": result.best_val_acc,
        "seed": tcfg.seed,
    })
    summary = {
        "epochs": tcfg.epochs,
        "best_epoch": result.best_epoch,
        "best_val_acc": result.best_val_acc,
        "test_acc": test_acc,
        "history": history_path,
        "checkpoint": ckpt_path,
    }
    if args.format == "json":
        doc = json.dumps(summary, indent=2)
    else:
        doc = "\n".join([
            f"trained {tcfg.epochs} epoch(s); best epoch {result.best_epoch} "
            f"with val acc {result.best_val_acc:.4f}",
            f"test acc {test_acc:.4f}",
            f"history: {history_path}",
            f"checkpoint: {ckpt_path}",
        ])
    _emit(args, doc)
    return EXIT_OK


def _cmd_gen_data(args):
    from .toydata import gen_toy_dataset

    toy = parse_toy_spec(_read_text(args), args.set or [])
    dataset = gen_toy_dataset(toy)
    arrays = {}
    counts = {}
    for split in ("train", "val", "test"):
        x, y = dataset.all_of(split)
        arrays[f"{split}_x"] = x
        arrays[f"{split}_y"] = y
        counts[split] = len(y)
    out = args.out or "toy_data.npz"
    np.savez(out, **arrays)
    doc = json.dumps({"path": out, "classes": toy.num_classes,
                      "seq_len": toy.seq_len, "frame_size": toy.frame_size,
                      "sizes": counts}, indent=2)
    print(doc if args.format == "json" else
          f"wrote {out}: {counts} samples, {toy.num_classes} classes, "
          f"T={toy.seq_len}, {toy.frame_size}x{toy.frame_size}")
    return EXIT_OK


_COMMANDS = {
    "describe": _cmd_describe,
    "count": _cmd_count,
    "verify": _cmd_verify,
    "infer": _cmd_infer,
    "gradcheck": _cmd_gradcheck,
    "schedule": _cmd_schedule,
    "train-toy": _cmd_train_toy,
    "gen-data": _cmd_gen_data,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FormatError, ShapeError, TapeError) as exc:
        print(f"tempconv.{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericError as exc:
        print(f"tempconv.{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"tempconv: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
