"""Analytic parameter and multiply-accumulate audit over built models.

Counting conventions, chosen to match the tables this module verifies:
one MAC per multiply-accumulate inside convolution and affine layers;
normalization, bias adds, activations, and other elementwise work count
zero. "FLOPs" columns in fixtures are MAC counts (the profiling-tool
convention); a literal 2x multiply-add reading would fail every row.
Parameter counts include weights, biases, and norm affine pairs, and
exclude running statistics.

Everything here is integer arithmetic over layer shapes; no data passes
through the network.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

from .errors import ConfigError, FormatError, ShapeError
from .model import Model

GROUPS = ("stem", "extractor", "tcn", "classifier")


@dataclass(frozen=True)
class ComplexityRow:
    group: str
    name: str
    params: int
    macs: int


@dataclass(frozen=True)
class ComplexityReport:
    config_hash: str
    input_shape: tuple
    rows: tuple

    def group_totals(self):
        params = {g: 0 for g in GROUPS}
        macs = {g: 0 for g in GROUPS}
        for row in self.rows:
            params[row.group] += row.params
            macs[row.group] += row.macs
        return params, macs

    @property
    def total_params(self):
        return sum(r.params for r in self.rows)

    @property
    def total_macs(self):
        return sum(r.macs for r in self.rows)

    @property
    def tcn_params(self):
        return sum(r.params for r in self.rows if r.group == "tcn")

    @property
    def tcn_macs(self):
        return sum(r.macs for r in self.rows if r.group == "tcn")


def count_params(model):
    """Total learnable parameters (the registry is the ground truth)."""
    return model.param_count()


def count_macs(model, input_shape=None):
    """MACs for one unbatched input of ``input_shape``."""
    return audit(model, input_shape).total_macs


def audit(model, input_shape=None):
    """Per-module params/MACs with shape propagation; exact integers."""
    if not isinstance(model, Model):
        raise ConfigError("audit expects a built model")
    shape = tuple(input_shape) if input_shape is not None else model.input_shape()
    rows = []
    if model.has_frontend:
        if len(shape) != 4:
            raise ShapeError(f"frontend model audits a (C, T, H, W) input, got {shape}")
        rows.append(ComplexityRow("stem", "stem", model.stem.param_count(),
                                  model.stem.macs(shape)))
        shape = model.stem.output_shape(shape)
        rows.append(ComplexityRow("extractor", "extractor",
                                  model.extractor.param_count(),
                                  model.extractor.macs(shape)))
        shape = model.extractor.output_shape(shape)
        if model.projection is not None:
            rows.append(ComplexityRow("tcn", "projection",
                                      model.projection.param_count(),
                                      model.projection.macs(shape)))
            shape = model.projection.output_shape(shape)
    else:
        if len(shape) != 2:
            raise ShapeError(f"frontend-less model audits a (C, T) input, got {shape}")
        if shape[0] != model.tcn.in_channels:
            raise ShapeError(
                f"input has {shape[0]} channels, temporal stack expects {model.tcn.in_channels}"
            )
    stage = 0
    for layer in model.tcn.body:
        if hasattr(layer, "kind"):
            name = f"tcn[{stage}] {layer.kind} d={layer.dilation}"
            stage += 1
        else:
            name = f"tcn transition {layer.spec.in_channels}->{layer.spec.out_channels}"
        rows.append(ComplexityRow("tcn", name, layer.param_count(), layer.macs(shape)))
        shape = layer.output_shape(shape)
    rows.append(ComplexityRow("classifier", "classifier",
                              model.head.param_count(), model.head.macs(shape)))
    report = ComplexityReport(model.config_hash,
                              tuple(input_shape) if input_shape is not None else model.input_shape(),
                              tuple(rows))
    assert report.total_params == model.param_count()
    return report


# -- fixture verification --------------------------------------------------

@dataclass(frozen=True)
class VerifyResult:
    row_id: str
    metric: str  # "params" or "macs"
    computed: int
    expected: float
    tolerance: float
    deviation: float
    passed: bool


def _check(row_id, metric, computed, expected, tolerance):
    deviation = (computed - expected) / expected
    return VerifyResult(row_id, metric, computed, expected, tolerance,
                        deviation, abs(deviation) <= tolerance)


def verify_report(report, fixture_row):
    """Check one report against one fixture row; returns per-metric results."""
    results = []
    if "tcn_params_m" in fixture_row:
        results.append(_check(fixture_row["id"], "params", report.tcn_params,
                              fixture_row["tcn_params_m"] * 1e6,
                              fixture_row["tol_params"]))
    if "tcn_gmacs" in fixture_row:
        results.append(_check(fixture_row["id"], "macs", report.tcn_macs,
                              fixture_row["tcn_gmacs"] * 1e9,
                              fixture_row["tol_macs"]))
    if not results:
        raise FormatError(f"fixture row '{fixture_row.get('id')}' has no expectations")
    return results


def load_fixture(path):
    with open(path, "r", encoding="utf-8") as f:
        try:
            fixture = json.load(f)
        except json.JSONDecodeError as exc:
            raise FormatError(f"fixture is not valid JSON: {exc}") from exc
    if "rows" not in fixture or not isinstance(fixture["rows"], list):
        raise FormatError("fixture must contain a 'rows' list")
    seen = set()
    for row in fixture["rows"]:
        if "id" not in row or "config" not in row:
            raise FormatError("every fixture row needs 'id' and 'config'")
        if row["id"] in seen:
            raise FormatError(f"duplicate fixture row id '{row['id']}'")
        seen.add(row["id"])
        for key in ("tcn_params_m", "tcn_gmacs"):
            tol_key = "tol_params" if key.endswith("_m") else "tol_macs"
            if key in row and tol_key not in row:
                raise FormatError(f"fixture row '{row['id']}' has {key} but no {tol_key}")
    return fixture


def verify_fixture(path, row_ids=None):
    """Audit every config named by the fixture and compare. Returns results.

    Config paths in the fixture are relative to the fixture's directory.
    """
    from .config import load_config_file
    from .model import build_model

    fixture = load_fixture(path)
    base = os.path.dirname(os.path.abspath(path))
    input_shape = tuple(fixture.get("input_shape", (1, 29, 88, 88)))
    results = []
    for row in fixture["rows"]:
        if row_ids is not None and row["id"] not in row_ids:
            continue
        config_path = os.path.normpath(os.path.join(base, row["config"]))
        config = load_config_file(config_path)
        graph = build_model(config, init=False)
        shape = input_shape if graph.has_frontend else graph.input_shape(frames=input_shape[1])
        report = audit(graph, shape)
        results.extend(verify_report(report, row))
    if row_ids is not None:
        missing = set(row_ids) - {r["id"] for r in fixture["rows"]}
        if missing:
            raise FormatError(f"fixture has no row(s) {sorted(missing)}")
    return results


# -- rendering -------------------------------------------------------------

def report_to_dict(report):
    params, macs = report.group_totals()
    return {
        "config_hash": report.config_hash,
        "input_shape": list(report.input_shape),
        "rows": [
            {"group": r.group, "name": r.name, "params": r.params, "macs": r.macs}
            for r in report.rows
        ],
        "groups": {g: {"params": params[g], "macs": macs[g]} for g in GROUPS},
        "totals": {"params": report.total_params, "macs": report.total_macs},
        "tcn": {"params": report.tcn_params, "macs": report.tcn_macs},
    }


def emit_report(report, fmt="text"):
    if fmt == "json":
        return json.dumps(report_to_dict(report), indent=2)
    if fmt == "markdown":
        lines = [
            f"input shape: `{report.input_shape}`",
            "",
            "| module | params | MACs |",
            "| --- | ---: | ---: |",
        ]
        for r in report.rows:
            lines.append(f"| {r.name} | {r.params:,} | {r.macs:,} |")
        lines.append(
            f"| **Total (TCN)** | **{report.total_params:,} ({report.tcn_params:,})** "
            f"| **{report.total_macs:,} ({report.tcn_macs:,})** |"
        )
        lines.append("")
        lines.append(
            f"Params x10^6: {report.total_params / 1e6:.2f} ({report.tcn_params / 1e6:.2f}); "
            f"MACs x10^9: {report.total_macs / 1e9:.2f} ({report.tcn_macs / 1e9:.2f})"
        )
        return "\n".join(lines)
    if fmt == "text":
        lines = [f"input shape: {report.input_shape}"]
        width = max(len(r.name) for r in report.rows) + 2
        for r in report.rows:
            lines.append(f"  {r.name:<{width}} params {r.params:>12,}   macs {r.macs:>14,}")
        lines.append(
            f"  {'Total (TCN)':<{width}} params {report.total_params:>12,} "
            f"({report.tcn_params:,})   macs {report.total_macs:>14,} ({report.tcn_macs:,})"
        )
        return "\n".join(lines)
    raise ConfigError(f"unknown report format '{fmt}'")


def emit_verify(results, fmt="text"):
    overall = all(r.passed for r in results)
    if fmt == "json":
        return json.dumps({
            "passed": overall,
            "rows": [
                {"id": r.row_id, "metric": r.metric, "computed": r.computed,
                 "expected": r.expected, "tolerance": r.tolerance,
                 "deviation": round(r.deviation, 6), "passed": r.passed}
                for r in results
            ],
        }, indent=2)
    lines = []
    for r in results:
        verdict = "pass" if r.passed else "FAIL"
        lines.append(
            f"  {r.row_id:<18} {r.metric:<7} computed {r.computed:>13,} "
            f"expected {r.expected:>13,.0f}  dev {r.deviation:+7.2%}  "
            f"tol ±{r.tolerance:.0%}  {verdict}"
        )
    lines.append(f"overall: {'pass' if overall else 'FAIL'}")
    return "\n".join(lines)
