"""Machine-readable report bundle.

Everything is emitted as plot-ready data, never rendered images: an axis
table (CSV + struct), radar series, per-kind trajectories, the diverging
structural/semantic bars, the correlation summary, and full provenance.
Identical inputs must reproduce identical bytes, so writers sort keys and
keep full-precision floats alongside fixed 3-decimal display strings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any

from .errors import FadprobeError, ScoringError
from .perturb import AXES, ConditionGrid
from .scoring import (
    AxisProfile,
    NormalizationContext,
    TrajectoryPoint,
    pearson,
    s_norm,
    trajectory,
)
from .structfmt import dump_struct

AXIS_ORDER = list(AXES)  # recall, precision, semantic, structural

BAR_STRUCTURAL = ("reverse", "shuffle_100ms")
BAR_SEMANTIC = ("pitch_+8st", "formant_1.4x")


def round3(value: float) -> str:
    """3-decimal display rounding, half-up (0.6451 -> '0.645')."""
    return str(Decimal(repr(value)).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def emit_table(
    profiles: list[AxisProfile],
    csv_path: str | Path,
    struct_path: str | Path,
    absent: list[str] | None = None,
) -> dict[str, Any]:
    """Axis table with per-column best markers, as CSV and struct."""
    if not profiles:
        raise ValueError("need at least one profile")
    rows = sorted(profiles, key=lambda p: p.encoder)
    best = {
        axis: max(rows, key=lambda p: p.as_dict()[axis]).encoder for axis in AXIS_ORDER
    }
    lines = ["encoder," + ",".join(AXIS_ORDER)]
    for p in rows:
        cells = []
        for axis in AXIS_ORDER:
            cell = round3(p.as_dict()[axis])
            if best[axis] == p.encoder:
                cell += "*"
            cells.append(cell)
        lines.append(p.encoder + "," + ",".join(cells))
    for name in sorted(absent or []):
        lines.append(name + "," + ",".join(["absent"] * len(AXIS_ORDER)))
    Path(csv_path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    doc = {
        "kind": "axis_table",
        "axes": AXIS_ORDER,
        "rows": [
            {
                "encoder": p.encoder,
                **{axis: p.as_dict()[axis] for axis in AXIS_ORDER},
                "display": {axis: round3(p.as_dict()[axis]) for axis in AXIS_ORDER},
            }
            for p in rows
        ],
        "best": best,
        "absent": sorted(absent or []),
    }
    dump_struct(doc, struct_path)
    return doc


def emit_radar(
    profiles: list[AxisProfile], path: str | Path, absent: list[str] | None = None
) -> dict[str, Any]:
    """Per-encoder axis values in fixed order; recall is already inverted,
    so outermost-is-better holds on every axis."""
    doc = {
        "kind": "radar",
        "axes": AXIS_ORDER,
        "series": [
            {"encoder": p.encoder, "values": [p.as_dict()[a] for a in AXIS_ORDER]}
            for p in sorted(profiles, key=lambda p: p.encoder)
        ],
        "absent": sorted(absent or []),
    }
    dump_struct(doc, path)
    return doc


def emit_diverging_bars(
    per_condition_scores: dict[str, dict[str, float]], path: str | Path
) -> dict[str, Any]:
    """Structural (left) vs semantic (right) bars per encoder.

    Expects each encoder's condition -> s_norm map (averaged over datasets)
    to contain reverse, shuffle_100ms, pitch_+8st, and formant_1.4x.
    """
    series = []
    for encoder in sorted(per_condition_scores):
        scores = per_condition_scores[encoder]
        for cond in BAR_STRUCTURAL + BAR_SEMANTIC:
            if cond not in scores:
                raise FadprobeError(f"diverging bars missing condition {cond!r} for {encoder!r}")
        series.append(
            {
                "encoder": encoder,
                "structural": {c: scores[c] for c in BAR_STRUCTURAL},
                "semantic": {c: scores[c] for c in BAR_SEMANTIC},
            }
        )
    doc = {"kind": "diverging_bars", "left": list(BAR_STRUCTURAL), "right": list(BAR_SEMANTIC), "series": series}
    dump_struct(doc, path)
    return doc


def emit_trajectory(
    kind: str,
    dataset: str,
    series: dict[str, list[TrajectoryPoint]],
    path: str | Path,
) -> dict[str, Any]:
    doc = {
        "kind": "trajectory",
        "perturbation_kind": kind,
        "dataset": dataset,
        "series": [
            {
                "encoder": encoder,
                "points": [
                    {
                        "parameter": p.parameter,
                        "condition": p.condition,
                        "fad": p.fad,
                        "s_norm": p.score,
                    }
                    for p in points
                ],
            }
            for encoder, points in sorted(series.items())
        ],
    }
    dump_struct(doc, path)
    return doc


@dataclass
class RunReport:
    """Everything emit_run_report writes, before it hits disk."""

    run_id: str
    fingerprint: str
    grid: ConditionGrid
    datasets: list[str]
    profiles: list[AxisProfile]
    contexts: dict[str, NormalizationContext]
    results: dict[str, list]  # encoder -> [FadResult]
    provenance: dict[str, Any]
    absent_encoders: list[str] = field(default_factory=list)

    @property
    def status(self) -> str:
        return "partial" if self.absent_encoders else "complete"


def _mean_condition_scores(report: RunReport, encoder: str) -> dict[str, float]:
    ctx = report.contexts[encoder]
    out: dict[str, float] = {}
    for cond_id, per_ds in ctx.per_condition_fads.items():
        vals = [s_norm(per_ds[ds], ctx) for ds in sorted(per_ds)]
        out[cond_id] = sum(vals) / len(vals)
    return out


def emit_run_report(report: RunReport, out_dir: str | Path) -> str:
    """Write the report bundle; returns its status ('complete'/'partial')."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files: list[str] = []

    emit_table(
        report.profiles, out_dir / "table.csv", out_dir / "table.struct",
        absent=report.absent_encoders,
    )
    files += ["table.csv", "table.struct"]
    emit_radar(report.profiles, out_dir / "radar.struct", absent=report.absent_encoders)
    files.append("radar.struct")

    kinds = []
    for cond in report.grid.conditions:
        if cond.kind not in kinds and cond.params:
            kinds.append(cond.kind)
    for kind in kinds:
        for dataset in report.datasets:
            series = {
                enc: trajectory(report.results[enc], report.contexts[enc], kind, dataset, report.grid)
                for enc in sorted(report.contexts)
            }
            name = f"trajectory_{kind}_{dataset}.struct"
            emit_trajectory(kind, dataset, series, out_dir / name)
            files.append(name)

    bar_scores = {enc: _mean_condition_scores(report, enc) for enc in report.contexts}
    emit_diverging_bars(bar_scores, out_dir / "bars.struct")
    files.append("bars.struct")

    profiles_by_encoder = {p.encoder: p for p in report.profiles}
    encoders = sorted(profiles_by_encoder)
    corr_doc: dict[str, Any] = {
        "kind": "correlation",
        "axis_x": "structural",
        "axis_y": "semantic",
        "encoders": encoders,
    }
    if len(encoders) >= 3:
        try:
            corr_doc["pearson_r"] = pearson(
                [profiles_by_encoder[e].structural for e in encoders],
                [profiles_by_encoder[e].semantic for e in encoders],
            )
            corr_doc["status"] = "ok"
        except ScoringError as exc:
            corr_doc["pearson_r"] = None
            corr_doc["status"] = str(exc)
    else:
        corr_doc["pearson_r"] = None
        corr_doc["status"] = "insufficient encoders (need >= 3)"
    dump_struct(corr_doc, out_dir / "correlation.struct")
    files.append("correlation.struct")

    raw: dict[str, Any] = {}
    for enc in sorted(report.contexts):
        ctx = report.contexts[enc]
        raw[enc] = {
            "fad_max": ctx.fad_max,
            "policy": ctx.reference_policy,
            "conditions": {
                cond: {
                    ds: {
                        "fad": ctx.per_condition_fads[cond][ds],
                        "s_norm": s_norm(ctx.per_condition_fads[cond][ds], ctx),
                    }
                    for ds in sorted(ctx.per_condition_fads[cond])
                }
                for cond in sorted(ctx.per_condition_fads)
            },
        }
    prov_doc = {
        "kind": "provenance",
        "run_id": report.run_id,
        "fingerprint": report.fingerprint,
        "grid": [c.id for c in report.grid.conditions],
        "datasets": report.datasets,
        "encoders": raw,
        "absent_encoders": sorted(report.absent_encoders),
        **report.provenance,
    }
    dump_struct(prov_doc, out_dir / "provenance.struct")
    files.append("provenance.struct")

    index = {
        "kind": "report_index",
        "run_id": report.run_id,
        "fingerprint": report.fingerprint,
        "status": report.status,
        "files": sorted(files),
        "encoders": encoders,
        "absent_encoders": sorted(report.absent_encoders),
    }
    dump_struct(index, out_dir / "index.struct")
    return report.status
