"""Log-scale self-reference normalization and four-axis aggregation.

Raw distances normalize per encoder:

    s_norm(f) = log(1 + f) / log(1 + f_max)

with f_max the maximum (or 95th percentile) over the fixed suite across all
datasets. Axis scores average s_norm over each axis's conditions and
datasets; Recall reports 1 - mean so that higher is better on every axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ScoringError, SuiteIncompleteError
from .fad import FadResult
from .perturb import AXES, ConditionGrid


@dataclass(frozen=True)
class NormalizationContext:
    encoder: str
    fad_max: float
    reference_policy: str  # "max" | "p95"
    per_condition_fads: dict[str, dict[str, float]]  # condition id -> dataset -> raw FAD


@dataclass(frozen=True)
class AxisProfile:
    encoder: str
    recall: float
    precision: float
    semantic: float
    structural: float

    def as_dict(self) -> dict[str, float]:
        return {
            "recall": self.recall,
            "precision": self.precision,
            "semantic": self.semantic,
            "structural": self.structural,
        }


def s_norm(fad: float, ctx: NormalizationContext) -> float:
    """Eq-style normalization; clamps to 1 for values past fad_max (p95 policy)."""
    if ctx.fad_max <= 0.0:
        raise ScoringError("degenerate normalization context (fad_max <= 0)")
    if fad < 0.0:
        raise ValueError("fad must be nonnegative")
    return min(1.0, math.log1p(fad) / math.log1p(ctx.fad_max))


def percentile_linear(values: list[float], p: float) -> float:
    """Order statistic with linear interpolation at rank p*(n-1), inclusive."""
    xs = sorted(values)
    if not xs:
        raise ValueError("empty values")
    rank = p * (len(xs) - 1)
    lo = int(math.floor(rank))
    hi = min(lo + 1, len(xs) - 1)
    frac = rank - lo
    return xs[lo] * (1.0 - frac) + xs[hi] * frac


def build_context(
    results: list[FadResult], grid: ConditionGrid, policy: str = "max"
) -> NormalizationContext:
    """Collect one encoder's raw FADs and fix its normalization constant.

    The suite must be complete for every dataset present: FAD_max is defined
    over the fixed grid, and a partial grid would silently change it.
    """
    if policy not in ("max", "p95"):
        raise ValueError(f"unknown normalization policy {policy!r}")
    encoders = {r.encoder for r in results}
    if len(encoders) != 1:
        raise ValueError(f"results must cover exactly one encoder, got {sorted(encoders)}")
    per_condition: dict[str, dict[str, float]] = {}
    datasets = sorted({r.dataset for r in results})
    for r in results:
        per_condition.setdefault(r.condition, {})[r.dataset] = r.value
    missing = []
    for cond_id in grid.ids:
        for ds in datasets:
            if per_condition.get(cond_id, {}).get(ds) is None:
                missing.append(cond_id)
                break
    if missing:
        raise SuiteIncompleteError(missing)
    values = [per_condition[c][ds] for c in grid.ids for ds in datasets]
    fad_max = max(values) if policy == "max" else percentile_linear(values, 0.95)
    if fad_max <= 0.0:
        raise ScoringError("degenerate normalization context (all-zero suite)")
    return NormalizationContext(
        encoder=next(iter(encoders)),
        fad_max=fad_max,
        reference_policy=policy,
        per_condition_fads=per_condition,
    )


def axis_profile(
    results: list[FadResult], ctx: NormalizationContext, grid: ConditionGrid
) -> AxisProfile:
    """Unweighted mean of s_norm per axis over (condition, dataset) cells."""
    scores: dict[str, list[float]] = {axis: [] for axis in AXES}
    axis_of = {c.id: c.axis for c in grid.conditions}
    for r in results:
        axis = axis_of.get(r.condition)
        if axis is None:
            continue
        scores[axis].append(s_norm(r.value, ctx))
    means = {}
    for axis in AXES:
        if not scores[axis]:
            raise SuiteIncompleteError(
                [c.id for c in grid.conditions if c.axis == axis]
            )
        means[axis] = float(np.mean(scores[axis]))
    return AxisProfile(
        encoder=ctx.encoder,
        recall=1.0 - means["recall"],
        precision=means["precision"],
        semantic=means["semantic"],
        structural=means["structural"],
    )


def pearson(xs: list[float], ys: list[float]) -> float:
    """Sample Pearson correlation coefficient."""
    if len(xs) != len(ys):
        raise ValueError("length mismatch")
    if len(xs) < 3:
        raise ValueError("need at least 3 points")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        raise ScoringError("undefined correlation (zero variance)")
    return float(dx @ dy) / denom


@dataclass(frozen=True)
class TrajectoryPoint:
    parameter: float
    condition: str
    fad: float
    score: float


def trajectory(
    results: list[FadResult],
    ctx: NormalizationContext,
    kind: str,
    dataset: str,
    grid: ConditionGrid,
) -> list[TrajectoryPoint]:
    """One kind's (parameter, s_norm) series for one dataset, in grid order.

    Grid order is canonical severity order per kind; for pitch it spans the
    recall and semantic zones jointly (-8 .. +8 st).
    """
    by_condition = {r.condition: r for r in results if r.dataset == dataset}
    points = []
    for cond in grid.conditions:
        if cond.kind != kind:
            continue
        r = by_condition.get(cond.id)
        if r is None:
            raise SuiteIncompleteError([cond.id])
        param = float(next(iter(cond.params.values()))) if cond.params else 0.0
        points.append(
            TrajectoryPoint(
                parameter=param, condition=cond.id, fad=r.value, score=s_norm(r.value, ctx)
            )
        )
    return points


def asymmetry_ratio(pitch_series: list[TrajectoryPoint], magnitude: float) -> float:
    """Downward / upward response ratio at one shift magnitude."""
    by_param = {p.parameter: p for p in pitch_series}
    down = by_param.get(-abs(magnitude))
    up = by_param.get(abs(magnitude))
    if down is None or up is None:
        raise ValueError(f"pitch series lacks +/-{abs(magnitude)} st points")
    if up.score == 0.0:
        raise ScoringError("undefined ratio (zero upward response)")
    return down.score / up.score
