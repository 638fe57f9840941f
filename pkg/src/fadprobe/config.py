"""Declarative run configuration.

Config files use the same struct (canonical JSON) format as reports.
Schema, all keys top-level:

    kind        "run_config" (required)
    datasets    [{"name": str, "root": str}, ...]      (required)
    encoders    [{"name": str, "source": str,
                  "native_rate": int, "dim": int}, ...] (required)
    grid        "default" | [condition ids]            (default "default")
    seed        u64                                    (default 0)
    policy      "max" | "p95"                          (default "max")
    workspace   str                                    (required unless env override)
    workers     int                                    (default: cpu count)
    lufs_target float                                  (default -23.0)
    regularize_covariance bool                         (default false)

The FADPROBE_WORKSPACE environment variable overrides `workspace`; nothing
else is read from the environment.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .embed import BUILTIN_ENCODERS, EncoderSpec
from .errors import ConfigError
from .perturb import Condition, ConditionGrid, default_grid, parse_condition_id
from .structfmt import load_struct

WORKSPACE_ENV = "FADPROBE_WORKSPACE"
_NAME_RE = re.compile(r"^[A-Za-z0-9_-]+$")


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    root: Path


@dataclass(frozen=True)
class RunConfig:
    datasets: tuple[DatasetSpec, ...]
    encoders: tuple[EncoderSpec, ...]
    grid: ConditionGrid
    seed: int
    policy: str
    workspace: Path
    workers: int
    lufs_target: float = -23.0
    regularize_covariance: bool = False
    grid_spec: Any = "default"
    only_encoders: tuple[str, ...] = field(default_factory=tuple)
    only_datasets: tuple[str, ...] = field(default_factory=tuple)

    def active_encoders(self) -> tuple[EncoderSpec, ...]:
        if not self.only_encoders:
            return self.encoders
        return tuple(e for e in self.encoders if e.name in self.only_encoders)

    def active_datasets(self) -> tuple[DatasetSpec, ...]:
        if not self.only_datasets:
            return self.datasets
        return tuple(d for d in self.datasets if d.name in self.only_datasets)

    def echo_doc(self) -> dict[str, Any]:
        """Canonical echo of the parsed configuration, for auditing."""
        return {
            "kind": "run_config",
            "datasets": [{"name": d.name, "root": str(d.root)} for d in self.datasets],
            "encoders": [
                {
                    "name": e.name,
                    "source": e.source,
                    "native_rate": e.native_rate,
                    "dim": e.dim,
                }
                for e in self.encoders
            ],
            "grid": self.grid_spec,
            "seed": self.seed,
            "policy": self.policy,
            "workspace": str(self.workspace),
            "workers": self.workers,
            "lufs_target": self.lufs_target,
            "regularize_covariance": self.regularize_covariance,
        }


def _parse_encoder(entry: dict[str, Any]) -> EncoderSpec:
    try:
        name = entry["name"]
        source = entry["source"]
    except KeyError as exc:
        raise ConfigError(f"encoder entry missing key {exc}") from exc
    kind = source.split(":", 1)[0]
    if kind == "builtin":
        builtin_id = source.split(":", 1)[1]
        if builtin_id not in BUILTIN_ENCODERS:
            raise ConfigError(f"unknown builtin encoder {builtin_id!r}")
        rate, dim = BUILTIN_ENCODERS[builtin_id]
        rate = int(entry.get("native_rate", rate))
        dim = int(entry.get("dim", dim))
    else:
        try:
            rate = int(entry["native_rate"])
            dim = int(entry["dim"])
        except KeyError as exc:
            raise ConfigError(f"encoder {name!r} missing key {exc}") from exc
    try:
        return EncoderSpec(name=name, native_rate=rate, dim=dim, source=source)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_grid(spec: Any) -> ConditionGrid:
    if spec == "default":
        return default_grid()
    if not isinstance(spec, list) or not spec:
        raise ConfigError("grid must be 'default' or a non-empty list of condition ids")
    conditions: list[Condition] = []
    for cond_id in spec:
        try:
            conditions.append(parse_condition_id(cond_id))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if len({c.id for c in conditions}) != len(conditions):
        raise ConfigError("grid contains duplicate condition ids")
    return ConditionGrid(conditions=tuple(conditions))


def config_from_doc(doc: dict[str, Any], **overrides: Any) -> RunConfig:
    if doc.get("kind") != "run_config":
        raise ConfigError("config document kind must be 'run_config'")

    merged = dict(doc)
    for key, value in overrides.items():
        if value is not None and value != ():
            merged[key] = value

    datasets = []
    for entry in merged.get("datasets", []):
        name = entry.get("name")
        if not name or not _NAME_RE.match(name):
            raise ConfigError(f"dataset name {name!r} not filesystem-safe")
        datasets.append(DatasetSpec(name=name, root=Path(entry["root"])))
    if not datasets:
        raise ConfigError("config needs at least one dataset")
    if len({d.name for d in datasets}) != len(datasets):
        raise ConfigError("dataset names must be unique")

    encoders = tuple(_parse_encoder(e) for e in merged.get("encoders", []))
    if not encoders:
        raise ConfigError("config needs at least one encoder")
    if len({e.name for e in encoders}) != len(encoders):
        raise ConfigError("encoder names must be unique")

    workspace = os.environ.get(WORKSPACE_ENV) or merged.get("workspace")
    if not workspace:
        raise ConfigError("workspace not set (config key or FADPROBE_WORKSPACE)")

    policy = merged.get("policy", "max")
    if policy not in ("max", "p95"):
        raise ConfigError(f"policy must be 'max' or 'p95', got {policy!r}")

    workers = int(merged.get("workers", 0)) or (os.cpu_count() or 1)
    grid_spec = merged.get("grid", "default")

    only_enc = tuple(merged.get("only_encoders", ()))
    known = {e.name for e in encoders}
    for name in only_enc:
        if name not in known:
            raise ConfigError(f"--only-encoder {name!r} not in config encoders")
    only_ds = tuple(merged.get("only_datasets", ()))
    known_ds = {d.name for d in datasets}
    for name in only_ds:
        if name not in known_ds:
            raise ConfigError(f"--only-dataset {name!r} not in config datasets")

    return RunConfig(
        datasets=tuple(datasets),
        encoders=encoders,
        grid=_parse_grid(grid_spec),
        seed=int(merged.get("seed", 0)),
        policy=policy,
        workspace=Path(workspace),
        workers=max(1, workers),
        lufs_target=float(merged.get("lufs_target", -23.0)),
        regularize_covariance=bool(merged.get("regularize_covariance", False)),
        grid_spec=grid_spec,
        only_encoders=only_enc,
        only_datasets=only_ds,
    )


def load_config(path: str | Path, **overrides: Any) -> RunConfig:
    try:
        doc = load_struct(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_doc(doc, **overrides)
