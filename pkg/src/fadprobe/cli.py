"""Command-line entry points.

Stages are composable: `perturb`, `embed`, `score`, and `report` each run
one slice of the pipeline against the workspace, so precomputed embedding
files can be dropped in between `perturb` and `score`. `run` chains all of
them; `gen-grid` and `verify-dsp` need no config.
"""

from __future__ import annotations

import logging
import sys

import click

from . import pipeline
from .config import load_config
from .errors import ConfigError, FadprobeError
from .perturb import default_grid
from .pipeline import EXIT_FATAL, Workspace
from .structfmt import dumps_struct
from .verify import run_checks


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


_CONFIG_OPTIONS = [
    click.option("--config", "config_path", required=True, type=click.Path(exists=True)),
    click.option("--seed", type=int, default=None, help="Override the config seed."),
    click.option(
        "--policy", type=click.Choice(["max", "p95"]), default=None,
        help="Override the normalization policy.",
    ),
    click.option("--workers", type=int, default=None, help="Override worker count."),
    click.option(
        "--only-encoder", "only_encoders", multiple=True,
        help="Restrict the run to these encoders (repeatable).",
    ),
    click.option(
        "--only-dataset", "only_datasets", multiple=True,
        help="Restrict the run to these datasets (repeatable).",
    ),
    click.option("-v", "--verbose", is_flag=True, default=False),
]


def _with_config_options(fn):
    for option in reversed(_CONFIG_OPTIONS):
        fn = option(fn)
    return fn


def _load(config_path, seed, policy, workers, only_encoders, only_datasets, verbose):
    _setup_logging(verbose)
    try:
        return load_config(
            config_path,
            seed=seed,
            policy=policy,
            workers=workers,
            only_encoders=tuple(only_encoders),
            only_datasets=tuple(only_datasets),
        )
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_FATAL)


@click.group()
def main():
    """Profile audio-encoder evaluation bias with a perturbation suite."""


@main.command("run")
@_with_config_options
@click.option("--print-config", is_flag=True, default=False, help="Echo the parsed config and exit.")
def run_cmd(config_path, seed, policy, workers, only_encoders, only_datasets, verbose, print_config):
    """Execute the full pipeline: preprocess, perturb, embed, score, report."""
    config = _load(config_path, seed, policy, workers, only_encoders, only_datasets, verbose)
    if print_config:
        click.echo(dumps_struct(config.echo_doc()), nl=False)
        return
    sys.exit(pipeline.run(config))


@main.command("gen-grid")
@click.option("--out", type=click.Path(), default=None, help="Write to a file instead of stdout.")
def gen_grid_cmd(out):
    """Print the default 37-condition grid (id, kind, params, axis)."""
    grid = default_grid()
    doc = {
        "kind": "condition_grid",
        "count": len(grid.conditions),
        "conditions": [
            {"id": c.id, "kind": c.kind, "params": c.params, "axis": c.axis}
            for c in grid.conditions
        ],
    }
    text = dumps_struct(doc)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


@main.command("perturb")
@_with_config_options
def perturb_cmd(config_path, seed, policy, workers, only_encoders, only_datasets, verbose):
    """Preprocess the corpus and write every perturbed condition."""
    config = _load(config_path, seed, policy, workers, only_encoders, only_datasets, verbose)
    try:
        pipeline.stage_prepare_and_perturb(config, Workspace(config.workspace))
    except FadprobeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FATAL)


@main.command("embed")
@_with_config_options
def embed_cmd(config_path, seed, policy, workers, only_encoders, only_datasets, verbose):
    """Embed the workspace audio for every configured encoder."""
    config = _load(config_path, seed, policy, workers, only_encoders, only_datasets, verbose)
    ws = Workspace(config.workspace)
    try:
        audio_keys = pipeline.recover_audio_keys(config, ws)
        failures = pipeline.stage_embed(config, ws, audio_keys)
    except FadprobeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FATAL)
    for name, reason in sorted(failures.items()):
        click.echo(f"encoder {name} failed: {reason}", err=True)
    sys.exit(pipeline.EXIT_PARTIAL if failures else pipeline.EXIT_OK)


@main.command("score")
@_with_config_options
def score_cmd(config_path, seed, policy, workers, only_encoders, only_datasets, verbose):
    """Compute raw FADs, normalization contexts, and axis profiles."""
    config = _load(config_path, seed, policy, workers, only_encoders, only_datasets, verbose)
    ws = Workspace(config.workspace)
    try:
        audio_keys = pipeline.recover_audio_keys(config, ws)
        corpus_hashes = {ds: keys[pipeline.CLEAN] for ds, keys in audio_keys.items()}
        fingerprint = pipeline.run_fingerprint(config, corpus_hashes)
        doc = pipeline.stage_score(config, ws, {}, fingerprint)
    except FadprobeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FATAL)
    if doc["absent"]:
        for name, reason in sorted(doc["absent"].items()):
            click.echo(f"encoder {name} absent: {reason}", err=True)
        sys.exit(pipeline.EXIT_PARTIAL)


@main.command("report")
@_with_config_options
def report_cmd(config_path, seed, policy, workers, only_encoders, only_datasets, verbose):
    """Assemble the report bundle from workspace scores."""
    config = _load(config_path, seed, policy, workers, only_encoders, only_datasets, verbose)
    try:
        status = pipeline.stage_report(config, Workspace(config.workspace))
    except FadprobeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FATAL)
    click.echo(f"report written ({status})")
    sys.exit(pipeline.EXIT_PARTIAL if status == "partial" else pipeline.EXIT_OK)


@main.command("verify-dsp")
@click.option("--seed", type=int, default=0)
def verify_dsp_cmd(seed):
    """Run the DSP conformance self-test on generated tones."""
    checks = run_checks(seed)
    failed = 0
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        click.echo(f"{status} {check.name}: {check.detail}")
        failed += 0 if check.passed else 1
    if failed:
        click.echo(f"{failed}/{len(checks)} checks failed", err=True)
        sys.exit(EXIT_FATAL)
    click.echo(f"all {len(checks)} checks passed")


if __name__ == "__main__":
    main()
