"""End-to-end orchestration: preprocess, perturb, embed, score, report.

Work fans out across (clip x condition) and (encoder x dataset x condition)
items; every stochastic stream is keyed, every reduction happens in key
order, and each work item owns its output path exclusively, so results are
identical at any worker count. Stage outputs carry content-hash stamps and
are skipped when the stamp already matches (cache hits are logged).
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

from . import audio_io, embed, fad, perturb, report, scoring
from .config import RunConfig
from .errors import ConfigError, FadprobeError, SuiteIncompleteError
from .structfmt import dump_struct, dumps_struct, load_struct

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 3

CLEAN = "clean"
STAMP_NAME = ".stamp.struct"


# --- workspace layout ------------------------------------------------------


class Workspace:
    def __init__(self, root: Path):
        self.root = Path(root)

    def audio_dir(self, dataset: str, condition: str) -> Path:
        return self.root / dataset / condition

    def emb_path(self, encoder: str, dataset: str, condition: str) -> Path:
        return self.root / "emb" / encoder / dataset / f"{condition}.emb1"

    @property
    def scores_path(self) -> Path:
        return self.root / "scores.struct"

    @property
    def report_dir(self) -> Path:
        return self.root / "report"


def _stamp_matches(directory: Path, key: str) -> bool:
    stamp = directory / STAMP_NAME
    if not stamp.is_file():
        return False
    try:
        return load_struct(stamp).get("key") == key
    except ValueError:
        return False


def _write_stamp(directory: Path, key: str) -> None:
    dump_struct({"kind": "stage_stamp", "key": key}, directory / STAMP_NAME)


def _hash(*parts: str) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


# --- preprocess ------------------------------------------------------------


def corpus_hash(clips: list[audio_io.AudioClip]) -> str:
    h = hashlib.sha256()
    for clip in clips:
        h.update(clip.id.encode("utf-8"))
        h.update(str(clip.sample_rate).encode())
        h.update(clip.samples.astype("<f8").tobytes())
    return h.hexdigest()


def prepare_clean(config: RunConfig, dataset_name: str, root: Path, ws: Workspace) -> str:
    """Load, normalize, and persist the clean corpus; returns its stage key."""
    clips = audio_io.load_corpus(root)
    if not clips:
        raise ConfigError(f"dataset {dataset_name!r} has no WAV files under {root}")
    raw_hash = corpus_hash(clips)
    key = _hash("clean", raw_hash, repr(config.lufs_target))
    out_dir = ws.audio_dir(dataset_name, CLEAN)
    if _stamp_matches(out_dir, key):
        log.info("cache hit: %s/clean", dataset_name)
        return key
    normalized, _reports = audio_io.normalize_corpus(clips, config.lufs_target)
    if len(normalized) < 2:
        raise FadprobeError(f"dataset {dataset_name!r}: insufficient corpus after silence drop")
    out_dir.mkdir(parents=True, exist_ok=True)
    for stale in out_dir.glob("*.wav"):
        stale.unlink()
    for clip in normalized:
        audio_io.write_clip(clip, out_dir)
    _write_stamp(out_dir, key)
    return key


# --- perturb ---------------------------------------------------------------


def _perturb_clip_task(
    clean_path: str, condition_ids: list[str], seed: int, dataset_dir: str
) -> str:
    clip = audio_io.load_clip(clean_path)
    for cond_id in condition_ids:
        condition = perturb.parse_condition_id(cond_id)
        out = perturb.apply(clip, condition, seed)
        out_dir = Path(dataset_dir) / cond_id
        # perturbed file keeps the source clip's name; the directory carries the condition
        audio_io.write_clip(
            audio_io.AudioClip(id=clip.id, samples=out.samples, sample_rate=out.sample_rate),
            out_dir,
        )
    return clip.id


def perturb_dataset(config: RunConfig, dataset_name: str, clean_key: str, ws: Workspace) -> dict[str, str]:
    """Write every missing condition's WAVs; returns condition -> stage key."""
    keys: dict[str, str] = {}
    todo: list[str] = []
    for cond in config.grid.conditions:
        key = _hash("perturb", clean_key, cond.id, str(config.seed))
        keys[cond.id] = key
        cond_dir = ws.audio_dir(dataset_name, cond.id)
        if _stamp_matches(cond_dir, key):
            log.info("cache hit: %s/%s", dataset_name, cond.id)
        else:
            cond_dir.mkdir(parents=True, exist_ok=True)
            for stale in cond_dir.glob("*.wav"):
                stale.unlink()
            todo.append(cond.id)
    if not todo:
        return keys

    clean_dir = ws.audio_dir(dataset_name, CLEAN)
    clip_paths = sorted(str(p) for p in clean_dir.glob("*.wav"))
    dataset_dir = str(ws.root / dataset_name)
    log.info("perturbing %s: %d clips x %d conditions", dataset_name, len(clip_paths), len(todo))
    if config.workers <= 1:
        for path in clip_paths:
            _perturb_clip_task(path, todo, config.seed, dataset_dir)
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [
                pool.submit(_perturb_clip_task, path, todo, config.seed, dataset_dir)
                for path in clip_paths
            ]
            for future in futures:
                future.result()
    for cond_id in todo:
        _write_stamp(ws.audio_dir(dataset_name, cond_id), keys[cond_id])
    return keys


# --- embed -----------------------------------------------------------------


def _embed_builtin_task(
    encoder_id: str, wav_dir: str, out_path: str, dataset: str, condition: str
) -> str:
    emb_set = embed.embed_wav_dir(encoder_id, wav_dir, dataset=dataset, condition=condition)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    embed.write_emb1(out_path, emb_set)
    return out_path


def _encoder_key(spec: embed.EncoderSpec) -> str:
    return _hash("encoder", spec.name, spec.source, str(spec.native_rate), str(spec.dim))


def embed_dataset(
    config: RunConfig,
    spec: embed.EncoderSpec,
    dataset_name: str,
    audio_keys: dict[str, str],
    ws: Workspace,
) -> None:
    """Produce one EMB1 file per condition (clean included) for one encoder."""
    conditions = [CLEAN] + config.grid.ids
    todo: list[tuple[str, str]] = []
    for cond_id in conditions:
        key = _hash("emb", audio_keys[cond_id], _encoder_key(spec))
        out_path = ws.emb_path(spec.name, dataset_name, cond_id)
        stamp = out_path.with_suffix(".emb1.stamp")
        if out_path.is_file() and stamp.is_file() and stamp.read_text() == key:
            log.info("cache hit: emb/%s/%s/%s", spec.name, dataset_name, cond_id)
            continue
        todo.append((cond_id, key))
    if not todo:
        return

    if spec.source_kind == "builtin":
        tasks = [
            (
                spec.source_arg,
                str(ws.audio_dir(dataset_name, cond_id)),
                str(ws.emb_path(spec.name, dataset_name, cond_id)),
                dataset_name,
                cond_id,
            )
            for cond_id, _ in todo
        ]
        if config.workers <= 1:
            for args in tasks:
                _embed_builtin_task(*args)
        else:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(_embed_builtin_task, *args) for args in tasks]
                for future in futures:
                    future.result()
    elif spec.source_kind == "bridge":
        for cond_id, _ in todo:
            out_path = ws.emb_path(spec.name, dataset_name, cond_id)
            out_path.parent.mkdir(parents=True, exist_ok=True)
            embed.embed_via_bridge(
                spec,
                ws.audio_dir(dataset_name, cond_id),
                out_path,
                dataset=dataset_name,
                condition=cond_id,
            )
    elif spec.source_kind == "files":
        src_root = Path(spec.source_arg)
        for cond_id, _ in todo:
            src = src_root / dataset_name / f"{cond_id}.emb1"
            if not src.is_file():
                raise FadprobeError(f"encoder {spec.name!r}: missing embedding file {src}")
            emb_set = embed.load_embeddings(
                src, encoder=spec.name, dataset=dataset_name, condition=cond_id
            )
            if emb_set.dim != spec.dim:
                raise FadprobeError(
                    f"encoder dim mismatch: {src} has {emb_set.dim}, spec says {spec.dim}"
                )
            out_path = ws.emb_path(spec.name, dataset_name, cond_id)
            out_path.parent.mkdir(parents=True, exist_ok=True)
            embed.write_emb1(out_path, emb_set)

    for cond_id, key in todo:
        stamp = ws.emb_path(spec.name, dataset_name, cond_id).with_suffix(".emb1.stamp")
        stamp.write_text(key)


# --- score -----------------------------------------------------------------


def score_encoder(
    config: RunConfig, spec: embed.EncoderSpec, datasets: list[str], ws: Workspace
) -> dict[str, Any]:
    missing = [
        cond_id
        for cond_id in [CLEAN] + config.grid.ids
        for dataset in datasets
        if not ws.emb_path(spec.name, dataset, cond_id).is_file()
    ]
    if missing:
        raise SuiteIncompleteError(sorted(set(missing)))
    results: list[fad.FadResult] = []
    for dataset in datasets:
        reference = embed.load_embeddings(
            ws.emb_path(spec.name, dataset, CLEAN),
            encoder=spec.name,
            dataset=dataset,
            condition=CLEAN,
        )
        for cond_id in config.grid.ids:
            perturbed = embed.load_embeddings(
                ws.emb_path(spec.name, dataset, cond_id),
                encoder=spec.name,
                dataset=dataset,
                condition=cond_id,
            )
            results.append(
                fad.fad_from_sets(reference, perturbed, config.regularize_covariance)
            )
    ctx = scoring.build_context(results, config.grid, config.policy)
    profile = scoring.axis_profile(results, ctx, config.grid)
    return {
        "fad_max": ctx.fad_max,
        "profile": profile.as_dict(),
        "results": [
            {
                "dataset": r.dataset,
                "condition": r.condition,
                "value": r.value,
                "mean_term": r.mean_term,
                "trace_term": r.trace_term,
                "clamped_eigs": r.clamped_eigs,
                "regularized": r.regularized,
            }
            for r in results
        ],
    }


def run_fingerprint(config: RunConfig, corpus_hashes: dict[str, str]) -> str:
    doc = {
        "kind": "fingerprint_input",
        "grid": config.grid.ids,
        "seed": config.seed,
        "policy": config.policy,
        "lufs_target": config.lufs_target,
        "regularize_covariance": config.regularize_covariance,
        "corpus_hashes": corpus_hashes,
        "encoders": sorted(
            (e.name, e.source, e.native_rate, e.dim) for e in config.active_encoders()
        ),
    }
    return hashlib.sha256(dumps_struct(doc).encode("utf-8")).hexdigest()


# --- stages and full run ---------------------------------------------------


def stage_prepare_and_perturb(config: RunConfig, ws: Workspace) -> dict[str, dict[str, str]]:
    """Returns per-dataset {condition or 'clean' -> stage key}."""
    audio_keys: dict[str, dict[str, str]] = {}
    for dataset in config.active_datasets():
        clean_key = prepare_clean(config, dataset.name, dataset.root, ws)
        keys = perturb_dataset(config, dataset.name, clean_key, ws)
        keys[CLEAN] = clean_key
        audio_keys[dataset.name] = keys
    return audio_keys


def recover_audio_keys(config: RunConfig, ws: Workspace) -> dict[str, dict[str, str]]:
    """Read stage keys from stamps already on disk (for standalone stages)."""
    audio_keys: dict[str, dict[str, str]] = {}
    for dataset in config.active_datasets():
        keys: dict[str, str] = {}
        for cond_id in [CLEAN] + config.grid.ids:
            stamp = ws.audio_dir(dataset.name, cond_id) / STAMP_NAME
            if not stamp.is_file():
                raise FadprobeError(
                    f"workspace missing {dataset.name}/{cond_id}; run the perturb stage first"
                )
            keys[cond_id] = load_struct(stamp)["key"]
        audio_keys[dataset.name] = keys
    return audio_keys


def stage_embed(
    config: RunConfig, ws: Workspace, audio_keys: dict[str, dict[str, str]]
) -> dict[str, str]:
    """Embed every (encoder, dataset); returns per-encoder failure messages."""
    failures: dict[str, str] = {}
    for spec in config.active_encoders():
        try:
            for dataset in config.active_datasets():
                embed_dataset(config, spec, dataset.name, audio_keys[dataset.name], ws)
        except FadprobeError as exc:
            log.error("encoder %s failed: %s", spec.name, exc)
            failures[spec.name] = str(exc)
    return failures


def stage_score(
    config: RunConfig, ws: Workspace, failures: dict[str, str], fingerprint: str
) -> dict[str, Any]:
    datasets = [d.name for d in config.active_datasets()]
    encoders_doc: dict[str, Any] = {}
    profiles: dict[str, Any] = {}
    absent = dict(failures)
    for spec in config.active_encoders():
        if spec.name in absent:
            continue
        try:
            scored = score_encoder(config, spec, datasets, ws)
        except (FadprobeError, OSError) as exc:
            log.error("scoring %s failed: %s", spec.name, exc)
            absent[spec.name] = str(exc)
            continue
        profiles[spec.name] = scored["profile"]
        encoders_doc[spec.name] = {
            "fad_max": scored["fad_max"],
            "results": scored["results"],
        }
    doc = {
        "kind": "scores",
        "fingerprint": fingerprint,
        "policy": config.policy,
        "seed": config.seed,
        "grid": config.grid.ids,
        "datasets": datasets,
        "encoders": encoders_doc,
        "profiles": profiles,
        "absent": absent,
        "provenance": {
            "covariance_divisor": "n-1",
            "regularize_covariance": config.regularize_covariance,
            "lufs_target": config.lufs_target,
            "eigenvalue_clamp_events": sum(
                r["clamped_eigs"]
                for enc in encoders_doc.values()
                for r in enc["results"]
            ),
        },
    }
    ws.root.mkdir(parents=True, exist_ok=True)
    dump_struct(doc, ws.scores_path)
    return doc


def stage_report(config: RunConfig, ws: Workspace) -> str:
    if not ws.scores_path.is_file():
        raise FadprobeError("workspace has no scores.struct; run the score stage first")
    doc = load_struct(ws.scores_path)
    if doc.get("grid") != config.grid.ids:
        raise FadprobeError("scores.struct grid differs from config grid; re-run the score stage")
    contexts = {}
    results: dict[str, list[fad.FadResult]] = {}
    for encoder, enc_doc in doc["encoders"].items():
        res = [
            fad.FadResult(
                value=r["value"],
                mean_term=r["mean_term"],
                trace_term=r["trace_term"],
                encoder=encoder,
                dataset=r["dataset"],
                condition=r["condition"],
                clamped_eigs=r["clamped_eigs"],
                regularized=r["regularized"],
            )
            for r in enc_doc["results"]
        ]
        results[encoder] = res
        contexts[encoder] = scoring.build_context(res, config.grid, doc["policy"])
    profiles = [
        scoring.AxisProfile(encoder=name, **doc["profiles"][name])
        for name in sorted(doc["profiles"])
    ]
    run_report = report.RunReport(
        run_id=doc["fingerprint"][:12],
        fingerprint=doc["fingerprint"],
        grid=config.grid,
        datasets=list(doc["datasets"]),
        profiles=profiles,
        contexts=contexts,
        results=results,
        provenance={"provenance": doc["provenance"], "policy": doc["policy"], "seed": doc["seed"]},
        absent_encoders=sorted(doc["absent"]),
    )
    return report.emit_run_report(run_report, ws.report_dir)


def run(config: RunConfig) -> int:
    """Full pipeline; 0 on success, 3 when some encoders failed, 1 on fatal."""
    ws = Workspace(config.workspace)
    try:
        audio_keys = stage_prepare_and_perturb(config, ws)
        corpus_hashes = {ds: keys[CLEAN] for ds, keys in audio_keys.items()}
        fingerprint = run_fingerprint(config, corpus_hashes)
        failures = stage_embed(config, ws, audio_keys)
        doc = stage_score(config, ws, failures, fingerprint)
        if not doc["profiles"]:
            log.error("no encoder produced scores; aborting")
            return EXIT_FATAL
        status = stage_report(config, ws)
    except FadprobeError as exc:
        log.error("fatal: %s", exc)
        return EXIT_FATAL
    return EXIT_PARTIAL if status == "partial" else EXIT_OK
