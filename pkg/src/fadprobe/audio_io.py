"""Corpus loading, loudness normalization, resampling, persistence.

Every downstream stage sees a canonical representation: mono float samples,
original duration, ids sorted lexicographically. Channels are downmixed by
equal-weight averaging before anything else happens.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import loudness, wavfile
from .errors import CorpusError, SilenceError
from .resample import resample_to_rate

log = logging.getLogger(__name__)

DEFAULT_LUFS_TARGET = -23.0
_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")


@dataclass(frozen=True)
class AudioClip:
    """Mono sample buffer with a stable, filesystem-safe identifier."""

    id: str
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError(f"clip {self.id!r}: samples must be non-empty 1-D")
        if self.sample_rate <= 0:
            raise ValueError(f"clip {self.id!r}: sample_rate must be positive")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class LoudnessReport:
    integrated_lufs: float
    gain_applied_db: float


def load_clip(path: str | Path, clip_id: str | None = None) -> AudioClip:
    """Read one WAV file, downmix to mono, keep the original duration."""
    path = Path(path)
    data, rate = wavfile.read_wav(path)
    mono = data.mean(axis=1) if data.shape[1] > 1 else data[:, 0]
    return AudioClip(id=clip_id or path.stem, samples=mono, sample_rate=rate)


def load_corpus(root: str | Path, manifest: list[str] | None = None) -> list[AudioClip]:
    """Load every WAV below root (or the manifest's paths), sorted by id.

    The manifest is a list of paths relative to root and overrides directory
    discovery; ids still sort lexicographically either way.
    """
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus root is not a directory: {root}")
    if manifest is not None:
        paths = [root / rel for rel in manifest]
        missing = [str(p) for p in paths if not p.is_file()]
        if missing:
            raise CorpusError("manifest entries not found: " + ", ".join(missing))
    else:
        paths = [p for p in root.rglob("*.wav") if p.is_file()]

    clips: dict[str, AudioClip] = {}
    for path in paths:
        clip_id = path.stem
        if not _ID_RE.match(clip_id):
            raise CorpusError(f"clip id {clip_id!r} not filesystem-safe ([A-Za-z0-9_-]): {path}")
        if clip_id in clips:
            raise CorpusError(f"duplicate clip id {clip_id!r}: {path}")
        clips[clip_id] = load_clip(path, clip_id)
    return [clips[k] for k in sorted(clips)]


def read_manifest(path: str | Path) -> list[str]:
    """Newline-delimited relative paths; blank lines ignored."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ln.strip() for ln in lines if ln.strip()]


def measure_lufs(clip: AudioClip) -> float:
    """Integrated loudness of the clip (BS.1770-4, mono weight 1.0)."""
    return loudness.integrated_lufs(clip.samples, clip.sample_rate)


def normalize_lufs(
    clip: AudioClip, target: float = DEFAULT_LUFS_TARGET
) -> tuple[AudioClip, LoudnessReport]:
    """Apply the pure gain that brings integrated loudness to target.

    No limiting and no clipping: embeddings consume real values, not a DAC,
    so samples may leave [-1, 1]. Raises SilenceError for immeasurable input.
    """
    measured = measure_lufs(clip)
    gain_db = target - measured
    gained = clip.samples * 10.0 ** (gain_db / 20.0)
    out = AudioClip(id=clip.id, samples=gained, sample_rate=clip.sample_rate)
    return out, LoudnessReport(integrated_lufs=measure_lufs(out), gain_applied_db=gain_db)


def normalize_corpus(
    clips: list[AudioClip], target: float = DEFAULT_LUFS_TARGET
) -> tuple[list[AudioClip], dict[str, LoudnessReport]]:
    """Normalize each clip; silent clips are dropped with a warning."""
    kept: list[AudioClip] = []
    reports: dict[str, LoudnessReport] = {}
    for clip in clips:
        try:
            out, report = normalize_lufs(clip, target)
        except SilenceError:
            log.warning("dropping clip %r: immeasurable (silence)", clip.id)
            continue
        kept.append(out)
        reports[clip.id] = report
    return kept, reports


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited rate conversion; identity when rates already match."""
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == clip.sample_rate:
        return clip
    y = resample_to_rate(clip.samples, clip.sample_rate, target_rate)
    return AudioClip(id=clip.id, samples=y, sample_rate=target_rate)


def write_clip(clip: AudioClip, directory: str | Path) -> Path:
    """Persist as 32-bit float mono WAV named `<clip_id>.wav`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{clip.id}.wav"
    wavfile.write_wav_float32(path, clip.samples, clip.sample_rate)
    return path
