"""Clip-level embeddings: built-in encoders, EMB1 files, bridge invocation.

The two built-in encoders realize the invariance contrast the toolkit is
built to expose: `melstats` (temporal mean of a log-mel spectrogram) is
order-invariant by construction, `envseq` (normalized frame-energy contour)
is order-sensitive by construction. Real encoders arrive through the
bridge subprocess contract or as precomputed EMB1 files.
"""

from __future__ import annotations

import logging
import shlex
import struct
import subprocess
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .audio_io import AudioClip, load_clip, resample
from .errors import BridgeError, CorpusError, EmbeddingFormatError, TooShortError
from .stft import HOP_SIZE, WINDOW_SIZE, stft

log = logging.getLogger(__name__)

EMB1_MAGIC = b"FEMB"
EMB1_VERSION = 1

MELSTATS_BANDS = 64
ENVSEQ_POINTS = 32

# The six reference encoders: (native rate, embedding dim).
KNOWN_ENCODERS = {
    "audiomae": (16000, 768),
    "encodec": (24000, 128),
    "wav2vec2": (16000, 768),
    "vggish": (16000, 128),
    "clap": (48000, 512),
    "whisper": (16000, 1280),
}

BUILTIN_ENCODERS = {
    "melstats": (16000, MELSTATS_BANDS),
    "envseq": (16000, ENVSEQ_POINTS),
}


@dataclass(frozen=True)
class EncoderSpec:
    """Identity, native rate, dimensionality, and where embeddings come from."""

    name: str
    native_rate: int
    dim: int
    source: str  # builtin:<id> | files:<path> | bridge:<command>

    def __post_init__(self):
        if self.native_rate <= 0 or self.dim <= 0:
            raise ValueError(f"encoder {self.name!r}: rate and dim must be positive")
        kind = self.source.split(":", 1)[0]
        if kind not in ("builtin", "files", "bridge"):
            raise ValueError(f"encoder {self.name!r}: unknown source {self.source!r}")
        expected = KNOWN_ENCODERS.get(self.name.lower())
        if expected is not None and (self.native_rate, self.dim) != expected:
            raise ValueError(
                f"encoder {self.name!r} must use rate/dim {expected}, "
                f"got ({self.native_rate}, {self.dim})"
            )

    @property
    def source_kind(self) -> str:
        return self.source.split(":", 1)[0]

    @property
    def source_arg(self) -> str:
        return self.source.split(":", 1)[1]


def builtin_spec(encoder_id: str) -> EncoderSpec:
    rate, dim = BUILTIN_ENCODERS[encoder_id]
    return EncoderSpec(name=encoder_id, native_rate=rate, dim=dim, source=f"builtin:{encoder_id}")


@dataclass(frozen=True)
class EmbeddingSet:
    """N x d matrix of clip embeddings for one (encoder, condition, dataset)."""

    encoder: str
    dataset: str
    condition: str
    ids: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.ids):
            raise ValueError("matrix rows must match ids")
        if len(self.ids) < 2:
            raise CorpusError("insufficient corpus (need at least 2 embeddings)")
        if not np.all(np.isfinite(self.matrix)):
            bad = self.ids[int(np.argwhere(~np.isfinite(self.matrix))[0][0])]
            raise EmbeddingFormatError(f"non-finite embedding: {bad}")
        if list(self.ids) != sorted(self.ids):
            raise ValueError("ids must be sorted lexicographically")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


# --- built-in encoders -----------------------------------------------------


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=16)
def mel_filterbank(n_bands: int, rate: int, n_fft: int = WINDOW_SIZE) -> np.ndarray:
    """Triangular filters on the mel scale spanning 0..Nyquist."""
    n_bins = n_fft // 2 + 1
    edges_hz = _mel_to_hz(np.linspace(0.0, _hz_to_mel(rate / 2.0), n_bands + 2))
    bin_hz = np.arange(n_bins) * rate / n_fft
    fb = np.zeros((n_bands, n_bins))
    for b in range(n_bands):
        lo, mid, hi = edges_hz[b], edges_hz[b + 1], edges_hz[b + 2]
        up = (bin_hz - lo) / max(mid - lo, 1e-12)
        down = (hi - bin_hz) / max(hi - mid, 1e-12)
        fb[b] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


def _embed_melstats(clip: AudioClip) -> np.ndarray:
    spec = stft(clip.samples)
    power = np.abs(spec) ** 2
    fb = mel_filterbank(MELSTATS_BANDS, clip.sample_rate)
    mel = fb @ power
    return np.log1p(mel).mean(axis=1)


def _embed_envseq(clip: AudioClip) -> np.ndarray:
    x = clip.samples
    n_frames = 1 + (x.size - WINDOW_SIZE) // HOP_SIZE
    if n_frames < 1:
        raise TooShortError("too short for STFT")
    idx = np.arange(WINDOW_SIZE)[None, :] + HOP_SIZE * np.arange(n_frames)[:, None]
    energy = (x[idx] ** 2).sum(axis=1)
    pos = np.linspace(0.0, 1.0, ENVSEQ_POINTS)
    src = np.linspace(0.0, 1.0, n_frames) if n_frames > 1 else np.array([0.0])
    contour = np.interp(pos, src, energy)
    peak = contour.max()
    return contour / peak if peak > 0.0 else contour


_BUILTIN_FNS = {"melstats": _embed_melstats, "envseq": _embed_envseq}


def embed_builtin(
    encoder_id: str, clips: list[AudioClip], dataset: str = "", condition: str = "clean"
) -> EmbeddingSet:
    """Embed clips with a built-in encoder, resampling to its native rate.

    Clips too short for one STFT window are excluded with a warning; fewer
    than two survivors is an error.
    """
    if encoder_id not in _BUILTIN_FNS:
        raise ValueError(f"unknown builtin encoder {encoder_id!r}")
    spec = builtin_spec(encoder_id)
    fn = _BUILTIN_FNS[encoder_id]
    rows: dict[str, np.ndarray] = {}
    for clip in clips:
        try:
            rows[clip.id] = fn(resample(clip, spec.native_rate))
        except TooShortError:
            log.warning("excluding clip %r: too short for STFT", clip.id)
    if len(rows) < 2:
        raise CorpusError("insufficient corpus (need at least 2 embeddings)")
    ids = tuple(sorted(rows))
    matrix = np.vstack([rows[i] for i in ids])
    return EmbeddingSet(
        encoder=spec.name, dataset=dataset, condition=condition, ids=ids, matrix=matrix
    )


def embed_wav_dir(
    encoder_id: str, wav_dir: str | Path, dataset: str = "", condition: str = "clean"
) -> EmbeddingSet:
    clips = [load_clip(p) for p in sorted(Path(wav_dir).glob("*.wav"))]
    return embed_builtin(encoder_id, clips, dataset=dataset, condition=condition)


# --- EMB1 interchange format -----------------------------------------------
#
# Little-endian layout:
#   magic 'FEMB' | version u32 = 1 | dim u32 | count u32 | id-table length u32
#   | id table: count UTF-8 ids joined by '\n' (no trailing newline)
#   | count*dim float32 values, row-major, row i <-> id i


def write_emb1(path: str | Path, emb: EmbeddingSet) -> None:
    id_blob = "\n".join(emb.ids).encode("utf-8")
    header = EMB1_MAGIC + struct.pack(
        "<IIII", EMB1_VERSION, emb.dim, len(emb.ids), len(id_blob)
    )
    payload = np.ascontiguousarray(emb.matrix, dtype="<f4").tobytes()
    Path(path).write_bytes(header + id_blob + payload)


def load_embeddings(
    path: str | Path, encoder: str = "", dataset: str = "", condition: str = ""
) -> EmbeddingSet:
    """Parse an EMB1 file; rows are re-sorted to lexicographic id order."""
    blob = Path(path).read_bytes()
    if len(blob) < 20 or blob[:4] != EMB1_MAGIC:
        raise EmbeddingFormatError(f"unrecognized format: {path}")
    version, dim, count, id_len = struct.unpack_from("<IIII", blob, 4)
    if version != EMB1_VERSION:
        raise EmbeddingFormatError(f"unrecognized format (version {version}): {path}")
    id_end = 20 + id_len
    need = id_end + count * dim * 4
    if len(blob) < need:
        raise EmbeddingFormatError(f"unrecognized format (truncated): {path}")
    ids = blob[20:id_end].decode("utf-8").split("\n") if id_len else []
    if len(ids) != count:
        raise EmbeddingFormatError(f"unrecognized format (id table count): {path}")
    matrix = (
        np.frombuffer(blob[id_end:need], dtype="<f4").reshape(count, dim).astype(np.float64)
    )
    order = np.argsort(ids)
    ids = tuple(ids[i] for i in order)
    matrix = matrix[order]
    if not np.all(np.isfinite(matrix)):
        bad = ids[int(np.argwhere(~np.isfinite(matrix))[0][0])]
        raise EmbeddingFormatError(f"non-finite embedding: {bad}")
    return EmbeddingSet(
        encoder=encoder, dataset=dataset, condition=condition, ids=ids, matrix=matrix
    )


# --- external bridge -------------------------------------------------------


def embed_via_bridge(
    spec: EncoderSpec,
    wav_dir: str | Path,
    out_file: str | Path,
    dataset: str = "",
    condition: str = "clean",
) -> EmbeddingSet:
    """Run the bridge command and validate what it wrote.

    Contract: `<command> --encoder <name> --input-dir <dir> --output <path>
    --sample-rate <rate>`, embedding every *.wav in the directory,
    mean-pooling frame-level outputs over time, exiting 0.
    """
    if spec.source_kind != "bridge":
        raise ValueError(f"encoder {spec.name!r} is not bridge-sourced")
    wav_dir = Path(wav_dir)
    out_file = Path(out_file)
    cmd = shlex.split(spec.source_arg) + [
        "--encoder", spec.name,
        "--input-dir", str(wav_dir),
        "--output", str(out_file),
        "--sample-rate", str(spec.native_rate),
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        tail = (proc.stderr or proc.stdout or "").strip()[-500:]
        raise BridgeError(f"bridge failed (exit {proc.returncode}): {tail}")
    emb = load_embeddings(out_file, encoder=spec.name, dataset=dataset, condition=condition)
    if emb.dim != spec.dim:
        raise EmbeddingFormatError(
            f"encoder dim mismatch: bridge wrote {emb.dim}, spec says {spec.dim}"
        )
    expected = sorted(p.stem for p in wav_dir.glob("*.wav"))
    if list(emb.ids) != expected:
        missing = sorted(set(expected) - set(emb.ids))
        extra = sorted(set(emb.ids) - set(expected))
        parts = []
        if missing:
            parts.append("missing: " + ", ".join(missing))
        if extra:
            parts.append("extra: " + ", ".join(extra))
        raise EmbeddingFormatError("manifest mismatch (" + "; ".join(parts) + ")")
    return emb
