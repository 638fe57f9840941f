"""Minimal RIFF/WAVE codec for linear PCM.

Read: 8/16/24-bit integer and 32-bit IEEE float payloads, any channel count.
Write: 32-bit float mono (the pipeline's canonical workspace encoding).

Integer decode convention: divide by 2^(bits-1), so negative full scale maps
to -1.0 exactly and positive full scale to just under +1.0. 8-bit WAV is
unsigned and re-centered before scaling.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import AudioFormatError

_FMT_PCM = 0x0001
_FMT_FLOAT = 0x0003
_FMT_EXTENSIBLE = 0xFFFE

_CODEC_NAMES = {
    0x0002: "ADPCM",
    0x0006: "A-law",
    0x0007: "mu-law",
    0x0011: "IMA ADPCM",
    0x0055: "MPEG Layer 3",
}


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a WAV file into (samples, rate).

    Returns samples as float64 with shape (frames, channels), amplitudes in
    [-1, 1] nominal range for integer payloads.
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise AudioFormatError(f"unreadable file: {path}: {exc}") from exc

    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise AudioFormatError(f"not a RIFF/WAVE file: {path}")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        cid = blob[pos : pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body = blob[pos + 8 : pos + 8 + size]
        if cid == b"fmt " and fmt is None:
            if len(body) < 16:
                raise AudioFormatError(f"truncated fmt chunk: {path}")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == _FMT_EXTENSIBLE and len(body) >= 40:
                # SubFormat GUID starts with the u16 format tag
                (subtag,) = struct.unpack_from("<H", body, 24)
                fmt = (subtag,) + fmt[1:]
        elif cid == b"data" and data is None:
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or data is None:
        raise AudioFormatError(f"missing fmt/data chunk: {path}")

    tag, channels, rate, _byte_rate, _block_align, bits = fmt
    if channels < 1 or rate < 1:
        raise AudioFormatError(f"invalid fmt chunk ({channels} ch, {rate} Hz): {path}")

    if tag == _FMT_FLOAT and bits == 32:
        raw = np.frombuffer(data[: (len(data) // 4) * 4], dtype="<f4")
        samples = raw.astype(np.float64)
    elif tag == _FMT_PCM and bits == 16:
        raw = np.frombuffer(data[: (len(data) // 2) * 2], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif tag == _FMT_PCM and bits == 8:
        raw = np.frombuffer(data, dtype=np.uint8)
        samples = (raw.astype(np.float64) - 128.0) / 128.0
    elif tag == _FMT_PCM and bits == 24:
        usable = (len(data) // 3) * 3
        b = np.frombuffer(data[:usable], dtype=np.uint8).reshape(-1, 3)
        vals = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        vals = np.where(vals >= 1 << 23, vals - (1 << 24), vals)
        samples = vals.astype(np.float64) / 8388608.0
    else:
        name = _CODEC_NAMES.get(tag, f"format tag 0x{tag:04X}")
        raise AudioFormatError(f"unsupported codec ({name}, {bits}-bit): {path}")

    frames = samples.size // channels
    if frames == 0:
        raise AudioFormatError(f"empty data chunk: {path}")
    return samples[: frames * channels].reshape(frames, channels), rate


def write_wav_float32(path: str | Path, samples: np.ndarray, rate: int) -> None:
    """Write mono samples as a 32-bit IEEE float WAV."""
    x = np.asarray(samples, dtype="<f4").reshape(-1)
    payload = x.tobytes()
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 4 + 8 + 16 + 8 + len(payload)),
            b"WAVE",
            b"fmt ",
            struct.pack("<IHHIIHH", 16, _FMT_FLOAT, 1, rate, rate * 4, 4, 32),
            b"data",
            struct.pack("<I", len(payload)),
        ]
    )
    Path(path).write_bytes(header + payload)
