"""WAV input for the bridge: 32-bit float (the toolkit's canonical
workspace encoding) plus 16-bit PCM, downmixed to mono."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np


class UnreadableWav(Exception):
    pass


def read_wav_mono(path: str | Path) -> tuple[np.ndarray, int]:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise UnreadableWav(f"{path}: {exc}") from exc
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise UnreadableWav(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        cid = blob[pos : pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body = blob[pos + 8 : pos + 8 + size]
        if cid == b"fmt " and fmt is None and len(body) >= 16:
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data" and data is None:
            data = body
        pos += 8 + size + (size & 1)
    if fmt is None or data is None:
        raise UnreadableWav(f"{path}: missing fmt/data chunk")

    tag, channels, rate, _, _, bits = fmt
    if channels < 1 or rate < 1:
        raise UnreadableWav(f"{path}: invalid fmt chunk")
    if tag == 3 and bits == 32:
        x = np.frombuffer(data[: len(data) // 4 * 4], dtype="<f4").astype(np.float64)
    elif tag == 1 and bits == 16:
        x = np.frombuffer(data[: len(data) // 2 * 2], dtype="<i2").astype(np.float64) / 32768.0
    else:
        raise UnreadableWav(f"{path}: unsupported encoding (tag {tag}, {bits}-bit)")
    frames = x.size // channels
    if frames == 0:
        raise UnreadableWav(f"{path}: empty data chunk")
    x = x[: frames * channels].reshape(frames, channels)
    return x.mean(axis=1), rate
