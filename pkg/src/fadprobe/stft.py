"""Shared STFT stack for every framed transform.

One window/hop pair (1024/256 periodic Hann) is used by the phase vocoder,
the formant shifter, and the built-in encoders, so frame geometry never
varies between them.
"""

from __future__ import annotations

import numpy as np

from .errors import TooShortError

WINDOW_SIZE = 1024
HOP_SIZE = 256


def hann_window(size: int = WINDOW_SIZE) -> np.ndarray:
    # periodic Hann, the vocoder-friendly variant
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(size) / size)


def frame_count(n_samples: int, window: int = WINDOW_SIZE, hop: int = HOP_SIZE) -> int:
    if n_samples < window:
        raise TooShortError(f"too short for STFT ({n_samples} < {window} samples)")
    return 1 + (n_samples - window) // hop


def stft(x: np.ndarray, window: int = WINDOW_SIZE, hop: int = HOP_SIZE) -> np.ndarray:
    """Complex spectrogram, shape (window//2 + 1, n_frames). No centering."""
    n_frames = frame_count(x.size, window, hop)
    w = hann_window(window)
    idx = np.arange(window)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx] * w
    return np.fft.rfft(frames, axis=1).T


def istft(spec: np.ndarray, window: int = WINDOW_SIZE, hop: int = HOP_SIZE) -> np.ndarray:
    """Weighted overlap-add inverse with squared-window normalization."""
    n_frames = spec.shape[1]
    w = hann_window(window)
    frames = np.fft.irfft(spec.T, n=window, axis=1) * w
    out_len = (n_frames - 1) * hop + window
    out = np.zeros(out_len)
    norm = np.zeros(out_len)
    wsq = w * w
    if window % hop == 0:
        # hop divides the window: accumulate hop-sized lanes, one per overlap offset
        lanes = window // hop
        blocks = out.reshape(n_frames - 1 + lanes, hop)
        nblocks = norm.reshape(n_frames - 1 + lanes, hop)
        for lane in range(lanes):
            blocks[lane : lane + n_frames] += frames[:, lane * hop : (lane + 1) * hop]
            nblocks[lane : lane + n_frames] += wsq[lane * hop : (lane + 1) * hop]
    else:
        for m in range(n_frames):
            start = m * hop
            out[start : start + window] += frames[m]
            norm[start : start + window] += wsq
    threshold = 1e-8 * (norm.max() if norm.size else 1.0)
    nonzero = norm > threshold
    out[nonzero] /= norm[nonzero]
    return out


def pad_to_frames(x: np.ndarray, window: int = WINDOW_SIZE, hop: int = HOP_SIZE) -> np.ndarray:
    """Zero-pad so the final hop boundary lands exactly on the signal end."""
    if x.size < window:
        raise TooShortError(f"too short for STFT ({x.size} < {window} samples)")
    rem = (x.size - window) % hop
    if rem == 0:
        return x
    return np.concatenate([x, np.zeros(hop - rem)])


def fit_length(x: np.ndarray, n: int) -> np.ndarray:
    """Trim or zero-pad to exactly n samples."""
    if x.size == n:
        return x
    if x.size > n:
        return x[:n]
    return np.concatenate([x, np.zeros(n - x.size)])
