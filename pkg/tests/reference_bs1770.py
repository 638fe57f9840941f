"""Independent BS.1770-4 integrated-loudness oracle for the tests.

Deliberately a different implementation from the package: it uses the
standard's published 48 kHz coefficient table verbatim (resampling the
input to 48 kHz with scipy's own polyphase resampler when needed), strided
block windows, and sosfilt. Keep it independent of fadprobe internals.
"""

import numpy as np
from scipy.signal import resample_poly, sosfilt

# Pre-filter (shelf) and RLB high-pass at 48 kHz, straight from the standard.
_SOS_48K = np.array(
    [
        [1.53512485958697, -2.69169618940638, 1.19839281085285,
         1.0, -1.69065929318241, 0.73248077421585],
        [1.0, -2.0, 1.0,
         1.0, -1.99004745483398, 0.99007225036621],
    ]
)


def reference_integrated_lufs(samples: np.ndarray, rate: int) -> float:
    x = np.asarray(samples, dtype=np.float64)
    if rate != 48000:
        x = resample_poly(x, 48000, rate)
    y = sosfilt(_SOS_48K, x)

    block, hop = 19200, 4800  # 400 ms / 100 ms at 48 kHz
    if y.size < block:
        raise ValueError("too short for one gating block")
    windows = np.lib.stride_tricks.sliding_window_view(y, block)[::hop]
    z = np.mean(windows * windows, axis=1)
    with np.errstate(divide="ignore"):
        loud = -0.691 + 10.0 * np.log10(np.maximum(z, 1e-300))

    abs_gated = z[loud > -70.0]
    if abs_gated.size == 0:
        raise ValueError("all blocks below the absolute gate")
    gamma_r = -0.691 + 10.0 * np.log10(abs_gated.mean()) - 10.0
    gated = z[(loud > -70.0) & (loud > gamma_r)]
    if gated.size == 0:
        raise ValueError("all blocks below the relative gate")
    return -0.691 + 10.0 * np.log10(gated.mean())
