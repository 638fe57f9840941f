"""Band-limited sample-rate conversion.

Polyphase windowed-sinc design: Kaiser window (beta = 12), 128 taps per
phase, cutoff at 0.45x the lower of the two rates (0.9 of the lower
Nyquist). scipy's upfirdn does the polyphase convolution; the filter itself
is designed here. Matching rates pass through untouched.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import gcd

import numpy as np
from scipy.signal import upfirdn

TAPS_PER_PHASE = 128  # contract floor is 64; 128 keeps the passband flat to ~0.40x rate
KAISER_BETA = 12.0
REL_CUTOFF = 0.9  # fraction of the lower Nyquist


@lru_cache(maxsize=64)
def _design(up: int, down: int) -> np.ndarray:
    # Cutoff in cycles/sample on the upsampled grid (rate = in_rate * up):
    # 0.45 * min(in_rate, out_rate) / (in_rate * up) = 0.45 * min(1, up/down) / up
    fc = 0.5 * REL_CUTOFF * min(1.0, up / down) / up
    half = (TAPS_PER_PHASE * up) // 2
    n = np.arange(-half, half + 1)
    h = 2.0 * fc * np.sinc(2.0 * fc * n) * np.kaiser(2 * half + 1, KAISER_BETA)
    return h * (up / h.sum())  # unity DC gain after x`up` zero-stuffing


def resample_rational(x: np.ndarray, up: int, down: int) -> np.ndarray:
    """Resample 1-D x by the rational factor up/down.

    Output length is ceil(len(x) * up / down); the filter's group delay is
    removed so sample k sits at input time k * down / up.
    """
    if up == down:
        return np.asarray(x, dtype=np.float64)
    g = gcd(up, down)
    up, down = up // g, down // g
    x = np.asarray(x, dtype=np.float64)
    h = _design(up, down)
    half = (h.size - 1) // 2
    n_out = -(-x.size * up // down)
    # Zero-pad the filter head so the (half-sample) delay lands on the output grid.
    n_pre = (down - half % down) % down
    n_pre_remove = (half + n_pre) // down

    def _outlen(nh: int) -> int:
        return ((x.size - 1) * up + nh) // down + 1

    n_post = 0
    while _outlen(h.size + n_pre + n_post) < n_out + n_pre_remove:
        n_post += 1
    hp = np.concatenate([np.zeros(n_pre), h, np.zeros(n_post)])
    y = upfirdn(hp, x, up, down)
    return y[n_pre_remove : n_pre_remove + n_out]


def resample_to_rate(x: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    """Convert between integer sample rates. Identity is bit-exact."""
    if rate_in <= 0 or rate_out <= 0:
        raise ValueError("sample rates must be positive")
    if rate_in == rate_out:
        return np.asarray(x, dtype=np.float64)
    return resample_rational(x, rate_out, rate_in)


def resample_by_factor(x: np.ndarray, factor: float, max_denominator: int = 1000) -> np.ndarray:
    """Resample so the output is ~factor times as long (rational approximation)."""
    frac = Fraction(factor).limit_denominator(max_denominator)
    return resample_rational(x, frac.numerator, frac.denominator)
