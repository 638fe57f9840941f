"""Built-in DSP conformance checks, exposed as the `verify-dsp` subcommand.

Each check regenerates a known test signal, runs the production transform,
and measures the outcome with an independent arithmetic oracle (power
ratios, steady-state sine magnitudes, envelope regression, duration
formulas). One PASS/FAIL line per check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import perturb
from .audio_io import AudioClip
from .loudness import integrated_lufs
from .perturb import NOISE_SNRS_DB
from .stft import HOP_SIZE


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _tone(freq: float, seconds: float, rate: int, amplitude: float = 0.5) -> np.ndarray:
    t = np.arange(int(seconds * rate)) / rate
    return amplitude * np.sin(2.0 * np.pi * freq * t)


def _steady_rms(x: np.ndarray) -> float:
    # skip the first/last quarter to dodge filter transients
    n = x.size
    seg = x[n // 4 : -n // 4]
    return float(np.sqrt(np.mean(seg * seg)))


def run_checks(seed: int = 0) -> list[CheckResult]:
    rate = 16000
    checks: list[CheckResult] = []
    base = AudioClip("verifytone", _tone(440.0, 5.0, rate), rate)

    # residual SNR for every grid SNR condition
    for snr_db in NOISE_SNRS_DB:
        cond = perturb.Condition("noise", {"snr_db": snr_db})
        out = perturb.apply(base, cond, seed)
        residual = out.samples - base.samples
        measured = 10.0 * math.log10(
            float(np.mean(base.samples**2)) / float(np.mean(residual**2))
        )
        checks.append(
            CheckResult(
                name=f"noise snr {snr_db} dB",
                passed=abs(measured - snr_db) <= 0.1,
                detail=f"measured {measured:+.3f} dB",
            )
        )

    # low-pass: -3.01 dB at cutoff, >= 11 dB an octave above
    cutoff = 2000.0
    at_cut = perturb.lowpass(AudioClip("v", _tone(cutoff, 4.0, rate), rate), cutoff)
    att = 20.0 * math.log10(_steady_rms(at_cut.samples) / _steady_rms(_tone(cutoff, 4.0, rate)))
    checks.append(
        CheckResult("lowpass -3 dB at cutoff", abs(att + 3.01) <= 0.2, f"{att:+.3f} dB")
    )
    above = perturb.lowpass(AudioClip("v", _tone(2 * cutoff, 4.0, rate), rate), cutoff)
    att2 = 20.0 * math.log10(
        _steady_rms(above.samples) / _steady_rms(_tone(2 * cutoff, 4.0, rate))
    )
    checks.append(
        CheckResult("lowpass slope at 2x cutoff", att2 <= -11.0, f"{att2:+.3f} dB")
    )

    # reverb impulse response decays 60 dB at rt60
    rt60 = 0.5
    ir = perturb.synth_reverb_ir(rt60, rate, perturb.keyed_rng(seed, "verifytone", "ir"))
    tail = ir[1:]
    win = int(0.01 * rate)
    n_win = tail.size // win
    rms = np.sqrt(np.mean(tail[: n_win * win].reshape(n_win, win) ** 2, axis=1))
    db = 20.0 * np.log10(rms / rms[0])
    t = (np.arange(n_win) + 0.5) * win / rate
    slope = float(np.polyfit(t, db, 1)[0])
    t60 = -60.0 / slope
    checks.append(
        CheckResult(
            "reverb envelope -60 dB at rt60",
            abs(t60 - rt60) <= 0.1 * rt60,
            f"fit t60 {t60:.3f} s (target {rt60} s)",
        )
    )

    # stretch and shuffle duration formulas
    for factor in (0.9, 1.1):
        out = perturb.time_stretch(base, factor)
        expected = base.samples.size / factor
        checks.append(
            CheckResult(
                f"stretch {factor}x duration",
                abs(out.samples.size - expected) <= HOP_SIZE,
                f"{out.samples.size} samples (expected {expected:.0f})",
            )
        )
    shuffled = perturb.shuffle_chunks(base, 1000, perturb.keyed_rng(seed, "verifytone", "sh"))
    expected = base.samples.size - 4 * int(0.01 * rate)
    checks.append(
        CheckResult(
            "shuffle 1000 ms duration",
            abs(shuffled.samples.size - expected) <= 1,
            f"{shuffled.samples.size} samples (expected {expected})",
        )
    )

    # reversal is a bit-exact involution
    twice = perturb.reverse(perturb.reverse(base))
    checks.append(
        CheckResult(
            "reverse involution",
            bool(np.array_equal(twice.samples, base.samples)),
            "bit-exact" if np.array_equal(twice.samples, base.samples) else "mismatch",
        )
    )

    # crossfaded shuffle holds a constant level
    const = AudioClip("verifyconst", np.full(5 * rate, 0.5), rate)
    out = perturb.shuffle_chunks(const, 250, perturb.keyed_rng(seed, "verifyconst", "sh"))
    deviation = float(np.max(np.abs(out.samples - 0.5)) / 0.5)
    checks.append(
        CheckResult(
            "shuffle constant level", deviation <= 0.01, f"max deviation {100*deviation:.3f}%"
        )
    )

    # loudness conformance: 997 Hz full-scale sine reads -3.01 LUFS
    tone = _tone(997.0, 10.0, 48000, amplitude=1.0)
    lufs = integrated_lufs(tone, 48000)
    checks.append(
        CheckResult("997 Hz tone loudness", abs(lufs + 3.01) <= 0.1, f"{lufs:.3f} LUFS")
    )
    gain = 10.0 ** ((-23.0 - lufs) / 20.0)
    renorm = integrated_lufs(tone * gain, 48000)
    checks.append(
        CheckResult(
            "normalization to -23 LUFS", abs(renorm + 23.0) <= 0.2, f"{renorm:.3f} LUFS"
        )
    )

    return checks
