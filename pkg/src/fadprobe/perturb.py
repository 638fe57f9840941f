"""The perturbation suite and its canonical condition grid.

Eight transform kinds, every one a deterministic function of
(clip, condition, seed). Randomness comes from a counter-based Philox
stream keyed by hashing (seed, clip id, condition id), so outputs do not
depend on execution order or parallelism.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.signal import fftconvolve, lfilter

from .audio_io import AudioClip
from .errors import PerturbationError
from .resample import resample_by_factor
from .stft import HOP_SIZE, WINDOW_SIZE, fit_length, istft, pad_to_frames, stft

AXES = ("recall", "precision", "semantic", "structural")
CROSSFADE_S = 0.010

NOISE_SNRS_DB = (60, 40, 20, 10, 0, -5)
LOWPASS_CUTOFFS_HZ = (8000, 6000, 4000, 2000, 1000)
REVERB_RT60S_S = (0.1, 0.2, 0.25, 0.4, 0.5, 0.6, 0.8, 1.0, 2.0)
PITCH_SEMITONES = (-8, -4, -2, -1, 1, 2, 4, 8)
STRETCH_FACTORS = (0.9, 1.1)
FORMANT_FACTORS = (1.3, 1.4)
SHUFFLE_CHUNKS_MS = (1000, 500, 250, 100)

_RECALL_PITCH_MAX_ST = 2


def _fmt_factor(x: float) -> str:
    # one decimal unless the value genuinely needs two (0.25 does, 1.0 keeps its .0)
    return f"{x:.1f}" if abs(round(x, 1) - x) < 1e-9 else f"{x:.2f}"


def _axis_for(kind: str, params: dict[str, Any]) -> str:
    if kind in ("noise", "lowpass", "reverb"):
        return "precision"
    if kind == "pitch":
        return "recall" if abs(params["semitones"]) <= _RECALL_PITCH_MAX_ST else "semantic"
    if kind == "stretch":
        return "recall"
    if kind == "formant":
        return "semantic"
    if kind in ("reverse", "shuffle"):
        return "structural"
    raise ValueError(f"unknown perturbation kind {kind!r}")


def _format_id(kind: str, params: dict[str, Any]) -> str:
    if kind == "noise":
        return f"noise_snr_{params['snr_db']}dB"
    if kind == "lowpass":
        return f"lowpass_{params['cutoff_hz']}hz"
    if kind == "reverb":
        return f"reverb_rt60_{_fmt_factor(params['rt60_s'])}s"
    if kind == "pitch":
        return f"pitch_{params['semitones']:+d}st"
    if kind == "stretch":
        return f"stretch_{_fmt_factor(params['factor'])}x"
    if kind == "formant":
        return f"formant_{_fmt_factor(params['factor'])}x"
    if kind == "reverse":
        return "reverse"
    if kind == "shuffle":
        return f"shuffle_{params['chunk_ms']}ms"
    raise ValueError(f"unknown perturbation kind {kind!r}")


@dataclass(frozen=True)
class Condition:
    """One perturbation: kind, parameters, canonical id, evaluation axis."""

    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    @property
    def id(self) -> str:
        return _format_id(self.kind, self.params)

    @property
    def axis(self) -> str:
        return _axis_for(self.kind, self.params)

    def __hash__(self):
        return hash(self.id)

    def __eq__(self, other):
        return isinstance(other, Condition) and self.id == other.id


_ID_PATTERNS: list[tuple[re.Pattern, str, Any]] = [
    (re.compile(r"^noise_snr_(-?\d+)dB$"), "noise", lambda m: {"snr_db": int(m.group(1))}),
    (re.compile(r"^lowpass_(\d+)hz$"), "lowpass", lambda m: {"cutoff_hz": int(m.group(1))}),
    (re.compile(r"^reverb_rt60_(\d+\.\d{1,2})s$"), "reverb", lambda m: {"rt60_s": float(m.group(1))}),
    (re.compile(r"^pitch_([+-]\d+)st$"), "pitch", lambda m: {"semitones": int(m.group(1))}),
    (re.compile(r"^stretch_(\d+\.\d{1,2})x$"), "stretch", lambda m: {"factor": float(m.group(1))}),
    (re.compile(r"^formant_(\d+\.\d{1,2})x$"), "formant", lambda m: {"factor": float(m.group(1))}),
    (re.compile(r"^reverse$"), "reverse", lambda m: {}),
    (re.compile(r"^shuffle_(\d+)ms$"), "shuffle", lambda m: {"chunk_ms": int(m.group(1))}),
]


def parse_condition_id(condition_id: str) -> Condition:
    for pattern, kind, extract in _ID_PATTERNS:
        m = pattern.match(condition_id)
        if m:
            return Condition(kind=kind, params=extract(m))
    raise ValueError(f"unknown condition id {condition_id!r}")


@dataclass(frozen=True)
class ConditionGrid:
    conditions: tuple[Condition, ...]

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.conditions]

    def by_id(self, condition_id: str) -> Condition:
        for c in self.conditions:
            if c.id == condition_id:
                return c
        raise KeyError(condition_id)

    def axis_counts(self) -> dict[str, int]:
        counts = {axis: 0 for axis in AXES}
        for c in self.conditions:
            counts[c.axis] += 1
        return counts


def default_grid() -> ConditionGrid:
    """The fixed 37-condition suite, in canonical order."""
    conds: list[Condition] = []
    conds += [Condition("noise", {"snr_db": s}) for s in NOISE_SNRS_DB]
    conds += [Condition("lowpass", {"cutoff_hz": c}) for c in LOWPASS_CUTOFFS_HZ]
    conds += [Condition("reverb", {"rt60_s": t}) for t in REVERB_RT60S_S]
    conds += [Condition("pitch", {"semitones": s}) for s in PITCH_SEMITONES]
    conds += [Condition("stretch", {"factor": f}) for f in STRETCH_FACTORS]
    conds += [Condition("formant", {"factor": f}) for f in FORMANT_FACTORS]
    conds.append(Condition("reverse"))
    conds += [Condition("shuffle", {"chunk_ms": m}) for m in SHUFFLE_CHUNKS_MS]
    return ConditionGrid(conditions=tuple(conds))


def keyed_rng(seed: int, clip_id: str, condition_id: str) -> np.random.Generator:
    """Philox generator keyed by hash(seed, clip id, condition id)."""
    digest = hashlib.sha256(f"{seed}|{clip_id}|{condition_id}".encode()).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# --- transform kinds -------------------------------------------------------


def add_noise(clip: AudioClip, snr_db: float, rng: np.random.Generator) -> AudioClip:
    """Additive white Gaussian noise at an exact signal-to-noise ratio.

    The drawn noise is rescaled to unit mean square before applying the SNR
    gain, so the realized power ratio matches the target regardless of clip
    length.
    """
    x = clip.samples
    p_signal = float(np.mean(x * x))
    if p_signal <= 0.0:
        raise PerturbationError("SNR undefined for silence")
    noise = rng.standard_normal(x.size)
    noise /= math.sqrt(float(np.mean(noise * noise)))
    noise *= math.sqrt(p_signal * 10.0 ** (-snr_db / 10.0))
    return AudioClip(id=clip.id, samples=x + noise, sample_rate=clip.sample_rate)


def lowpass(clip: AudioClip, cutoff_hz: float) -> AudioClip:
    """Single causal RBJ-cookbook second-order low-pass, Q = 1/sqrt(2).

    Pass-through identity when the cutoff reaches Nyquist.
    """
    fs = clip.sample_rate
    if cutoff_hz >= 0.5 * fs:
        return clip
    q = 1.0 / math.sqrt(2.0)
    w0 = 2.0 * math.pi * cutoff_hz / fs
    alpha = math.sin(w0) / (2.0 * q)
    cosw0 = math.cos(w0)
    b = np.array([(1 - cosw0) / 2, 1 - cosw0, (1 - cosw0) / 2])
    a = np.array([1 + alpha, -2 * cosw0, 1 - alpha])
    y = lfilter(b / a[0], a / a[0], clip.samples)
    return AudioClip(id=clip.id, samples=y, sample_rate=fs)


def synth_reverb_ir(rt60_s: float, rate: int, rng: np.random.Generator) -> np.ndarray:
    """Unit direct impulse plus an exponentially decaying noise tail.

    The tail envelope falls 60 dB at rt60, runs for 1.5x rt60, and is scaled
    to a 0 dB direct-to-reverberant energy ratio.
    """
    tail_len = int(round(1.5 * rt60_s * rate))
    ir = np.zeros(1 + max(tail_len, 0))
    ir[0] = 1.0
    if tail_len > 0:
        t = np.arange(1, tail_len + 1) / rate
        tail = rng.standard_normal(tail_len) * 10.0 ** (-3.0 * t / rt60_s)
        energy = float(np.sum(tail * tail))
        if energy > 0.0:
            ir[1:] = tail / math.sqrt(energy)
    return ir


def reverb(clip: AudioClip, rt60_s: float, rng: np.random.Generator) -> AudioClip:
    if rt60_s <= 0.0:
        raise PerturbationError("rt60 must be positive")
    ir = synth_reverb_ir(rt60_s, clip.sample_rate, rng)
    wet = fftconvolve(clip.samples, ir)[: clip.samples.size]
    rms_in = math.sqrt(float(np.mean(clip.samples**2)))
    rms_out = math.sqrt(float(np.mean(wet**2)))
    if rms_out > 0.0:
        wet *= rms_in / rms_out
    return AudioClip(id=clip.id, samples=wet, sample_rate=clip.sample_rate)


def _phase_vocoder(x: np.ndarray, rate: float, n_out: int) -> np.ndarray:
    """Resynthesize exactly n_out samples at `rate` times playback speed.

    Output frame positions walk the input spectrogram in steps of `rate`,
    clamping at the final frame, so the tail sustains real content instead
    of zero padding (zero tails would register as artificial envelope
    structure downstream).
    """
    spec = stft(x)
    n_bins, n_frames = spec.shape
    n_out_frames = max(1, math.ceil((n_out - WINDOW_SIZE) / HOP_SIZE) + 1)
    steps = np.minimum(np.arange(n_out_frames) * rate, n_frames - 1)

    mags = np.abs(spec)
    phases = np.angle(spec)
    lo = steps.astype(int)
    hi = np.minimum(lo + 1, n_frames - 1)
    frac = steps - lo

    mag = (1.0 - frac)[None, :] * mags[:, lo] + frac[None, :] * mags[:, hi]
    expected = (2.0 * np.pi * HOP_SIZE * np.arange(n_bins) / WINDOW_SIZE)[:, None]
    dphi = phases[:, hi] - phases[:, lo] - expected
    dphi -= 2.0 * np.pi * np.round(dphi / (2.0 * np.pi))
    increments = expected + dphi
    # phase at output frame m accumulates every earlier frame's advance
    phase = phases[:, 0:1] + np.concatenate(
        [np.zeros((n_bins, 1)), np.cumsum(increments[:, :-1], axis=1)], axis=1
    )
    return istft(mag * np.exp(1j * phase))[:n_out]


def time_stretch(clip: AudioClip, factor: float) -> AudioClip:
    """Phase-vocoder stretch; factor is a playback-rate multiplier.

    1.1x consumes input faster, so the output is shorter:
    output duration = input duration / factor.
    """
    if not 0.5 <= factor <= 2.0:
        raise PerturbationError(f"stretch factor {factor} outside [0.5, 2]")
    n_out = int(round(clip.samples.size / factor))
    y = _phase_vocoder(clip.samples, factor, n_out)
    return AudioClip(id=clip.id, samples=fit_length(y, n_out), sample_rate=clip.sample_rate)


def pitch_shift(clip: AudioClip, semitones: float) -> AudioClip:
    """Shift pitch by 2^(st/12), duration preserved.

    Vocoder-stretches to 2^(st/12) times the length (pitch intact), then
    time-compresses by resampling, which multiplies every frequency by
    2^(st/12) and restores the original duration.
    """
    if abs(semitones) > 12:
        raise PerturbationError(f"pitch shift {semitones} st outside +/-12")
    n = clip.samples.size
    if semitones == 0:
        return AudioClip(
            id=clip.id, samples=_phase_vocoder(clip.samples, 1.0, n), sample_rate=clip.sample_rate
        )
    ratio = 2.0 ** (semitones / 12.0)
    stretched = _phase_vocoder(clip.samples, 1.0 / ratio, int(math.ceil(n * ratio)) + 2)
    shifted = resample_by_factor(stretched, 1.0 / ratio)
    return AudioClip(id=clip.id, samples=fit_length(shifted, n), sample_rate=clip.sample_rate)


def _lifter_window(n_fft: int, lifter_bins: int) -> np.ndarray:
    # raised-cosine edge over the top 30% of the cutoff tames Gibbs ripple
    w = np.zeros(n_fft)
    flat = int(lifter_bins * 0.7)
    w[:flat] = 1.0
    ramp = lifter_bins - flat
    w[flat:lifter_bins] = 0.5 + 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
    w[n_fft - lifter_bins + 1 :] = w[1:lifter_bins][::-1]
    return w


def _cepstral_envelope(log_mag: np.ndarray, lifter_bins: int, iterations: int = 20) -> np.ndarray:
    """Spectral envelope (log magnitude) by cepstral liftering.

    A plain lifter rides the mean of a harmonic comb, not its peaks; the
    standard max-update refinement re-lifts max(spectrum, envelope) a fixed
    number of times so the envelope hugs the peaks deterministically.
    """
    n_fft = 2 * (log_mag.shape[0] - 1)
    w = _lifter_window(n_fft, lifter_bins)[:, None]

    def smooth(lm: np.ndarray) -> np.ndarray:
        ceps = np.fft.irfft(lm, n=n_fft, axis=0)
        return np.fft.rfft(ceps * w, n=n_fft, axis=0).real

    env = smooth(log_mag)
    for _ in range(iterations):
        env = smooth(np.maximum(log_mag, env))
    return env


def formant_shift(clip: AudioClip, factor: float) -> AudioClip:
    """Warp the spectral envelope along frequency, excitation untouched.

    Per frame: lifter the log-magnitude cepstrum (40 coefficients at 16 kHz,
    scaled with rate) into an envelope, stretch the envelope by `factor`,
    and reapply it to the envelope-flattened spectrum. Phases are kept, so
    the harmonic fine structure (F0) survives.
    """
    if not 0.7 <= factor <= 1.5:
        raise PerturbationError(f"formant factor {factor} outside [0.7, 1.5]")
    n = clip.samples.size
    x = pad_to_frames(clip.samples)
    spec = stft(x)
    mags = np.abs(spec)
    peak = mags.max()
    if peak <= 0.0:
        return clip
    # -40 dB floor per frame: keeps comb valleys from dominating the fit
    floors = np.maximum(mags.max(axis=0) * 1e-2, 1e-12 * peak)
    lifter_bins = max(2, int(round(40 * clip.sample_rate / 16000)))
    log_env = _cepstral_envelope(np.log(np.maximum(mags, floors[None, :])), lifter_bins)
    bins = np.arange(mags.shape[0], dtype=np.float64)
    warped = np.empty_like(log_env)
    for m in range(log_env.shape[1]):
        warped[:, m] = np.interp(bins / factor, bins, log_env[:, m])
    new_mags = mags * np.exp(warped - log_env)
    out = istft(new_mags * np.exp(1j * np.angle(spec)))
    return AudioClip(id=clip.id, samples=fit_length(out, n), sample_rate=clip.sample_rate)


def shuffle_chunks(clip: AudioClip, chunk_ms: int, rng: np.random.Generator) -> AudioClip:
    """Permute consecutive chunks, joining with 10 ms crossfades.

    sin^2/cos^2 fade curves sum to one, so correlated material keeps its
    level through each join. A trailing partial chunk stays in place at the
    end; the identity permutation is rejected. Every crossfaded join
    shortens the output by the 10 ms overlap.
    """
    fs = clip.sample_rate
    chunk_len = int(round(chunk_ms / 1000.0 * fs))
    x = clip.samples
    n_full = x.size // chunk_len
    if n_full < 2:
        raise PerturbationError("clip too short to shuffle")
    chunks = [x[i * chunk_len : (i + 1) * chunk_len] for i in range(n_full)]
    partial = x[n_full * chunk_len :]

    perm = rng.permutation(n_full)
    while np.array_equal(perm, np.arange(n_full)):
        perm = rng.permutation(n_full)
    segments = [chunks[i] for i in perm]
    if partial.size:
        segments.append(partial)

    xf = int(round(CROSSFADE_S * fs))
    theta = np.linspace(0.0, np.pi / 2.0, xf, endpoint=False)
    fade_in = np.sin(theta) ** 2
    fade_out = np.cos(theta) ** 2

    out = segments[0]
    for seg in segments[1:]:
        if xf == 0 or seg.size < xf or out.size < xf:
            out = np.concatenate([out, seg])  # butt joint for sub-crossfade tails
            continue
        blended = out[-xf:] * fade_out + seg[:xf] * fade_in
        out = np.concatenate([out[:-xf], blended, seg[xf:]])
    return AudioClip(id=clip.id, samples=out, sample_rate=fs)


def reverse(clip: AudioClip) -> AudioClip:
    return AudioClip(id=clip.id, samples=clip.samples[::-1].copy(), sample_rate=clip.sample_rate)


# --- dispatch --------------------------------------------------------------


def apply(clip: AudioClip, condition: Condition, seed: int) -> AudioClip:
    """Apply one condition; deterministic in (clip.id, condition.id, seed).

    Output id is `<clip_id>__<condition_id>`; the sample rate is preserved.
    """
    rng = keyed_rng(seed, clip.id, condition.id)
    kind, p = condition.kind, condition.params
    if kind == "noise":
        out = add_noise(clip, p["snr_db"], rng)
    elif kind == "lowpass":
        out = lowpass(clip, p["cutoff_hz"])
    elif kind == "reverb":
        out = reverb(clip, p["rt60_s"], rng)
    elif kind == "pitch":
        out = pitch_shift(clip, p["semitones"])
    elif kind == "stretch":
        out = time_stretch(clip, p["factor"])
    elif kind == "formant":
        out = formant_shift(clip, p["factor"])
    elif kind == "shuffle":
        out = shuffle_chunks(clip, p["chunk_ms"], rng)
    elif kind == "reverse":
        out = reverse(clip)
    else:
        raise ValueError(f"unknown perturbation kind {kind!r}")
    return AudioClip(
        id=f"{clip.id}__{condition.id}", samples=out.samples, sample_rate=out.sample_rate
    )
