import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fadprobe import perturb
from fadprobe.audio_io import AudioClip
from fadprobe.errors import PerturbationError, TooShortError
from fadprobe.perturb import Condition, default_grid, keyed_rng
from fadprobe.stft import HOP_SIZE, WINDOW_SIZE

from conftest import sine_clip, synthetic_corpus

RATE = 16000


@pytest.fixture(scope="module")
def tone():
    return sine_clip(440.0, 5.0, RATE, clip_id="tone")


@pytest.fixture(scope="module")
def textured():
    return synthetic_corpus(1, seed=99)[0]


# --- dispatch contract -------------------------------------------------------


def test_apply_tags_output_and_keeps_rate(tone):
    cond = Condition("noise", {"snr_db": 20})
    out = perturb.apply(tone, cond, 7)
    assert out.id == "tone__noise_snr_20dB"
    assert out.sample_rate == tone.sample_rate


@pytest.mark.parametrize("cond_id", [
    "noise_snr_60dB", "lowpass_2000hz", "reverb_rt60_0.5s", "pitch_+2st",
    "stretch_1.1x", "formant_1.3x", "reverse", "shuffle_500ms",
])
def test_apply_is_deterministic(textured, cond_id):
    cond = perturb.parse_condition_id(cond_id)
    a = perturb.apply(textured, cond, 1234)
    b = perturb.apply(textured, cond, 1234)
    assert np.array_equal(a.samples, b.samples)


def test_noise_streams_keyed_by_clip_id(tone):
    cond = Condition("noise", {"snr_db": 20})
    other = AudioClip("othertone", tone.samples, tone.sample_rate)
    a = perturb.apply(tone, cond, 7)
    b = perturb.apply(other, cond, 7)
    assert not np.array_equal(a.samples - tone.samples, b.samples - tone.samples)


# --- noise -------------------------------------------------------------------


@pytest.mark.parametrize("snr_db", [60, 0, -5])
def test_noise_hits_exact_snr(textured, snr_db):
    out = perturb.add_noise(textured, snr_db, keyed_rng(3, textured.id, f"n{snr_db}"))
    residual = out.samples - textured.samples
    measured = 10 * np.log10(np.mean(textured.samples**2) / np.mean(residual**2))
    assert measured == pytest.approx(snr_db, abs=0.1)


def test_noise_60db_residual_power(tone):
    out = perturb.add_noise(tone, 60, keyed_rng(3, tone.id, "n"))
    residual = out.samples - tone.samples
    p_signal = np.mean(tone.samples**2)
    assert np.mean(residual**2) == pytest.approx(p_signal * 1e-6, rel=0.01)


def test_noise_60db_barely_moves_rms(tone):
    out = perturb.add_noise(tone, 60, keyed_rng(3, tone.id, "n"))
    delta_db = 20 * np.log10(
        np.sqrt(np.mean(out.samples**2)) / np.sqrt(np.mean(tone.samples**2))
    )
    assert abs(delta_db) < 0.01


def test_noise_on_silence_rejected():
    silent = AudioClip("s", np.zeros(RATE), RATE)
    with pytest.raises(PerturbationError, match="SNR undefined"):
        perturb.add_noise(silent, 20, keyed_rng(1, "s", "n"))


# --- lowpass -----------------------------------------------------------------


def test_lowpass_passthrough_at_nyquist(tone):
    out = perturb.lowpass(tone, 8000.0)
    assert np.array_equal(out.samples, tone.samples)


def test_lowpass_minus_3db_at_cutoff():
    cut = 2000.0
    probe = sine_clip(cut, 4.0, RATE)
    out = perturb.lowpass(probe, cut)
    seg = slice(probe.samples.size // 4, -probe.samples.size // 4)
    att = 20 * np.log10(
        np.sqrt(np.mean(out.samples[seg] ** 2)) / np.sqrt(np.mean(probe.samples[seg] ** 2))
    )
    assert att == pytest.approx(-3.01, abs=0.2)


def test_lowpass_second_order_slope():
    cut = 2000.0
    probe = sine_clip(2 * cut, 4.0, RATE)
    out = perturb.lowpass(probe, cut)
    seg = slice(probe.samples.size // 4, -probe.samples.size // 4)
    att = 20 * np.log10(
        np.sqrt(np.mean(out.samples[seg] ** 2)) / np.sqrt(np.mean(probe.samples[seg] ** 2))
    )
    assert att <= -11.0


# --- reverb ------------------------------------------------------------------


def test_reverb_ir_decay_matches_rt60():
    rt60 = 0.5
    ir = perturb.synth_reverb_ir(rt60, RATE, keyed_rng(5, "x", "r"))
    tail = ir[1:]
    win = int(0.01 * RATE)
    n_win = tail.size // win
    rms = np.sqrt(np.mean(tail[: n_win * win].reshape(n_win, win) ** 2, axis=1))
    db = 20 * np.log10(rms / rms[0])
    t = (np.arange(n_win) + 0.5) * win / RATE
    slope = np.polyfit(t, db, 1)[0]
    assert -60.0 / slope == pytest.approx(rt60, rel=0.1)


def test_reverb_ir_direct_to_tail_energy():
    ir = perturb.synth_reverb_ir(0.5, RATE, keyed_rng(5, "x", "r"))
    assert ir[0] == 1.0
    assert np.sum(ir[1:] ** 2) == pytest.approx(1.0, rel=1e-9)


def test_reverb_preserves_rms(textured):
    out = perturb.reverb(textured, 0.5, keyed_rng(5, textured.id, "r"))
    delta_db = 20 * np.log10(
        np.sqrt(np.mean(out.samples**2)) / np.sqrt(np.mean(textured.samples**2))
    )
    assert abs(delta_db) <= 0.01
    assert out.samples.size == textured.samples.size


def test_reverb_degenerate_tail_is_identity_up_to_rms():
    clip = sine_clip(440.0, 1.0, 8000)
    out = perturb.reverb(clip, 1e-5, keyed_rng(1, "t", "r"))  # tail < 1 sample
    assert np.allclose(out.samples, clip.samples)


# --- pitch / stretch ---------------------------------------------------------


def test_pitch_identity(tone):
    out = perturb.pitch_shift(tone, 0)
    assert np.corrcoef(out.samples, tone.samples)[0, 1] > 0.999
    assert out.samples.size == tone.samples.size


def test_pitch_octave_up_peak(tone):
    out = perturb.pitch_shift(tone, 12)
    spec = np.abs(np.fft.rfft(out.samples))
    peak_hz = np.argmax(spec) * RATE / out.samples.size
    bin_hz = RATE / out.samples.size
    assert abs(peak_hz - 880.0) <= bin_hz


def test_pitch_near_inverse(tone):
    up = perturb.pitch_shift(tone, 1)
    back = perturb.pitch_shift(AudioClip("t", up.samples, RATE), -1)
    assert np.corrcoef(back.samples, tone.samples)[0, 1] > 0.99


def test_pitch_too_short():
    with pytest.raises(TooShortError, match="too short for STFT"):
        perturb.pitch_shift(AudioClip("s", np.ones(WINDOW_SIZE - 1), RATE), 1)


def test_stretch_identity(tone):
    out = perturb.time_stretch(tone, 1.0)
    assert out.samples.size == tone.samples.size
    assert np.corrcoef(out.samples, tone.samples)[0, 1] > 0.999


@pytest.mark.parametrize("factor,expected_s", [(1.1, 5.0 / 1.1), (0.9, 5.0 / 0.9)])
def test_stretch_duration(tone, factor, expected_s):
    out = perturb.time_stretch(tone, factor)
    assert abs(out.samples.size - expected_s * RATE) <= HOP_SIZE


def test_stretch_preserves_pitch(tone):
    out = perturb.time_stretch(tone, 1.1)
    spec = np.abs(np.fft.rfft(out.samples))
    peak_hz = np.argmax(spec) * RATE / out.samples.size
    assert abs(peak_hz - 440.0) <= RATE / out.samples.size


# --- formant -----------------------------------------------------------------


def _vowel(f0=200.0, center=1000.0, width=300.0, seconds=3.0, rate=RATE):
    t = np.arange(int(seconds * rate)) / rate
    x = np.zeros(t.size)
    for k in range(1, int(0.45 * rate / f0)):
        amp = np.exp(-0.5 * ((k * f0 - center) / width) ** 2)
        x += amp * np.sin(2 * np.pi * k * f0 * t + 0.7 * k)
    return AudioClip("vowel", x, rate)


def _envelope_peak_hz(samples, rate):
    from fadprobe.perturb import _cepstral_envelope
    from fadprobe.stft import stft

    mags = np.abs(stft(samples))
    floors = np.maximum(mags.max(axis=0) * 1e-2, 1e-12)
    env = _cepstral_envelope(np.log(np.maximum(mags, floors[None, :])), 40).mean(axis=1)
    freqs = np.arange(env.size) * rate / WINDOW_SIZE
    band = (freqs >= 300) & (freqs <= 3500)
    return freqs[band][np.argmax(env[band])]


def test_formant_identity(textured):
    out = perturb.formant_shift(textured, 1.0)
    assert np.corrcoef(out.samples, textured.samples)[0, 1] > 0.99


def test_formant_warp_moves_envelope_keeps_f0():
    vowel = _vowel()
    out = perturb.formant_shift(vowel, 1.4)
    envelope_bin_hz = RATE / (2 * 40)  # lifter resolution
    assert abs(_envelope_peak_hz(vowel.samples, RATE) - 1000.0) <= envelope_bin_hz
    assert abs(_envelope_peak_hz(out.samples, RATE) - 1400.0) <= envelope_bin_hz

    # harmonic comb spacing stays at F0
    spec = np.abs(np.fft.rfft(out.samples))
    freqs = np.arange(spec.size) * RATE / out.samples.size
    bin_hz = RATE / out.samples.size
    peaks = []
    for k in range(3, 11):
        lo = np.searchsorted(freqs, k * 200.0 - 60)
        hi = np.searchsorted(freqs, k * 200.0 + 60)
        peaks.append(freqs[lo + np.argmax(spec[lo:hi])])
    assert np.all(np.abs(np.diff(peaks) - 200.0) <= bin_hz + 1e-9)


def test_formant_preserves_duration(textured):
    out = perturb.formant_shift(textured, 1.4)
    assert abs(out.samples.size - textured.samples.size) <= HOP_SIZE


# --- shuffle / reverse -------------------------------------------------------


def test_shuffle_two_chunks_is_swap():
    rate = 8000
    chunk = int(0.5 * rate)
    x = np.concatenate([np.full(chunk, 0.25), np.full(chunk, 0.75)])
    out = perturb.shuffle_chunks(AudioClip("c", x, rate), 500, keyed_rng(1, "c", "s"))
    xf = int(0.01 * rate)
    assert np.allclose(out.samples[: chunk - xf], 0.75)
    assert np.allclose(out.samples[-(chunk - xf) :], 0.25)
    assert out.samples.size == x.size - xf


def test_shuffle_duration_formula(tone):
    out = perturb.shuffle_chunks(tone, 1000, keyed_rng(1, tone.id, "s"))
    expected = tone.samples.size - 4 * int(0.01 * RATE)
    assert abs(out.samples.size - expected) <= 1


def test_shuffle_constant_level():
    const = AudioClip("k", np.full(5 * RATE, 0.5), RATE)
    out = perturb.shuffle_chunks(const, 250, keyed_rng(1, "k", "s"))
    assert np.max(np.abs(out.samples - 0.5)) <= 0.005


def test_shuffle_too_short():
    clip = AudioClip("s", np.ones(RATE), RATE)  # 1 s < 2 chunks of 1000 ms
    with pytest.raises(PerturbationError, match="too short to shuffle"):
        perturb.shuffle_chunks(clip, 1000, keyed_rng(1, "s", "s"))


def test_reverse_involution_and_palindrome(textured):
    twice = perturb.reverse(perturb.reverse(textured))
    assert np.array_equal(twice.samples, textured.samples)
    pal = AudioClip("p", np.array([1.0, 2.0, 3.0, 2.0, 1.0]), 8000)
    assert np.array_equal(perturb.reverse(pal).samples, pal.samples)


def test_reverse_preserves_spectral_magnitude(textured):
    out = perturb.reverse(textured)
    assert np.allclose(
        np.abs(np.fft.rfft(out.samples)), np.abs(np.fft.rfft(textured.samples)), atol=1e-8
    )


@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=200))
def test_reverse_involution_property(values):
    clip = AudioClip("h", np.array(values, dtype=np.float64), 8000)
    assert np.array_equal(perturb.reverse(perturb.reverse(clip)).samples, clip.samples)


# --- cross-kind invariants ---------------------------------------------------


def test_duration_preserving_kinds(textured):
    for cond_id in ["noise_snr_20dB", "lowpass_4000hz", "reverb_rt60_0.4s", "reverse"]:
        out = perturb.apply(textured, perturb.parse_condition_id(cond_id), 9)
        assert out.samples.size == textured.samples.size, cond_id
    for cond_id in ["pitch_-4st", "formant_1.4x"]:
        out = perturb.apply(textured, perturb.parse_condition_id(cond_id), 9)
        assert abs(out.samples.size - textured.samples.size) <= HOP_SIZE, cond_id


def test_all_grid_kinds_run_on_corpus_clip(textured):
    for cond in default_grid().conditions:
        out = perturb.apply(textured, cond, 3)
        assert out.sample_rate == textured.sample_rate
        assert np.all(np.isfinite(out.samples))
