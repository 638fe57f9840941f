import numpy as np
import pytest

from fadprobe.audio_io import AudioClip, measure_lufs, normalize_lufs
from fadprobe.errors import SilenceError, TooShortError

from conftest import sine_clip, synthetic_corpus
from reference_bs1770 import reference_integrated_lufs


def test_997hz_conformance_tone():
    clip = sine_clip(997.0, 10.0, 48000, amplitude=1.0)
    measured = measure_lufs(clip)
    assert measured == pytest.approx(-3.01, abs=0.1)
    # and the independent oracle agrees with us
    oracle = reference_integrated_lufs(clip.samples, clip.sample_rate)
    assert measured == pytest.approx(oracle, abs=0.1)


def test_digital_silence_immeasurable():
    clip = AudioClip("s", np.zeros(48000), 48000)
    with pytest.raises(SilenceError, match="immeasurable"):
        measure_lufs(clip)


def test_too_short_to_gate():
    clip = sine_clip(440.0, 0.3, 16000)
    with pytest.raises(TooShortError, match="too short to gate"):
        measure_lufs(clip)


def test_gain_linearity():
    clip = sine_clip(440.0, 2.0, 16000)
    gained = AudioClip("g", clip.samples * 10 ** (6.02 / 20), 16000)
    assert measure_lufs(gained) - measure_lufs(clip) == pytest.approx(6.02, abs=0.05)


def test_normalize_already_at_target():
    clip = sine_clip(440.0, 2.0, 16000)
    once, _ = normalize_lufs(clip)
    twice, report = normalize_lufs(once)
    assert report.gain_applied_db == pytest.approx(0.0, abs=0.05)
    assert report.integrated_lufs == pytest.approx(-23.0, abs=0.2)


def test_normalize_from_minus_33():
    clip = sine_clip(440.0, 3.0, 16000)
    at_minus_33 = AudioClip("a", clip.samples * 10 ** ((-33.0 - measure_lufs(clip)) / 20), 16000)
    assert measure_lufs(at_minus_33) == pytest.approx(-33.0, abs=0.05)
    normalized, report = normalize_lufs(at_minus_33)
    assert report.gain_applied_db == pytest.approx(10.0, abs=0.2)
    assert measure_lufs(normalized) == pytest.approx(-23.0, abs=0.2)


def test_normalize_propagates_silence():
    with pytest.raises(SilenceError):
        normalize_lufs(AudioClip("s", np.zeros(32000), 16000))


def test_pure_gain_no_clipping():
    # click train: full-scale peaks but low integrated loudness, so the gain
    # pushes samples past 1.0 and they must stay there (no limiter)
    x = np.zeros(4 * 16000)
    x[:: 800] = 1.0
    clip = AudioClip("clicks", x, 16000)
    normalized, report = normalize_lufs(clip)
    assert np.max(np.abs(normalized.samples)) > 1.0
    assert np.array_equal(
        normalized.samples, clip.samples * 10 ** (report.gain_applied_db / 20)
    )


@pytest.mark.parametrize("rate", [16000, 44100, 48000])
def test_normalized_clips_match_oracle(rate):
    for clip in synthetic_corpus(3, rate=rate, seed=rate):
        normalized, _ = normalize_lufs(clip)
        oracle = reference_integrated_lufs(normalized.samples, rate)
        assert oracle == pytest.approx(-23.0, abs=0.2)
