import numpy as np
import pytest

from fadprobe.audio_io import AudioClip, write_clip


def sine_clip(freq, seconds, rate, amplitude=0.5, clip_id="tone"):
    t = np.arange(int(seconds * rate)) / rate
    return AudioClip(clip_id, amplitude * np.sin(2.0 * np.pi * freq * t), rate)


def synthetic_corpus(n_clips, rate=16000, seed=1234):
    """Deterministic envelope-varying clips: a few partials under a shared
    onset-decay morphology with per-clip modulation."""
    rng = np.random.default_rng(seed)
    clips = []
    for i in range(n_clips):
        duration = rng.uniform(2.2, 3.0)
        n = int(duration * rate)
        t = np.arange(n) / rate
        x = np.zeros(n)
        for _ in range(int(rng.integers(2, 5))):
            freq = rng.uniform(100.0, 3500.0)
            x += rng.uniform(0.2, 1.0) * np.sin(2.0 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
        frac = t / t[-1]
        attack = np.minimum(frac / rng.uniform(0.08, 0.2), 1.0)
        decay = np.exp(-rng.uniform(1.5, 2.5) * frac)
        wobble = 1.0 + 0.35 * np.sin(2.0 * np.pi * rng.uniform(0.5, 2.0) * t + rng.uniform(0, 2 * np.pi))
        x *= attack * decay * wobble
        x += 0.005 * rng.standard_normal(n)
        x *= 0.3 / np.max(np.abs(x))
        clips.append(AudioClip(f"clip{i:04d}", x, rate))
    return clips


def write_corpus(clips, directory):
    directory.mkdir(parents=True, exist_ok=True)
    for clip in clips:
        write_clip(clip, directory)
    return directory


@pytest.fixture
def small_corpus():
    return synthetic_corpus(8, seed=7)


@pytest.fixture
def corpus_dir(tmp_path, small_corpus):
    return write_corpus(small_corpus, tmp_path / "corpus")
