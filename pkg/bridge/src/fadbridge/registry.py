"""Encoder registry: native rate, dimensionality, extraction rule, loader.

A loader returns `embed(samples, rate) -> (frames, dim) float array`; the
caller mean-pools over the frame axis. Encoders that natively produce one
clip-level vector (CLAP) return a single frame, making the pooling a
no-op. Loaders import their ML stack lazily and raise WeightsUnavailable
when the framework or checkpoint cannot be loaded.

The per-model extraction rule (including the layer-norm choice that
"final hidden state" leaves open) is recorded in the sidecar metadata
written next to every EMB1 output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


class WeightsUnavailable(Exception):
    """Model weights or their framework cannot be loaded on this host."""


@dataclass(frozen=True)
class EncoderEntry:
    name: str
    native_rate: int
    dim: int
    extraction: str
    loader: Callable[[], Callable[[np.ndarray, int], np.ndarray]]


# --- stub encoder (no weights, CI-testable) ---------------------------------

_STUB_BANDS = 64
_STUB_WINDOW = 1024
_STUB_HOP = 256


def _stub_mel_filterbank(rate: int) -> np.ndarray:
    def to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)

    def to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)

    n_bins = _STUB_WINDOW // 2 + 1
    edges = to_hz(np.linspace(0.0, to_mel(rate / 2.0), _STUB_BANDS + 2))
    bin_hz = np.arange(n_bins) * rate / _STUB_WINDOW
    fb = np.zeros((_STUB_BANDS, n_bins))
    for b in range(_STUB_BANDS):
        lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
        fb[b] = np.clip(
            np.minimum((bin_hz - lo) / max(mid - lo, 1e-12), (hi - bin_hz) / max(hi - mid, 1e-12)),
            0.0,
            None,
        )
    return fb


def _load_identity_mel():
    def embed(samples: np.ndarray, rate: int) -> np.ndarray:
        x = np.asarray(samples, dtype=np.float64)
        if x.size < _STUB_WINDOW:
            x = np.pad(x, (0, _STUB_WINDOW - x.size))
        n_frames = 1 + (x.size - _STUB_WINDOW) // _STUB_HOP
        idx = np.arange(_STUB_WINDOW)[None, :] + _STUB_HOP * np.arange(n_frames)[:, None]
        window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(_STUB_WINDOW) / _STUB_WINDOW)
        spec = np.abs(np.fft.rfft(x[idx] * window, axis=1)) ** 2
        mel = spec @ _stub_mel_filterbank(rate).T
        return np.log1p(mel).astype(np.float32)

    return embed


# --- pretrained encoders ------------------------------------------------------


def _torch_and_transformers():
    try:
        import torch  # noqa: F401
        import transformers  # noqa: F401
    except ImportError as exc:
        raise WeightsUnavailable(f"torch/transformers not installed: {exc}") from exc
    return torch, transformers


def _load_whisper():
    torch, _ = _torch_and_transformers()
    from transformers import WhisperFeatureExtractor, WhisperModel

    try:
        extractor = WhisperFeatureExtractor.from_pretrained("openai/whisper-large-v3")
        model = WhisperModel.from_pretrained("openai/whisper-large-v3")
    except Exception as exc:
        raise WeightsUnavailable(f"whisper checkpoint unavailable: {exc}") from exc
    model.eval()

    def embed(samples, rate):
        feats = extractor(samples, sampling_rate=rate, return_tensors="pt")
        with torch.no_grad():
            hidden = model.encoder(feats.input_features).last_hidden_state[0]
        return hidden.cpu().numpy().astype(np.float32)

    return embed


def _load_wav2vec2():
    torch, _ = _torch_and_transformers()
    from transformers import Wav2Vec2Model

    try:
        model = Wav2Vec2Model.from_pretrained("facebook/wav2vec2-base-960h")
    except Exception as exc:
        raise WeightsUnavailable(f"wav2vec2 checkpoint unavailable: {exc}") from exc
    model.eval()

    def embed(samples, rate):
        with torch.no_grad():
            x = torch.as_tensor(samples, dtype=torch.float32)[None, :]
            hidden = model(x).last_hidden_state[0]
        return hidden.cpu().numpy().astype(np.float32)

    return embed


def _load_encodec():
    torch, _ = _torch_and_transformers()
    from transformers import EncodecModel

    try:
        model = EncodecModel.from_pretrained("facebook/encodec_24khz")
    except Exception as exc:
        raise WeightsUnavailable(f"encodec checkpoint unavailable: {exc}") from exc
    model.eval()

    def embed(samples, rate):
        with torch.no_grad():
            x = torch.as_tensor(samples, dtype=torch.float32)[None, None, :]
            latent = model.encoder(x)[0]  # (128, frames), pre-quantizer
        return latent.T.cpu().numpy().astype(np.float32)

    return embed


def _load_clap():
    torch, _ = _torch_and_transformers()
    from transformers import ClapModel, ClapProcessor

    try:
        processor = ClapProcessor.from_pretrained("laion/clap-htsat-unfused")
        model = ClapModel.from_pretrained("laion/clap-htsat-unfused")
    except Exception as exc:
        raise WeightsUnavailable(f"clap checkpoint unavailable: {exc}") from exc
    model.eval()

    def embed(samples, rate):
        inputs = processor(audios=samples, sampling_rate=rate, return_tensors="pt")
        with torch.no_grad():
            clip_vec = model.get_audio_features(**inputs)[0]
        return clip_vec.cpu().numpy().astype(np.float32)[None, :]  # already clip-level

    return embed


def _load_audiomae():
    try:
        import torch
    except ImportError as exc:
        raise WeightsUnavailable(f"torch not installed: {exc}") from exc
    raise WeightsUnavailable(
        "audiomae has no hub distribution; place a scripted checkpoint at "
        "$FADBRIDGE_AUDIOMAE_PT and extend the loader"
    )


def _load_vggish():
    try:
        import torch
    except ImportError as exc:
        raise WeightsUnavailable(f"torch not installed: {exc}") from exc
    try:
        model = torch.hub.load("harritaylor/torchvggish", "vggish")
    except Exception as exc:
        raise WeightsUnavailable(f"vggish checkpoint unavailable: {exc}") from exc
    model.eval()

    def embed(samples, rate):
        import torch as _torch

        with _torch.no_grad():
            out = model.forward(np.asarray(samples, dtype=np.float32), rate)
        return out.cpu().numpy().astype(np.float32).reshape(-1, 128)

    return embed


REGISTRY: dict[str, EncoderEntry] = {
    entry.name: entry
    for entry in [
        EncoderEntry(
            "identity-mel", 16000, 64,
            "64-band log-mel frames computed from the raw waveform; no weights",
            _load_identity_mel,
        ),
        EncoderEntry(
            "audiomae", 16000, 768,
            "masked-reconstruction ViT encoder final hidden state (post final layer-norm)",
            _load_audiomae,
        ),
        EncoderEntry(
            "encodec", 24000, 128,
            "continuous encoder latent prior to the residual vector quantizer",
            _load_encodec,
        ),
        EncoderEntry(
            "wav2vec2", 16000, 768,
            "final transformer hidden state (post final layer-norm)",
            _load_wav2vec2,
        ),
        EncoderEntry(
            "vggish", 16000, 128,
            "128-d embedding layer output per 0.96 s patch",
            _load_vggish,
        ),
        EncoderEntry(
            "clap", 48000, 512,
            "native clip-level audio projection via internal attention pooling",
            _load_clap,
        ),
        EncoderEntry(
            "whisper", 16000, 1280,
            "ASR encoder final hidden state (post encoder layer-norm)",
            _load_whisper,
        ),
    ]
}
