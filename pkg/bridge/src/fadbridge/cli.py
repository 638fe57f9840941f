"""Bridge entry point.

    fadprobe-bridge --encoder NAME --input-dir DIR --output FILE --sample-rate HZ

Embeds every *.wav in the directory (sorted by filename), resamples
bridge-side to the requested rate, mean-pools frame-level outputs over
time, and writes an EMB1 file plus a sidecar `<output>.meta.json`
documenting the extraction rule.

Exit codes: 0 success; 2 encoder/weights unavailable; 3 unreadable WAV or
empty input directory; 4 deviation from the registry (dim or native rate).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .emb1 import write_emb1
from .registry import REGISTRY, WeightsUnavailable
from .wavio import UnreadableWav, read_wav_mono

EXIT_OK = 0
EXIT_NO_WEIGHTS = 2
EXIT_BAD_INPUT = 3
EXIT_REGISTRY_DEVIATION = 4


def _resample(samples: np.ndarray, rate: int, target: int) -> np.ndarray:
    if rate == target:
        return samples
    from math import gcd

    g = gcd(rate, target)
    return resample_poly(samples, target // g, rate // g)


def bridge_main(encoder: str, input_dir: str, output: str, sample_rate: int) -> int:
    entry = REGISTRY.get(encoder)
    if entry is None:
        print(f"error: encoder {encoder!r} not in registry "
              f"(known: {', '.join(sorted(REGISTRY))})", file=sys.stderr)
        return EXIT_NO_WEIGHTS
    if sample_rate != entry.native_rate:
        print(f"error: sample rate {sample_rate} deviates from registry "
              f"({entry.name} is {entry.native_rate} Hz)", file=sys.stderr)
        return EXIT_REGISTRY_DEVIATION

    wav_paths = sorted(Path(input_dir).glob("*.wav"))
    if not wav_paths:
        print(f"error: no WAV files in {input_dir}", file=sys.stderr)
        return EXIT_BAD_INPUT

    try:
        embed = entry.loader()
    except WeightsUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_WEIGHTS

    ids: list[str] = []
    rows: list[np.ndarray] = []
    for path in wav_paths:
        try:
            samples, rate = read_wav_mono(path)
        except UnreadableWav as exc:
            print(f"error: unreadable WAV: {exc}", file=sys.stderr)
            return EXIT_BAD_INPUT
        samples = _resample(samples, rate, entry.native_rate)
        frames = np.atleast_2d(np.asarray(embed(samples, entry.native_rate)))
        pooled = frames.mean(axis=0)  # temporal mean over frame-level outputs
        if pooled.shape[0] != entry.dim:
            print(f"error: encoder produced dim {pooled.shape[0]}, registry says "
                  f"{entry.dim}", file=sys.stderr)
            return EXIT_REGISTRY_DEVIATION
        ids.append(path.stem)
        rows.append(pooled.astype(np.float32))

    out_path = Path(output)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_emb1(out_path, ids, np.vstack(rows))
    sidecar = {
        "kind": "emb1_sidecar",
        "encoder": entry.name,
        "native_rate": entry.native_rate,
        "dim": entry.dim,
        "extraction_rule": entry.extraction,
        "pooling": "temporal mean over frame-level outputs",
        "count": len(ids),
    }
    Path(str(out_path) + ".meta.json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return EXIT_OK


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="fadprobe-bridge",
        description="Embed a directory of WAVs and write an EMB1 file.",
    )
    parser.add_argument("--encoder", required=True)
    parser.add_argument("--input-dir", required=True)
    parser.add_argument("--output", required=True)
    parser.add_argument("--sample-rate", required=True, type=int)
    args = parser.parse_args(argv)
    sys.exit(bridge_main(args.encoder, args.input_dir, args.output, args.sample_rate))


if __name__ == "__main__":
    main()
