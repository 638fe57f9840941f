"""Encoder bridge: embeds a directory of WAVs with a pretrained (or stub)
encoder and writes an EMB1 file per the fadprobe bridge contract."""

__version__ = "0.1.0"
