"""Exception types shared across the pipeline."""


class FadprobeError(Exception):
    """Base class for all package errors."""


class AudioFormatError(FadprobeError):
    """Unreadable or unsupported audio container/codec."""


class CorpusError(FadprobeError):
    """Corpus-level validation failure (duplicate ids, bad manifest, ...)."""


class SilenceError(FadprobeError):
    """Loudness is immeasurable: every gating block fell below the gate."""


class TooShortError(FadprobeError):
    """Clip shorter than the minimum an operation needs."""


class PerturbationError(FadprobeError):
    """A perturbation's precondition failed for this clip."""


class EmbeddingFormatError(FadprobeError):
    """EMB1 parse or validation failure."""


class BridgeError(FadprobeError):
    """External encoder bridge invocation failed."""


class SuiteIncompleteError(FadprobeError):
    """Raw FAD results do not cover the full condition grid."""

    def __init__(self, missing: list[str]):
        self.missing = sorted(missing)
        super().__init__("suite incomplete: " + ", ".join(self.missing))


class ScoringError(FadprobeError):
    """Degenerate normalization/aggregation input."""


class NumericalError(FadprobeError):
    """Eigensolve or other numerical routine failed."""


class ConfigError(FadprobeError):
    """Run configuration invalid."""
