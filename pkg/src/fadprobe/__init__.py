"""Audio-encoder bias profiler.

Applies a fixed suite of DSP perturbations to an audio corpus, measures the
Frechet Audio Distance between clean and perturbed embedding sets for each
encoder, and aggregates log-normalized scores into a four-axis
Recall/Precision/Semantic/Structural sensitivity profile.
"""

__version__ = "0.1.0"
