"""Gaussian fits and the Frechet distance between embedding sets.

distance = ||mu_a - mu_b||^2 + tr(Ca + Cb - 2 (Ca Cb)^(1/2))

The cross term is evaluated through the symmetric product S Cb S with
S = sqrtm(Ca): similar to Ca Cb but symmetric PSD, so a real eigensolve
suffices and rank deficiency stays benign. Everything runs in double
precision; embeddings arrive single-precision but the trace cancellation
loses digits in float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embed import EmbeddingSet
from .errors import NumericalError

EIG_CLAMP_REL_TOL = 1e-10  # negative eigenvalues larger than this (relative) count as clamp events


@dataclass(frozen=True)
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray
    n: int

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class FadResult:
    value: float
    mean_term: float
    trace_term: float
    encoder: str = ""
    dataset: str = ""
    condition: str = ""
    clamped_eigs: int = 0
    regularized: bool = False


def fit_gaussian(emb: EmbeddingSet) -> GaussianStats:
    """Column mean and unbiased (N-1) sample covariance, symmetrized."""
    x = np.asarray(emb.matrix, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise ValueError("insufficient samples (need N >= 2)")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)
    return GaussianStats(mean=mean, cov=cov, n=n)


def _sqrtm_psd(mat: np.ndarray) -> tuple[np.ndarray, int]:
    """Symmetric PSD square root by eigendecomposition; returns clamp count."""
    sym = 0.5 * (mat + mat.T)
    try:
        eigvals, eigvecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"numerical failure in eigendecomposition: {exc}") from exc
    tol = EIG_CLAMP_REL_TOL * max(abs(eigvals[0]), abs(eigvals[-1]), 1e-300)
    clamped = int(np.sum(eigvals < -tol))
    eigvals = np.clip(eigvals, 0.0, None)
    root = (eigvecs * np.sqrt(eigvals)) @ eigvecs.T
    return root, clamped


def frechet_distance(
    a: GaussianStats, b: GaussianStats, regularize: bool = False
) -> FadResult:
    """Frechet distance between two Gaussian fits.

    `regularize` adds a small ridge (1e-6 x mean diagonal) to both
    covariances, for condition subsets where N < d makes the spectra
    borderline; the flag is echoed in the result so runs can report it.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    cov_a, cov_b = a.cov, b.cov
    if regularize:
        eps = 1e-6 * 0.5 * (np.trace(cov_a) + np.trace(cov_b)) / a.dim
        eye = np.eye(a.dim)
        cov_a = cov_a + eps * eye
        cov_b = cov_b + eps * eye

    diff = a.mean - b.mean
    mean_term = float(diff @ diff)

    root_a, clamp1 = _sqrtm_psd(cov_a)
    inner = root_a @ cov_b @ root_a
    try:
        eigvals = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(cov_a)
        raise NumericalError(
            f"numerical failure in cross-term eigensolve (cond(cov_a)={cond:.3e}): {exc}"
        ) from exc
    tol = EIG_CLAMP_REL_TOL * max(abs(eigvals[0]), abs(eigvals[-1]), 1e-300)
    clamp2 = int(np.sum(eigvals < -tol))
    eigvals = np.clip(eigvals, 0.0, None)

    trace_term = float(np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.sum(np.sqrt(eigvals)))
    value = max(0.0, mean_term + trace_term)
    return FadResult(
        value=value,
        mean_term=mean_term,
        trace_term=trace_term,
        clamped_eigs=clamp1 + clamp2,
        regularized=regularize,
    )


def fad_from_sets(
    reference: EmbeddingSet, perturbed: EmbeddingSet, regularize: bool = False
) -> FadResult:
    """Fit both sets and measure the distance, tagging the result."""
    if reference.encoder != perturbed.encoder:
        raise ValueError(
            f"encoder mismatch: {reference.encoder!r} vs {perturbed.encoder!r}"
        )
    if reference.dataset != perturbed.dataset:
        raise ValueError(
            f"dataset mismatch: {reference.dataset!r} vs {perturbed.dataset!r}"
        )
    result = frechet_distance(fit_gaussian(reference), fit_gaussian(perturbed), regularize)
    return FadResult(
        value=result.value,
        mean_term=result.mean_term,
        trace_term=result.trace_term,
        encoder=reference.encoder,
        dataset=reference.dataset,
        condition=perturbed.condition,
        clamped_eigs=result.clamped_eigs,
        regularized=result.regularized,
    )
