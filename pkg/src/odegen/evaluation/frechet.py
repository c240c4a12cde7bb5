"""Frechet distance between Gaussian fits of feature sets.

The metric compares two feature distributions through their first two
moments: ||mu_a - mu_b||^2 + Tr(Ca + Cb - 2 sqrt(Ca Cb)).  The matrix square
root is evaluated in the symmetric-sandwich form sqrt(S Cb S) with
S = sqrt(Ca), which stays PSD under floating-point noise; tiny negative
eigenvalues are clamped to zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..exceptions import ContractError

# sampling noise below this magnitude is clamped silently
EIG_WARN_THRESHOLD = -1e-6


@dataclass(frozen=True)
class GaussianStats:
    """Mean vector and covariance matrix of a feature set."""

    mean: np.ndarray  # (F,)
    cov: np.ndarray   # (F, F), symmetric PSD up to noise

    @property
    def width(self) -> int:
        return self.mean.shape[0]


def fit_stats(features: np.ndarray) -> GaussianStats:
    """Sample mean and unbiased covariance of an (N, F) feature matrix."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ContractError(f"fit_stats: expected (N, F) matrix, got shape {features.shape}")
    n = features.shape[0]
    if n < 2:
        raise ContractError(f"fit_stats: need at least 2 rows for a covariance, got {n}")
    mean = features.mean(axis=0)
    centered = features - mean
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)
    return GaussianStats(mean=mean, cov=cov)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    if vals.min() < EIG_WARN_THRESHOLD:
        warnings.warn(
            f"covariance eigenvalue {vals.min():.3e} clamped to 0; "
            "feature set may be too small for its width",
            stacklevel=3,
        )
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Distance between two Gaussian fits; zero iff the moments coincide."""
    if a.width != b.width:
        raise ContractError(f"frechet_distance: widths differ, {a.width} vs {b.width}")
    diff = a.mean - b.mean
    root_a = _psd_sqrt(a.cov)
    sandwich = root_a @ b.cov @ root_a
    vals = np.linalg.eigvalsh(0.5 * (sandwich + sandwich.T))
    if vals.min() < EIG_WARN_THRESHOLD:
        warnings.warn(
            f"cross-covariance eigenvalue {vals.min():.3e} clamped to 0",
            stacklevel=2,
        )
    trace_sqrt = np.sqrt(np.clip(vals, 0.0, None)).sum()
    value = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * trace_sqrt)
    return max(value, 0.0)


def evaluate_set(videos, extractor, reference: GaussianStats) -> float:
    """FID of a video set against precomputed reference statistics."""
    feats = features_matrix(videos, extractor)
    return frechet_distance(fit_stats(feats), reference)


def features_matrix(videos, extractor) -> np.ndarray:
    """Stack per-video feature vectors into an (N, F) matrix."""
    n = len(videos)
    if n < 2:
        raise ContractError(f"features_matrix: need at least 2 videos, got {n}")
    return np.stack([np.asarray(extractor(videos[i]), dtype=np.float64) for i in range(n)])


def split_half_distance(videos, extractor, seed: int = 0) -> float:
    """FID between two disjoint random halves of one set; a same-distribution floor."""
    n = len(videos)
    if n < 4:
        raise ContractError(f"split_half_distance: need at least 4 videos, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    feats = features_matrix(videos, extractor)[order]
    half = n // 2
    return frechet_distance(fit_stats(feats[:half]), fit_stats(feats[half : 2 * half]))
