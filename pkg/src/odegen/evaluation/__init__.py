"""Distribution-level evaluation: Frechet distance over pluggable features."""

from ..pendulum.dynamics import consistency_residual, roughness
from ..video.synthetic import extract_tracks, track_error_px
from .extractors import PixelStatsExtractor, RandomProjectionExtractor, make_extractor
from .frechet import (
    GaussianStats,
    evaluate_set,
    features_matrix,
    fit_stats,
    frechet_distance,
    split_half_distance,
)

__all__ = [
    "GaussianStats",
    "PixelStatsExtractor",
    "RandomProjectionExtractor",
    "consistency_residual",
    "evaluate_set",
    "extract_tracks",
    "features_matrix",
    "fit_stats",
    "frechet_distance",
    "make_extractor",
    "roughness",
    "split_half_distance",
    "track_error_px",
]
