"""Feature extractors mapping a video to a fixed-width vector.

Neither extractor is a stand-in for a pretrained network; the values they
produce are only comparable to values from the same extractor instance.
Both reduce a (T, C, H, W) video to per-frame pooled descriptors and then
summarize over time with mean and standard deviation, so the output width
is independent of the frame count and resolution.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import ContractError, ShapeError


def _pool_frames(video: np.ndarray, grid: int) -> np.ndarray:
    """Adaptive average pooling of every frame to (C, grid, grid), flattened."""
    video = np.asarray(video, dtype=np.float64)
    if video.ndim != 4:
        raise ShapeError(f"expected a (T, C, H, W) video, got shape {video.shape}")
    t, c, h, w = video.shape
    if h < grid or w < grid:
        raise ShapeError(f"video {h}x{w} too small for a {grid}x{grid} pooling grid")
    rows = np.array_split(np.arange(h), grid)
    cols = np.array_split(np.arange(w), grid)
    pooled = np.empty((t, c, grid, grid))
    for i, r in enumerate(rows):
        band = video[:, :, r, :]
        for j, s in enumerate(cols):
            pooled[:, :, i, j] = band[:, :, :, s].mean(axis=(2, 3))
    return pooled.reshape(t, c * grid * grid)


def _summarize(per_frame: np.ndarray) -> np.ndarray:
    return np.concatenate([per_frame.mean(axis=0), per_frame.std(axis=0)])


class PixelStatsExtractor:
    """Temporal mean/std of block-averaged pixels; width = 2 * C * grid^2."""

    def __init__(self, channels: int = 3, grid: int = 4):
        if grid < 1:
            raise ContractError(f"grid must be >= 1, got {grid}")
        self.grid = grid
        self.channels = channels
        self.feature_dim = 2 * channels * grid * grid

    def __call__(self, video: np.ndarray) -> np.ndarray:
        per_frame = _pool_frames(video, self.grid)
        if video.shape[1] != self.channels:
            raise ShapeError(f"expected {self.channels} channels, got {video.shape[1]}")
        return _summarize(per_frame)


class RandomProjectionExtractor:
    """Seeded Gaussian projection of pooled frames; width = 2 * dim.

    The projection matrix is fixed at construction, so two extractors built
    with the same (dim, seed, grid) produce identical features.
    """

    def __init__(self, dim: int = 16, seed: int = 0, channels: int = 3, grid: int = 8):
        if dim < 1:
            raise ContractError(f"dim must be >= 1, got {dim}")
        in_dim = channels * grid * grid
        rng = np.random.default_rng(seed)
        self.matrix = rng.normal(size=(in_dim, dim)) / np.sqrt(in_dim)
        self.grid = grid
        self.channels = channels
        self.dim = dim
        self.feature_dim = 2 * dim

    def __call__(self, video: np.ndarray) -> np.ndarray:
        per_frame = _pool_frames(video, self.grid)
        if video.shape[1] != self.channels:
            raise ShapeError(f"expected {self.channels} channels, got {video.shape[1]}")
        return _summarize(per_frame @ self.matrix)


def make_extractor(name: str, seed: int = 0) -> PixelStatsExtractor | RandomProjectionExtractor:
    """Build a named extractor; names are 'pixels' and 'randproj'."""
    if name == "pixels":
        return PixelStatsExtractor()
    if name == "randproj":
        return RandomProjectionExtractor(seed=seed)
    raise ContractError(f"unknown extractor {name!r}; choose 'pixels' or 'randproj'")
