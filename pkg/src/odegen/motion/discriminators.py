"""Frame and sequence critics over keypoint heatmaps.

The frame critic scores individual heatmap frames (N, K, H, W); the sequence
critic scores whole clips (N, K, T, H, W).  Layer ladders are generated from
the image size and clip length: spatial extents halve (k4 s2 p1) down to 4
then collapse with a valid conv, temporal extents halve (k4 s2 p1 along time)
down to 1.  At the 64x64 reference size with base width 32 this reproduces
the published critic exactly; the 16x16 desk preset uses base width 16.
"""

from __future__ import annotations

import numpy as np

from ..conv_stacks import ConvStack2d, ConvStack3d
from ..exceptions import ShapeError

REFERENCE_BASE = 32
REFERENCE_CAP = 256
DESK_BASE = 16
DESK_CAP = 64


def _check_size(size: int) -> None:
    s = size
    while s > 4:
        if s % 2:
            raise ShapeError(f"image size {size} does not halve down to 4")
        s //= 2
    if s != 4:
        raise ShapeError(f"image size {size} too small (need >= 4)")


def frame_critic_layers(size: int, base: int, cap: int) -> list[tuple]:
    _check_size(size)
    layers = []
    c, s = base, size
    while s > 4:
        layers.append((c, 4, 2, 1))
        s //= 2
        c = min(2 * c, cap)
    layers.append((c, 4, 1, 0))
    layers.append((1, 1, 1, 0))
    return layers


def sequence_critic_layers(size: int, frames: int, base: int, cap: int) -> list[tuple]:
    _check_size(size)
    if frames < 1:
        raise ShapeError(f"clip length must be >= 1, got {frames}")
    layers = []
    c, s, d = base, size, frames
    while s > 4:
        layers.append((c, (1, 4, 4), (1, 2, 2), (0, 1, 1)))
        s //= 2
        if d > 1:
            layers.append((c, (4, 1, 1), (2, 1, 1), (1, 0, 0)))
            d = (d - 2) // 2 + 1
        c = min(2 * c, cap)
    while d > 1:
        layers.append((c, (4, 1, 1), (2, 1, 1), (1, 0, 0)))
        d = (d - 2) // 2 + 1
    layers.append((c, (1, 4, 4), (1, 1, 1), (0, 0, 0)))
    layers.append((1, (1, 1, 1), (1, 1, 1), (0, 0, 0)))
    return layers


class FrameHeatmapCritic(ConvStack2d):
    """Scores (N, K, H, W) heatmap frames."""

    def __init__(self, keypoints: int, size: int, rng: np.random.Generator,
                 base: int = DESK_BASE, cap: int = DESK_CAP):
        super().__init__(keypoints, frame_critic_layers(size, base, cap), rng)
        self.size = size

    def __call__(self, x):
        if x.ndim != 4 or x.shape[1] != self.in_channels or x.shape[2:] != (self.size, self.size):
            raise ShapeError(
                f"frame critic expects (N, {self.in_channels}, {self.size}, {self.size}), got {x.shape}")
        return super().__call__(x)


class SequenceHeatmapCritic(ConvStack3d):
    """Scores (N, K, T, H, W) heatmap clips."""

    def __init__(self, keypoints: int, size: int, frames: int, rng: np.random.Generator,
                 base: int = DESK_BASE, cap: int = DESK_CAP):
        super().__init__(keypoints, sequence_critic_layers(size, frames, base, cap), rng)
        self.size = size
        self.frames = frames

    def __call__(self, x):
        want = (self.in_channels, self.frames, self.size, self.size)
        if x.ndim != 5 or x.shape[1:] != want:
            raise ShapeError(f"sequence critic expects (N,) + {want}, got {x.shape}")
        return super().__call__(x)


def reference_frame_critic(keypoints: int, rng: np.random.Generator) -> FrameHeatmapCritic:
    """64x64 preset matching the published per-frame critic ladder."""
    return FrameHeatmapCritic(keypoints, 64, rng, base=REFERENCE_BASE, cap=REFERENCE_CAP)


def reference_sequence_critic(keypoints: int, rng: np.random.Generator,
                              frames: int = 16) -> SequenceHeatmapCritic:
    """64x64, 16-frame preset matching the published clip critic ladder."""
    return SequenceHeatmapCritic(keypoints, 64, frames, rng,
                                 base=REFERENCE_BASE, cap=REFERENCE_CAP)
