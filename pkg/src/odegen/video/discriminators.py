"""Motion-conditional critics for generated frames and clips.

Both critics score the channel-wise concatenation of pixels with the
conditioning heatmaps: frames as (N, 3+K, H, W), clips as (N, 3+K, T, H, W).
The conv ladders reuse the stage-1 generators; at 64x64 with base width 64
and cap 512 they reproduce the published video critic shapes.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, concat, transpose
from ..conv_stacks import ConvStack2d, ConvStack3d
from ..exceptions import ShapeError
from ..motion.discriminators import frame_critic_layers, sequence_critic_layers

REFERENCE_BASE = 64
REFERENCE_CAP = 512
DESK_BASE = 16
DESK_CAP = 64


class FrameVideoCritic(ConvStack2d):
    """Scores (frame, heatmap) pairs: (N, 3, H, W) + (N, K, H, W) -> (N,)."""

    def __init__(self, keypoints: int, size: int, rng: np.random.Generator,
                 base: int = DESK_BASE, cap: int = DESK_CAP):
        super().__init__(3 + keypoints, frame_critic_layers(size, base, cap), rng)
        self.keypoints = keypoints
        self.size = size

    def __call__(self, frames: Tensor, heatmaps: Tensor) -> Tensor:
        if frames.ndim != 4 or frames.shape[1:] != (3, self.size, self.size):
            raise ShapeError(f"frames must be (N, 3, {self.size}, {self.size}), got {frames.shape}")
        want = (self.keypoints, self.size, self.size)
        if heatmaps.ndim != 4 or heatmaps.shape[1:] != want or heatmaps.shape[0] != frames.shape[0]:
            raise ShapeError(f"conditioning must be (N,) + {want}, got {heatmaps.shape}")
        return ConvStack2d.__call__(self, concat([frames, heatmaps], axis=1))


class SequenceVideoCritic(ConvStack3d):
    """Scores (clip, heatmap clip) pairs given as (B, T, C, H, W) tensors."""

    def __init__(self, keypoints: int, size: int, frames: int, rng: np.random.Generator,
                 base: int = DESK_BASE, cap: int = DESK_CAP):
        super().__init__(3 + keypoints, sequence_critic_layers(size, frames, base, cap), rng)
        self.keypoints = keypoints
        self.size = size
        self.frames = frames

    def __call__(self, video: Tensor, heatmaps: Tensor) -> Tensor:
        if video.ndim != 5 or video.shape[1:] != (self.frames, 3, self.size, self.size):
            raise ShapeError(
                f"video must be (B, {self.frames}, 3, {self.size}, {self.size}), got {video.shape}")
        want = (self.frames, self.keypoints, self.size, self.size)
        if heatmaps.ndim != 5 or heatmaps.shape[1:] != want or heatmaps.shape[0] != video.shape[0]:
            raise ShapeError(f"conditioning must be (B,) + {want}, got {heatmaps.shape}")
        x = concat([video, heatmaps], axis=2)
        return ConvStack3d.__call__(self, transpose(x, (0, 2, 1, 3, 4)))


def reference_frame_critic(keypoints: int, rng: np.random.Generator) -> FrameVideoCritic:
    """64x64 preset matching the published per-frame video critic ladder."""
    return FrameVideoCritic(keypoints, 64, rng, base=REFERENCE_BASE, cap=REFERENCE_CAP)


def reference_sequence_critic(keypoints: int, rng: np.random.Generator,
                              frames: int = 16) -> SequenceVideoCritic:
    """64x64, 16-frame preset matching the published clip critic ladder."""
    return SequenceVideoCritic(keypoints, 64, frames, rng,
                               base=REFERENCE_BASE, cap=REFERENCE_CAP)
