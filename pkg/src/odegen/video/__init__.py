"""Stage II: motion-conditioned video synthesis."""

from .discriminators import (
    FrameVideoCritic,
    SequenceVideoCritic,
    reference_frame_critic,
    reference_sequence_critic,
)
from .model import STANDARDIZE_EPS, CompositionBlock, VideoGenerator, reference_video_generator
from .synthetic import (
    ANCHORS,
    BLOB_RADIUS,
    PALETTE,
    SyntheticVideoDataset,
    extract_tracks,
    load_synthetic_dataset,
    make_synthetic_video_dataset,
    render_frames,
    save_synthetic_dataset,
    track_error_px,
)
from .train import Stage2Config, motion_transfer, pixel_diversity_loss, train_stage2

__all__ = [
    "ANCHORS",
    "BLOB_RADIUS",
    "PALETTE",
    "STANDARDIZE_EPS",
    "CompositionBlock",
    "FrameVideoCritic",
    "SequenceVideoCritic",
    "Stage2Config",
    "SyntheticVideoDataset",
    "VideoGenerator",
    "extract_tracks",
    "load_synthetic_dataset",
    "make_synthetic_video_dataset",
    "motion_transfer",
    "pixel_diversity_loss",
    "reference_frame_critic",
    "reference_sequence_critic",
    "reference_video_generator",
    "render_frames",
    "save_synthetic_dataset",
    "track_error_px",
    "train_stage2",
]
