"""Stage I: continuous-time keypoint motion generation."""

from .discriminators import (
    DESK_BASE,
    DESK_CAP,
    REFERENCE_BASE,
    REFERENCE_CAP,
    FrameHeatmapCritic,
    SequenceHeatmapCritic,
    frame_critic_layers,
    reference_frame_critic,
    reference_sequence_critic,
    sequence_critic_layers,
)
from .heatmaps import (
    REFERENCE_SIGMA,
    REFERENCE_SIZE,
    default_sigma,
    heatmap_peak_coords,
    render_heatmaps,
)
from .model import MotionGenerator
from .train import Stage1Config, initial_diversity_loss, train_stage1

__all__ = [
    "DESK_BASE",
    "DESK_CAP",
    "REFERENCE_BASE",
    "REFERENCE_CAP",
    "REFERENCE_SIGMA",
    "REFERENCE_SIZE",
    "FrameHeatmapCritic",
    "SequenceHeatmapCritic",
    "MotionGenerator",
    "Stage1Config",
    "default_sigma",
    "frame_critic_layers",
    "heatmap_peak_coords",
    "initial_diversity_loss",
    "reference_frame_critic",
    "reference_sequence_critic",
    "render_heatmaps",
    "sequence_critic_layers",
    "train_stage1",
]
