"""Procedural moving-blob video domain with exact keypoint ground truth.

Each sample has K colored blobs swinging on damped-pendulum arms around fixed
anchor points, drawn over a per-sample solid background color.  Motion and
appearance come from independent random streams so the two factors can be
varied separately.  Blob colors use a fixed saturated palette, which makes a
closed-form track oracle possible: the pixel nearest a palette color marks
that blob's center.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ContractError
from ..pendulum.dynamics import GRAVITY, _rk4_batch

# RGB in [-1, 1]; one saturated color per blob
PALETTE = np.array([
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, 1.0, -1.0],
])

ANCHORS = np.array([
    [0.30, 0.30],
    [0.70, 0.30],
    [0.30, 0.70],
    [0.70, 0.70],
])

BLOB_RADIUS = 0.1125  # of image width; ~1.8 px at 16x16


@dataclass
class SyntheticVideoDataset:
    keypoints: np.ndarray  # (N, T, K, 2) normalized xy in [0, 1]
    videos: np.ndarray  # (N, T, 3, H, W) in [-1, 1]
    backgrounds: np.ndarray  # (N, 3)
    times: np.ndarray  # (T,) seconds
    style: str = "disks"
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> tuple[int, int]:
        return self.videos.shape[-2], self.videos.shape[-1]


def _blob_tracks(n: int, frames: int, keypoints: int, fps: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Damped-oscillator keypoint paths: (N, T, K, 2) in [0, 1]."""
    m = n * keypoints
    anchors = ANCHORS[np.arange(keypoints) % len(ANCHORS)]
    anchor = np.tile(anchors, (n, 1)) + rng.uniform(-0.03, 0.03, size=(m, 2))
    arm = rng.uniform(0.10, 0.20, size=m)
    theta0 = rng.uniform(-1.2, 1.2, size=m)
    grav_over_len = GRAVITY / rng.uniform(0.5, 1.5, size=m)
    damp_over_mass = rng.uniform(0.1, 0.5, size=m)

    state0 = np.stack([theta0, np.zeros(m)], axis=1)
    # states at t = 0, 1/fps, ..., T/fps; frame t is row t (skip the release state)
    rollout = _rk4_batch(state0, 1.0 / fps, grav_over_len, damp_over_mass, frames + 1)
    theta = rollout[1:, :, 0]  # (T, M)
    x = anchor[:, 0] + arm * np.sin(theta)
    y = anchor[:, 1] + arm * np.cos(theta)
    tracks = np.stack([x, y], axis=-1)  # (T, M, 2)
    tracks = tracks.transpose(1, 0, 2).reshape(n, keypoints, frames, 2)
    return np.clip(tracks.transpose(0, 2, 1, 3), 0.0, 1.0)


def render_frames(tracks: np.ndarray, height: int, width: int,
                  backgrounds: np.ndarray, style: str = "disks") -> np.ndarray:
    """Draw blobs at track positions: (N, T, K, 2) -> (N, T, 3, H, W)."""
    if style not in ("disks", "squares"):
        raise ContractError(f"style must be 'disks' or 'squares', got {style!r}")
    n, t, k, _ = tracks.shape
    if k > len(PALETTE):
        raise ContractError(f"at most {len(PALETTE)} blobs supported, got {k}")
    frames = np.empty((n, t, 3, height, width))
    frames[:] = backgrounds[:, None, :, None, None]
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    radius = BLOB_RADIUS * width
    px = tracks[..., 0] * (width - 1)
    py = tracks[..., 1] * (height - 1)
    for i in range(n):
        for j in range(t):
            for c in range(k):
                dx = xx - px[i, j, c]
                dy = yy - py[i, j, c]
                if style == "disks":
                    mask = dx * dx + dy * dy <= radius * radius
                else:
                    mask = (np.abs(dx) <= radius) & (np.abs(dy) <= radius)
                frames[i, j, :, mask] = PALETTE[c]
    return frames


def make_synthetic_video_dataset(
    n: int,
    frames: int = 8,
    height: int = 16,
    width: int = 16,
    keypoints: int = 4,
    seed: int = 0,
    fps: float = 16.0,
    style: str = "disks",
    motion_seed: int | None = None,
    appearance_seed: int | None = None,
) -> SyntheticVideoDataset:
    """Paired (keypoint track, video) samples; deterministic under seed.

    Motion and appearance use separate seeded streams; overriding one seed
    while fixing the other changes only that factor.
    """
    if n < 1:
        raise ContractError(f"need n >= 1 samples, got {n}")
    if frames < 1 or height < 2 or width < 2 or keypoints < 1:
        raise ContractError("need frames >= 1, height/width >= 2, keypoints >= 1")
    child_m, child_a = np.random.SeedSequence(seed).spawn(2)
    rng_m = np.random.default_rng(child_m if motion_seed is None else motion_seed)
    rng_a = np.random.default_rng(child_a if appearance_seed is None else appearance_seed)

    tracks = _blob_tracks(n, frames, keypoints, fps, rng_m)
    backgrounds = rng_a.uniform(-0.35, 0.35, size=(n, 3))
    videos = render_frames(tracks, height, width, backgrounds, style)
    times = np.arange(1, frames + 1, dtype=np.float64) / fps
    return SyntheticVideoDataset(
        keypoints=tracks,
        videos=videos,
        backgrounds=backgrounds,
        times=times,
        style=style,
        meta={"seed": seed, "fps": fps, "n": n},
    )


def extract_tracks(videos: np.ndarray, keypoints: int) -> np.ndarray:
    """Track oracle: centroid of the pixels nearest each palette color.

    Pixels within a small band above the minimum color distance are averaged,
    so a crisp rendered blob reports its center rather than its first raster
    pixel, and blurry generated blobs report the match region's centroid.
    Returns (N, T, K, 2) normalized coordinates.
    """
    if keypoints > len(PALETTE):
        raise ContractError(f"at most {len(PALETTE)} tracked blobs, got {keypoints}")
    n, t, c, h, w = videos.shape
    flat = videos.reshape(n, t, c, h * w)
    ys, xs = np.divmod(np.arange(h * w), w)
    out = np.empty((n, t, keypoints, 2))
    for k in range(keypoints):
        target = PALETTE[k].reshape(1, 1, 3, 1)
        dist = np.square(flat - target).sum(axis=2)  # (N, T, H*W)
        dmin = dist.min(axis=2, keepdims=True)
        dmed = np.median(dist, axis=2, keepdims=True)
        mask = dist <= dmin + 0.1 * (dmed - dmin) + 1e-12
        weight = mask.sum(axis=2)
        out[:, :, k, 0] = (mask * xs).sum(axis=2) / weight / (w - 1)
        out[:, :, k, 1] = (mask * ys).sum(axis=2) / weight / (h - 1)
    return out


def track_error_px(reference: np.ndarray, extracted: np.ndarray, height: int, width: int) -> np.ndarray:
    """Per-(frame, keypoint) Euclidean error in pixel units."""
    if reference.shape != extracted.shape:
        raise ContractError(f"track shapes differ: {reference.shape} vs {extracted.shape}")
    dx = (reference[..., 0] - extracted[..., 0]) * (width - 1)
    dy = (reference[..., 1] - extracted[..., 1]) * (height - 1)
    return np.sqrt(dx * dx + dy * dy)


def save_synthetic_dataset(ds: SyntheticVideoDataset, path) -> None:
    import json

    np.savez_compressed(
        path,
        keypoints=ds.keypoints,
        videos=ds.videos,
        backgrounds=ds.backgrounds,
        times=ds.times,
        style=np.array(ds.style),
        meta=np.array(json.dumps(ds.meta)),
    )


def load_synthetic_dataset(path) -> SyntheticVideoDataset:
    import json

    with np.load(path) as raw:
        required = {"keypoints", "videos", "backgrounds", "times", "style"}
        missing = required - set(raw.files)
        if missing:
            raise ContractError(f"{path}: not a dataset file, missing {sorted(missing)}")
        return SyntheticVideoDataset(
            keypoints=raw["keypoints"],
            videos=raw["videos"],
            backgrounds=raw["backgrounds"],
            times=raw["times"],
            style=str(raw["style"]),
            meta=json.loads(str(raw["meta"])) if "meta" in raw.files else {},
        )
