"""Minimal binary PPM/PGM image IO for frame and heatmap dumps.

Frames live in [-1, 1] (RGB) and heatmaps in [0, 1] (gray); both are
quantized to 8 bits on write.  The formats are self-describing and viewable
with any netpbm-aware tool, keeping the package free of image dependencies.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .exceptions import ContractError, ShapeError


def to_uint8(img: np.ndarray, lo: float, hi: float) -> np.ndarray:
    scaled = (np.asarray(img, dtype=np.float64) - lo) / (hi - lo)
    return np.clip(np.rint(scaled * 255.0), 0, 255).astype(np.uint8)


def from_uint8(img: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return img.astype(np.float64) / 255.0 * (hi - lo) + lo


def _read_header(data: bytes, magic: bytes):
    pos = 0
    fields = []
    if not data.startswith(magic):
        raise ContractError(f"expected {magic.decode()} file, got {data[:2]!r}")
    pos = len(magic)
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    return fields[0], fields[1], fields[2], pos + 1


def write_ppm(path, frame: np.ndarray) -> None:
    """Write a (3, H, W) float frame in [-1, 1] as binary PPM."""
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[0] != 3:
        raise ShapeError(f"expected a (3, H, W) frame, got {frame.shape}")
    _, h, w = frame.shape
    body = to_uint8(frame, -1.0, 1.0).transpose(1, 2, 0).tobytes()
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + body)


def read_ppm(path) -> np.ndarray:
    """Read a binary PPM back to a (3, H, W) float frame in [-1, 1]."""
    data = Path(path).read_bytes()
    w, h, maxval, offset = _read_header(data, b"P6")
    if maxval != 255:
        raise ContractError(f"{path}: only maxval 255 supported, got {maxval}")
    raw = np.frombuffer(data, dtype=np.uint8, count=h * w * 3, offset=offset)
    return from_uint8(raw.reshape(h, w, 3).transpose(2, 0, 1), -1.0, 1.0)


def write_pgm(path, img: np.ndarray) -> None:
    """Write an (H, W) float image in [0, 1] as binary PGM."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ShapeError(f"expected an (H, W) image, got {img.shape}")
    h, w = img.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + to_uint8(img, 0.0, 1.0).tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    w, h, maxval, offset = _read_header(data, b"P5")
    if maxval != 255:
        raise ContractError(f"{path}: only maxval 255 supported, got {maxval}")
    raw = np.frombuffer(data, dtype=np.uint8, count=h * w, offset=offset)
    return from_uint8(raw.reshape(h, w), 0.0, 1.0)


def write_video_frames(out_dir, video: np.ndarray, prefix: str = "frame") -> list[Path]:
    """Dump a (T, 3, H, W) video as numbered PPM frames; returns the paths."""
    video = np.asarray(video)
    if video.ndim != 4 or video.shape[1] != 3:
        raise ShapeError(f"expected a (T, 3, H, W) video, got {video.shape}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in range(video.shape[0]):
        p = out_dir / f"{prefix}_{t:04d}.ppm"
        write_ppm(p, video[t])
        paths.append(p)
    return paths


def read_video_frames(dir_path) -> np.ndarray:
    """Read every *.ppm in a directory (sorted) back into a (T, 3, H, W) video."""
    paths = sorted(Path(dir_path).glob("*.ppm"))
    if not paths:
        raise ContractError(f"no .ppm frames found in {dir_path}")
    return np.stack([read_ppm(p) for p in paths])


def heatmap_grid(heatmaps: np.ndarray) -> np.ndarray:
    """Tile (K, H, W) heatmaps side by side into one (H, K*W) image."""
    heatmaps = np.asarray(heatmaps)
    if heatmaps.ndim != 3:
        raise ShapeError(f"expected (K, H, W) heatmaps, got {heatmaps.shape}")
    return np.concatenate(list(heatmaps), axis=1)
