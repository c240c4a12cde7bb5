"""Gaussian keypoint heatmaps.

A keypoint at normalized coords (x, y) in [0, 1]^2 maps to pixel position
(x * (W - 1), y * (H - 1)) — grid corners inclusive — and renders as the
unnormalized Gaussian exp(-d^2 / (2 sigma^2)) over integer pixel centers, so
the value is exactly 1 on the keypoint pixel and exp(-1/2) at distance sigma.
Rendering is differentiable w.r.t. the coordinates.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, add, div, exp, mul, neg, reshape, sub
from ..exceptions import ContractError, DomainError

REFERENCE_SIGMA = 1.5   # pixels at the 64x64 reference resolution
REFERENCE_SIZE = 64


def default_sigma(size: int) -> float:
    """Proportional scaling of the reference sigma to another resolution."""
    return REFERENCE_SIGMA * size / REFERENCE_SIZE


def render_heatmaps(coords: Tensor, height: int, width: int, sigma: float) -> Tensor:
    """Render (..., K, 2) normalized coords to (..., K, H, W) heatmaps."""
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    coords = coords if isinstance(coords, Tensor) else Tensor(coords)
    if coords.ndim < 2 or coords.shape[-1] != 2:
        raise ContractError(f"coords must be (..., K, 2), got {coords.shape}")
    lead = coords.shape[:-1]          # (..., K)
    m = 1
    for s in lead:
        m *= s
    flat = reshape(coords, (m, 2))
    px = mul(flat[:, 0:1], Tensor(float(width - 1)))    # (M, 1)
    py = mul(flat[:, 1:2], Tensor(float(height - 1)))
    gx = Tensor(np.arange(width, dtype=np.float64).reshape(1, 1, width))
    gy = Tensor(np.arange(height, dtype=np.float64).reshape(1, height, 1))
    dx = sub(gx, reshape(px, (m, 1, 1)))
    dy = sub(gy, reshape(py, (m, 1, 1)))
    d2 = add(mul(dx, dx), mul(dy, dy))
    h = exp(neg(div(d2, Tensor(2.0 * sigma * sigma))))
    return reshape(h, lead + (height, width))


def heatmap_peak_coords(heatmaps: np.ndarray) -> np.ndarray:
    """Argmax pixel of each (..., H, W) map, returned as normalized (x, y)."""
    arr = np.asarray(heatmaps)
    h, w = arr.shape[-2], arr.shape[-1]
    flat = arr.reshape(-1, h * w)
    idx = flat.argmax(axis=1)
    ys, xs = np.divmod(idx, w)
    out = np.stack([xs / (w - 1), ys / (h - 1)], axis=-1)
    return out.reshape(arr.shape[:-2] + (2,))
