"""Convolutions, upsampling and pooling, lowered onto the tensor primitives.

A convolution here is pad -> patch gather -> matmul -> reshape.  Every stage
is an ordinary differentiable op, so first and second derivatives come from
the same machinery with no convolution-specific backward code.  The patch
index tables depend only on geometry and are cached across calls.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..exceptions import ShapeError
from .tensor import (
    Tensor,
    add,
    gather_cols,
    matmul,
    mul,
    pad,
    reshape,
    sum_,
    transpose,
)


def _pair(v):
    return (v, v) if isinstance(v, int) else tuple(v)


def _triple(v):
    return (v, v, v) if isinstance(v, int) else tuple(v)


def _out_extent(size: int, k: int, s: int, p: int) -> int:
    out = (size + 2 * p - k) // s + 1
    if out < 1:
        raise ShapeError(f"conv: kernel {k} with stride {s}, pad {p} does not fit extent {size}")
    return out


@lru_cache(maxsize=256)
def _im2col_idx(c: int, h: int, w: int, kh: int, kw: int, sh: int, sw: int):
    """Index table (C*kh*kw, OH*OW) into a flattened (C, H, W) volume."""
    oh = (h - kh) // sh + 1
    ow = (w - kw) // sw + 1
    ci, ki, kj = np.meshgrid(np.arange(c), np.arange(kh), np.arange(kw), indexing="ij")
    base = (ci * h + ki) * w + kj  # (C, kh, kw)
    oi, oj = np.meshgrid(np.arange(oh) * sh, np.arange(ow) * sw, indexing="ij")
    offset = oi * w + oj  # (OH, OW)
    return (base.reshape(-1, 1) + offset.reshape(1, -1)).astype(np.intp)


@lru_cache(maxsize=256)
def _vol2col_idx(c: int, d: int, h: int, w: int, kd: int, kh: int, kw: int, sd: int, sh: int, sw: int):
    """Index table (C*kd*kh*kw, OD*OH*OW) into a flattened (C, D, H, W) volume."""
    od = (d - kd) // sd + 1
    oh = (h - kh) // sh + 1
    ow = (w - kw) // sw + 1
    ci, kt, ki, kj = np.meshgrid(
        np.arange(c), np.arange(kd), np.arange(kh), np.arange(kw), indexing="ij"
    )
    base = ((ci * d + kt) * h + ki) * w + kj
    ot, oi, oj = np.meshgrid(
        np.arange(od) * sd, np.arange(oh) * sh, np.arange(ow) * sw, indexing="ij"
    )
    offset = (ot * h + oi) * w + oj
    return (base.reshape(-1, 1) + offset.reshape(1, -1)).astype(np.intp)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride=1, padding=0) -> Tensor:
    """2-d cross-correlation over (N, C_in, H, W) with weight (C_out, C_in, kh, kw)."""
    if x.ndim != 4:
        raise ShapeError(f"conv2d: input must be (N, C, H, W), got {x.shape}")
    if weight.ndim != 4:
        raise ShapeError(f"conv2d: weight must be (C_out, C_in, kh, kw), got {weight.shape}")
    n, cin, h, w = x.shape
    cout, cin_w, kh, kw = weight.shape
    if cin != cin_w:
        raise ShapeError(f"conv2d: input has {cin} channels, weight expects {cin_w}")
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    oh = _out_extent(h, kh, sh, ph)
    ow = _out_extent(w, kw, sw, pw)

    if ph or pw:
        x = pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    hp, wp = h + 2 * ph, w + 2 * pw
    idx = _im2col_idx(cin, hp, wp, kh, kw, sh, sw)
    cols = gather_cols(reshape(x, (n, cin * hp * wp)), idx)           # (N, CKK, L)
    cols = reshape(transpose(cols, (1, 0, 2)), (cin * kh * kw, n * oh * ow))
    out = matmul(reshape(weight, (cout, cin * kh * kw)), cols)        # (C_out, N*L)
    out = transpose(reshape(out, (cout, n, oh, ow)), (1, 0, 2, 3))
    if bias is not None:
        out = add(out, reshape(bias, (1, cout, 1, 1)))
    return out


def conv3d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride=1, padding=0) -> Tensor:
    """3-d cross-correlation over (N, C_in, D, H, W) with weight (C_out, C_in, kd, kh, kw)."""
    if x.ndim != 5:
        raise ShapeError(f"conv3d: input must be (N, C, D, H, W), got {x.shape}")
    if weight.ndim != 5:
        raise ShapeError(f"conv3d: weight must be (C_out, C_in, kd, kh, kw), got {weight.shape}")
    n, cin, d, h, w = x.shape
    cout, cin_w, kd, kh, kw = weight.shape
    if cin != cin_w:
        raise ShapeError(f"conv3d: input has {cin} channels, weight expects {cin_w}")
    sd, sh, sw = _triple(stride)
    pd, ph, pw = _triple(padding)
    od = _out_extent(d, kd, sd, pd)
    oh = _out_extent(h, kh, sh, ph)
    ow = _out_extent(w, kw, sw, pw)

    if pd or ph or pw:
        x = pad(x, ((0, 0), (0, 0), (pd, pd), (ph, ph), (pw, pw)))
    dp, hp, wp = d + 2 * pd, h + 2 * ph, w + 2 * pw
    idx = _vol2col_idx(cin, dp, hp, wp, kd, kh, kw, sd, sh, sw)
    cols = gather_cols(reshape(x, (n, cin * dp * hp * wp)), idx)
    ckk = cin * kd * kh * kw
    cols = reshape(transpose(cols, (1, 0, 2)), (ckk, n * od * oh * ow))
    out = matmul(reshape(weight, (cout, ckk)), cols)
    out = transpose(reshape(out, (cout, n, od, oh, ow)), (1, 0, 2, 3, 4))
    if bias is not None:
        out = add(out, reshape(bias, (1, cout, 1, 1, 1)))
    return out


def upsample_nearest_2x(x: Tensor) -> Tensor:
    """Nearest-neighbour 2x spatial upsampling of (..., H, W)."""
    if x.ndim < 2:
        raise ShapeError(f"upsample_nearest_2x: need at least 2 dims, got {x.shape}")
    h, w = x.shape[-2], x.shape[-1]
    lead = x.shape[:-2]
    # repeat each row/column twice via broadcast: (..., H, 1, W, 1) -> (..., H, 2, W, 2)
    from .tensor import broadcast_to

    y = reshape(x, lead + (h, 1, w, 1))
    y = broadcast_to(y, lead + (h, 2, w, 2))
    return reshape(y, lead + (2 * h, 2 * w))


def avg_pool2d(x: Tensor, factor: int) -> Tensor:
    """Area-average pooling of (..., H, W) by an integer factor."""
    if factor < 1:
        raise ShapeError(f"avg_pool2d: factor must be >= 1, got {factor}")
    if factor == 1:
        return x
    h, w = x.shape[-2], x.shape[-1]
    if h % factor or w % factor:
        raise ShapeError(f"avg_pool2d: factor {factor} does not divide extents ({h}, {w})")
    lead = x.shape[:-2]
    y = reshape(x, lead + (h // factor, factor, w // factor, factor))
    nd = y.ndim
    y = sum_(y, axis=(nd - 3, nd - 1))
    return mul(y, Tensor(1.0 / (factor * factor)))
