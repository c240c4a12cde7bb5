"""Stage-II video generator: appearance noise + heatmap sequence -> frames.

An appearance feature vector seeds a coarse time-constant feature map; a
pyramid of nearest-neighbour upsamplings and composition blocks grows it to
full resolution, with keypoint heatmaps injected at every level through
spatially-adaptive scale/shift maps.  Frames share 2D weights; time coupling
enters only through the conditioning heatmaps and, in training mode, the
shared standardization statistics.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..autodiff import (
    Tensor,
    add,
    avg_pool2d,
    batch_standardize,
    broadcast_to,
    div,
    leaky_relu,
    load_checkpoint,
    mul,
    no_grad,
    reshape,
    save_checkpoint,
    sigmoid,
    sub,
    tanh,
    upsample_nearest_2x,
)
from ..exceptions import ContractError, ShapeError
from ..nn import MLP, Conv2d, Linear, Module

# keeps the standardization denominator finite for degenerate constant
# channels while staying far below any tested tolerance at unit scales
STANDARDIZE_EPS = 1e-16


class CompositionBlock(Module):
    """Standardize-then-denormalize unit with a trailing 3x3 conv.

    Scale and shift are per-pixel convex mixes of a motion map (conv over the
    resized heatmaps) and an appearance vector (linear in the appearance
    feature), with per-channel mixing weights squashed into [0, 1].
    """

    def __init__(self, channels_in: int, channels_out: int, keypoints: int,
                 feature_dim: int, rng: np.random.Generator, momentum: float = 0.1):
        c = channels_in
        self.conv_motion = Conv2d(keypoints, 2 * c, 3, rng, stride=1, padding=1)
        self.fc_app = Linear(feature_dim, 2 * c, rng)
        # scale halves start at 1 so an untrained block is near-identity
        self.conv_motion.bias.data[:c] = 1.0
        self.fc_app.bias.data[:c] = 1.0
        self.alpha_gamma_raw = Tensor(np.zeros(c), requires_grad=True)
        self.alpha_beta_raw = Tensor(np.zeros(c), requires_grad=True)
        self.conv_out = Conv2d(c, channels_out, 3, rng, stride=1, padding=1)
        self.running_mean = np.zeros(c)
        self.running_var = np.ones(c)
        self.channels_in = channels_in
        self.channels_out = channels_out
        self.momentum = momentum

    def standardize(self, x: Tensor, training: bool) -> Tensor:
        """Per-channel standardization of (B, T, C, H, W) over batch, time and space."""
        if training:
            with no_grad():
                axes = (0, 1, 3, 4)
                mu = x.data.mean(axis=axes)
                var = x.data.var(axis=axes)
                m = self.momentum
                self.running_mean += m * (mu - self.running_mean)
                self.running_var += m * (var - self.running_var)
            return batch_standardize(x, axes=(0, 1, 3, 4), eps=STANDARDIZE_EPS)
        shape = (1, 1, self.channels_in, 1, 1)
        mu = Tensor(self.running_mean.reshape(shape))
        sd = Tensor(np.sqrt(self.running_var + STANDARDIZE_EPS).reshape(shape))
        return div(sub(x, mu), sd)

    def _scale_shift(self, f_a: Tensor, heatmaps: Tensor) -> tuple[Tensor, Tensor]:
        b, t, k, h, w = heatmaps.shape
        c = self.channels_in
        maps = self.conv_motion(reshape(heatmaps, (b * t, k, h, w)))
        maps = reshape(maps, (b, t, 2 * c, h, w))
        gamma_m, beta_m = maps[:, :, :c], maps[:, :, c:]
        vec = reshape(self.fc_app(f_a), (b, 1, 2 * c, 1, 1))
        gamma_a, beta_a = vec[:, :, :c], vec[:, :, c:]
        mix = (1, 1, c, 1, 1)
        a_g = reshape(sigmoid(self.alpha_gamma_raw), mix)
        a_b = reshape(sigmoid(self.alpha_beta_raw), mix)
        one = Tensor(1.0)
        gamma = add(mul(a_g, gamma_m), mul(sub(one, a_g), gamma_a))
        beta = add(mul(a_b, beta_m), mul(sub(one, a_b), beta_a))
        return gamma, beta

    def denorm(self, x: Tensor, f_a: Tensor, heatmaps: Tensor, training: bool = False) -> Tensor:
        """The scale/shift result before the output conv; (B, T, C, H, W)."""
        if x.ndim != 5 or x.shape[2] != self.channels_in:
            raise ShapeError(f"block expects (B, T, {self.channels_in}, H, W), got {x.shape}")
        if heatmaps.shape[-2:] != x.shape[-2:] or heatmaps.shape[:2] != x.shape[:2]:
            raise ShapeError(
                f"heatmaps {heatmaps.shape} do not match features {x.shape} in batch/time/space")
        gamma, beta = self._scale_shift(f_a, heatmaps)
        return add(mul(gamma, self.standardize(x, training)), beta)

    def __call__(self, x: Tensor, f_a: Tensor, heatmaps: Tensor, training: bool = False) -> Tensor:
        y = self.denorm(x, f_a, heatmaps, training)
        b, t, c, h, w = y.shape
        out = self.conv_out(reshape(y, (b * t, c, h, w)))
        out = leaky_relu(out, 0.2)
        return reshape(out, (b, t, self.channels_out, h, w))


class VideoGenerator(Module):
    """Noise + (B, T, K, H, W) heatmaps -> (B, T, 3, H, W) frames in [-1, 1]."""

    BASE_SIZE = 4

    def __init__(self, rng: np.random.Generator, noise_dim: int = 128, keypoints: int = 4,
                 base_channels: int = 64, levels: int = 2, fc_hidden: int = 128):
        if levels < 1:
            raise ContractError(f"need at least one pyramid level, got {levels}")
        if base_channels >> (levels - 1) < 1:
            raise ContractError("base_channels too small for the level count")
        self.size = self.BASE_SIZE * (2 ** levels)
        self.feature_dim = base_channels * self.BASE_SIZE * self.BASE_SIZE
        self.fc = MLP([noise_dim, fc_hidden, fc_hidden, fc_hidden, self.feature_dim],
                      ["leaky-relu"] * 4, rng)
        outs = [base_channels >> max(0, n - 1) for n in range(1, levels + 1)]
        ins = [base_channels] + outs[:-1]
        self.blocks = [
            CompositionBlock(cin, cout, keypoints, self.feature_dim, rng)
            for cin, cout in zip(ins, outs)
        ]
        self.conv_rgb = Conv2d(outs[-1], 3, 3, rng, stride=1, padding=1)
        self.noise_dim = noise_dim
        self.keypoints = keypoints
        self.base_channels = base_channels
        self.levels = levels
        self.fc_hidden = fc_hidden

    def appearance_feature(self, z: Tensor) -> Tensor:
        if z.ndim != 2 or z.shape[1] != self.noise_dim:
            raise ContractError(f"appearance noise must be (B, {self.noise_dim}), got {z.shape}")
        return self.fc(z)

    def __call__(self, z: Tensor, heatmaps: Tensor, training: bool = False) -> Tensor:
        if heatmaps.ndim != 5:
            raise ShapeError(f"heatmaps must be (B, T, K, H, W), got {heatmaps.shape}")
        b, t, k, h, w = heatmaps.shape
        if z.ndim != 2 or z.shape[0] != b:
            raise ShapeError(f"noise batch {z.shape} does not match heatmap batch {b}")
        if k != self.keypoints or (h, w) != (self.size, self.size):
            raise ShapeError(
                f"heatmaps must be (B, T, {self.keypoints}, {self.size}, {self.size}), got {heatmaps.shape}")
        f_a = self.appearance_feature(z)
        c0 = self.base_channels
        m = reshape(f_a, (b, 1, c0, self.BASE_SIZE, self.BASE_SIZE))
        m = broadcast_to(m, (b, t, c0, self.BASE_SIZE, self.BASE_SIZE))
        for n, block in enumerate(self.blocks, start=1):
            m = upsample_nearest_2x(m)
            factor = 2 ** (self.levels - n)
            level_maps = avg_pool2d(heatmaps, factor)
            m = block(m, f_a, level_maps, training)
        bb, tt, cc, hh, ww = m.shape
        frames = tanh(self.conv_rgb(reshape(m, (bb * tt, cc, hh, ww))))
        return reshape(frames, (b, t, 3, self.size, self.size))

    def level_shapes(self, frames: int) -> list[tuple]:
        """Feature-map shape (C, H, W) entering the RGB conv after each level,
        for one sample of the given clip length; documents the pyramid."""
        shapes = []
        size = self.BASE_SIZE
        c = self.base_channels
        for n in range(1, self.levels + 1):
            size *= 2
            c = self.blocks[n - 1].channels_out
            shapes.append((c, size, size))
        return shapes

    # -- persistence -----------------------------------------------------------

    def meta(self) -> dict:
        return {
            "model": "video",
            "noise_dim": self.noise_dim,
            "keypoints": self.keypoints,
            "base_channels": self.base_channels,
            "levels": self.levels,
            "fc_hidden": self.fc_hidden,
        }

    def save(self, path) -> None:
        save_checkpoint(path, self.state())
        Path(str(path) + ".json").write_text(json.dumps(self.meta(), indent=2))

    @classmethod
    def load(cls, path) -> "VideoGenerator":
        meta_path = Path(str(path) + ".json")
        if not meta_path.exists():
            raise ContractError(f"missing checkpoint sidecar {meta_path}")
        meta = json.loads(meta_path.read_text())
        if meta.get("model") != "video":
            raise ContractError(f"{path} is not a video checkpoint (model={meta.get('model')!r})")
        gen = cls(
            np.random.default_rng(0),
            noise_dim=int(meta["noise_dim"]),
            keypoints=int(meta["keypoints"]),
            base_channels=int(meta["base_channels"]),
            levels=int(meta["levels"]),
            fc_hidden=int(meta["fc_hidden"]),
        )
        arrays = load_checkpoint(path)
        gen.load_state(arrays)
        gen.load_buffers(arrays)
        return gen


def reference_video_generator(rng: np.random.Generator, keypoints: int = 4) -> VideoGenerator:
    """64x64 preset whose pyramid reproduces the published level shapes."""
    return VideoGenerator(rng, base_channels=512, levels=4, keypoints=keypoints)
