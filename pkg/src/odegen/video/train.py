"""Adversarial training of the motion-conditioned video generator.

Real clips and their ground-truth heatmaps feed conditional frame/clip
critics; the generator synthesizes clips from appearance noise under the same
conditioning.  The pixel diversity ratio penalizes appearance collapse.  The
gradient penalty interpolates the pixel part only, with conditioning held
fixed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..autodiff import Adam, Tensor, gradients, mean, no_grad, reshape
from ..exceptions import ContractError, TrainingError
from ..gan import diversity_ratio_loss, wgan_gp_loss
from ..motion.heatmaps import default_sigma, render_heatmaps
from ..motion.model import MotionGenerator
from ..nn import Module
from .discriminators import DESK_BASE, DESK_CAP, FrameVideoCritic, SequenceVideoCritic
from .model import VideoGenerator
from .synthetic import SyntheticVideoDataset


def pixel_diversity_loss(generator: VideoGenerator, z_a: Tensor, z_b: Tensor,
                         heatmaps: Tensor, training: bool = False, eps: float = 1e-8) -> Tensor:
    """Noise-distance over output-distance ratio on identically-conditioned clips."""
    out_a = generator(z_a, heatmaps, training=training)
    out_b = generator(z_b, heatmaps, training=training)
    return diversity_ratio_loss(z_a, z_b, out_a, out_b, eps=eps)


@dataclass
class Stage2Config:
    keypoints: int = 4
    size: int = 16
    frames: int = 8
    noise_dim: int = 128
    base_channels: int = 64
    levels: int = 2
    fc_hidden: int = 128
    sigma: float | None = None
    batch: int = 4
    steps: int = 300
    d_steps: int = 2
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.9
    lambda_gp: float = 10.0
    lambda_div: float = 1.0
    critic_base: int = DESK_BASE
    critic_cap: int = DESK_CAP
    seed: int = 0

    def validated(self) -> "Stage2Config":
        if self.size != 4 * (2 ** self.levels):
            raise ContractError(
                f"size {self.size} does not match {self.levels} pyramid levels (need {4 * 2 ** self.levels})")
        if self.batch < 2 or self.steps < 1 or self.d_steps < 1:
            raise ContractError("stage2: batch >= 2, steps >= 1, d_steps >= 1 required")
        if self.lr <= 0:
            raise ContractError("stage2: lr must be positive")
        if self.lambda_gp < 0 or self.lambda_div < 0:
            raise ContractError("stage2: loss weights must be >= 0")
        return self

    def sigma_px(self) -> float:
        return self.sigma if self.sigma is not None else default_sigma(self.size)


class _CriticPair(Module):
    def __init__(self, frame: Module, seq: Module):
        self.frame = frame
        self.seq = seq


def train_stage2(
    dataset: SyntheticVideoDataset,
    cfg: Stage2Config,
    log_fn: Callable[[int, dict], None] | None = None,
    sample_fn: Callable[[int, np.ndarray], None] | None = None,
    sample_every: int = 0,
) -> tuple[VideoGenerator, dict]:
    """Train on paired (track, clip) data; returns (generator, info dict)."""
    cfg = cfg.validated()
    videos = np.asarray(dataset.videos, dtype=np.float64)
    tracks = np.asarray(dataset.keypoints, dtype=np.float64)
    want = (cfg.frames, 3, cfg.size, cfg.size)
    if videos.ndim != 5 or videos.shape[1:] != want:
        raise ContractError(f"clips must be (N,) + {want}, got {videos.shape}")
    n = videos.shape[0]
    if n < cfg.batch:
        raise ContractError(f"dataset has {n} clips, batch is {cfg.batch}")

    rng = np.random.default_rng(cfg.seed)
    gen = VideoGenerator(rng, noise_dim=cfg.noise_dim, keypoints=cfg.keypoints,
                         base_channels=cfg.base_channels, levels=cfg.levels,
                         fc_hidden=cfg.fc_hidden)
    critic_fr = FrameVideoCritic(cfg.keypoints, cfg.size, rng,
                                 base=cfg.critic_base, cap=cfg.critic_cap)
    critic_sq = SequenceVideoCritic(cfg.keypoints, cfg.size, cfg.frames, rng,
                                    base=cfg.critic_base, cap=cfg.critic_cap)
    g_store = gen.store()
    d_store = _CriticPair(critic_fr, critic_sq).store()
    g_opt = Adam(g_store, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2)
    d_opt = Adam(d_store, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2)

    sigma = cfg.sigma_px()
    with no_grad():
        heatmaps_all = render_heatmaps(Tensor(tracks), cfg.size, cfg.size, sigma).data

    def flat_frames(x: Tensor) -> Tensor:
        b, t = x.shape[0], x.shape[1]
        return reshape(x, (b * t,) + tuple(x.shape[2:]))

    history: list[dict] = []
    for step in range(cfg.steps):
        d_metrics = {}
        for _ in range(cfg.d_steps):
            idx = rng.choice(n, size=cfg.batch, replace=False)
            real = Tensor(videos[idx])
            cond = Tensor(heatmaps_all[idx])
            z = Tensor(rng.normal(size=(cfg.batch, cfg.noise_dim)))
            with no_grad():
                fake = gen(z, cond, training=True)
            fake = Tensor(fake.data)
            cond_f = flat_frames(cond)
            d_fr, _, gp_fr = wgan_gp_loss(lambda v: critic_fr(v, cond_f),
                                          flat_frames(real), flat_frames(fake),
                                          cfg.lambda_gp, rng)
            d_sq, _, gp_sq = wgan_gp_loss(lambda v: critic_sq(v, cond),
                                          real, fake, cfg.lambda_gp, rng)
            d_loss = d_fr + d_sq
            d_opt.step(gradients(d_loss, d_store))
            d_metrics = {
                "d_loss": d_loss.item(),
                "gp_frame": gp_fr.item(),
                "gp_seq": gp_sq.item(),
            }

        idx = rng.choice(n, size=cfg.batch, replace=False)
        cond = Tensor(heatmaps_all[idx])
        z_a = Tensor(rng.normal(size=(cfg.batch, cfg.noise_dim)))
        z_b = Tensor(rng.normal(size=(cfg.batch, cfg.noise_dim)))
        fake_a = gen(z_a, cond, training=True)
        fake_b = gen(z_b, cond, training=True)
        adv = -(mean(critic_fr(flat_frames(fake_a), flat_frames(cond)))
                + mean(critic_sq(fake_a, cond)))
        div = diversity_ratio_loss(z_a, z_b, fake_a, fake_b)
        g_loss = adv + Tensor(cfg.lambda_div) * div
        g_opt.step(gradients(g_loss, g_store))

        metrics = dict(d_metrics)
        metrics.update({
            "g_loss": g_loss.item(),
            "g_adv": adv.item(),
            "diversity": div.item(),
        })
        if not all(np.isfinite(v) for v in metrics.values()):
            raise TrainingError(f"non-finite loss at step {step}", step=step)
        history.append({"step": step, **metrics})
        if log_fn is not None:
            log_fn(step, metrics)
        if sample_fn is not None and sample_every and (step + 1) % sample_every == 0:
            sample_fn(step, fake_a.data.copy())

    info = {"history": history, "final": history[-1], "sigma": sigma}
    return gen, info


def motion_transfer(
    motion_gen: MotionGenerator,
    video_gen: VideoGenerator,
    z_m: Tensor,
    z_a: Tensor,
    times,
    sigma: float | None = None,
) -> tuple[Tensor, Tensor]:
    """Drive one domain's video generator with another domain's motion.

    Returns (video, keypoints); raises on incompatible keypoint counts.
    """
    if motion_gen.keypoints != video_gen.keypoints:
        raise ContractError(
            f"keypoint mismatch: motion model has {motion_gen.keypoints}, "
            f"video model expects {video_gen.keypoints}")
    s = sigma if sigma is not None else default_sigma(video_gen.size)
    with no_grad():
        coords = motion_gen.generate_keypoints(z_m, times)
        heatmaps = render_heatmaps(coords, video_gen.size, video_gen.size, s)
        video = video_gen(z_a, heatmaps, training=False)
    return video, coords
