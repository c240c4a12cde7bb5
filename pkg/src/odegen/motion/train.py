"""Adversarial training of the keypoint motion generator.

Real keypoint tracks are rendered to Gaussian heatmaps and scored by a
per-frame critic and a clip critic, both trained with the gradient-penalty
Wasserstein objective.  The generator minimizes the negated critic scores
plus an initial-state diversity ratio that penalizes latent collapse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..autodiff import Adam, Tensor, gradients, mean, no_grad, transpose
from ..exceptions import ContractError, TrainingError
from ..gan import diversity_ratio_loss, wgan_gp_loss
from ..nn import Module
from ..ode import SolverConfig
from .discriminators import DESK_BASE, DESK_CAP, FrameHeatmapCritic, SequenceHeatmapCritic
from .heatmaps import default_sigma, render_heatmaps
from .model import MotionGenerator


def initial_diversity_loss(mapper, z_a: Tensor, z_b: Tensor, eps: float = 1e-8) -> Tensor:
    """Latent-distance over initial-state-distance ratio; low when distinct
    noise vectors map to distinct initial latents."""
    return diversity_ratio_loss(z_a, z_b, mapper(z_a), mapper(z_b), eps=eps)


@dataclass
class Stage1Config:
    keypoints: int = 4
    size: int = 16
    frames: int = 16
    fps: float = 16.0
    sigma: float | None = None
    noise_dim: int = 128
    latent_dim: int = 128
    batch: int = 16
    steps: int = 300
    d_steps: int = 5
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.9
    lambda_gp: float = 10.0
    lambda_div: float = 1.0
    substeps: int = 4
    critic_base: int = DESK_BASE
    critic_cap: int = DESK_CAP
    seed: int = 0

    def validated(self) -> "Stage1Config":
        if self.keypoints < 1 or self.size < 4 or self.frames < 1:
            raise ContractError("stage1: keypoints >= 1, size >= 4, frames >= 1 required")
        if self.batch < 2 or self.steps < 1 or self.d_steps < 1:
            raise ContractError("stage1: batch >= 2, steps >= 1, d_steps >= 1 required")
        if self.fps <= 0 or self.lr <= 0 or self.substeps < 1:
            raise ContractError("stage1: fps, lr, substeps must be positive")
        if self.lambda_gp < 0 or self.lambda_div < 0:
            raise ContractError("stage1: loss weights must be >= 0")
        return self

    def time_grid(self) -> np.ndarray:
        return np.arange(1, self.frames + 1, dtype=np.float64) / self.fps

    def sigma_px(self) -> float:
        return self.sigma if self.sigma is not None else default_sigma(self.size)


class _CriticPair(Module):
    def __init__(self, frame: Module, seq: Module):
        self.frame = frame
        self.seq = seq


def _frames_view(hm: Tensor, cfg: Stage1Config) -> Tensor:
    b, t = hm.shape[0], hm.shape[1]
    return hm.reshape((b * t, cfg.keypoints, cfg.size, cfg.size))


def _clip_view(hm: Tensor) -> Tensor:
    return transpose(hm, (0, 2, 1, 3, 4))


def train_stage1(
    real_keypoints: np.ndarray,
    cfg: Stage1Config,
    log_fn: Callable[[int, dict], None] | None = None,
) -> tuple[MotionGenerator, dict]:
    """Train on real tracks of shape (N, T, K, 2) with coords in [0, 1].

    Returns the trained generator and an info dict with per-step loss history.
    """
    cfg = cfg.validated()
    real_keypoints = np.asarray(real_keypoints, dtype=np.float64)
    if real_keypoints.ndim != 4 or real_keypoints.shape[1:] != (cfg.frames, cfg.keypoints, 2):
        raise ContractError(
            f"real keypoints must be (N, {cfg.frames}, {cfg.keypoints}, 2), got {real_keypoints.shape}")
    n = real_keypoints.shape[0]
    if n < cfg.batch:
        raise ContractError(f"dataset has {n} tracks, batch is {cfg.batch}")

    rng = np.random.default_rng(cfg.seed)
    gen = MotionGenerator(rng, noise_dim=cfg.noise_dim, latent_dim=cfg.latent_dim,
                          keypoints=cfg.keypoints)
    critic_fr = FrameHeatmapCritic(cfg.keypoints, cfg.size, rng,
                                   base=cfg.critic_base, cap=cfg.critic_cap)
    critic_sq = SequenceHeatmapCritic(cfg.keypoints, cfg.size, cfg.frames, rng,
                                      base=cfg.critic_base, cap=cfg.critic_cap)

    g_store = gen.store()
    d_store = _CriticPair(critic_fr, critic_sq).store()
    g_opt = Adam(g_store, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2)
    d_opt = Adam(d_store, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2)

    times = cfg.time_grid()
    sigma = cfg.sigma_px()
    solver = SolverConfig(method="rk4", substeps=cfg.substeps)

    # render every real track once; training then just slices batches
    with no_grad():
        real_hm_all = render_heatmaps(Tensor(real_keypoints), cfg.size, cfg.size, sigma).data

    def sample_fake_heatmaps(batch: int, recorded: bool) -> tuple[Tensor, Tensor]:
        z = Tensor(rng.normal(size=(batch, cfg.noise_dim)))
        coords = gen.generate_keypoints(z, times, solver=solver, recorded=recorded)
        return z, render_heatmaps(coords, cfg.size, cfg.size, sigma)

    history: list[dict] = []
    for step in range(cfg.steps):
        d_metrics = {}
        for _ in range(cfg.d_steps):
            idx = rng.choice(n, size=cfg.batch, replace=False)
            real_hm = Tensor(real_hm_all[idx])
            with no_grad():
                _, fake_hm = sample_fake_heatmaps(cfg.batch, recorded=False)
            fake_hm = Tensor(fake_hm.data)

            d_fr, _, gp_fr = wgan_gp_loss(critic_fr, _frames_view(real_hm, cfg),
                                          _frames_view(fake_hm, cfg), cfg.lambda_gp, rng)
            d_sq, _, gp_sq = wgan_gp_loss(critic_sq, _clip_view(real_hm),
                                          _clip_view(fake_hm), cfg.lambda_gp, rng)
            d_loss = d_fr + d_sq
            d_opt.step(gradients(d_loss, d_store))
            d_metrics = {
                "d_loss": d_loss.item(),
                "gp_frame": gp_fr.item(),
                "gp_seq": gp_sq.item(),
            }

        z_a, fake_hm = sample_fake_heatmaps(cfg.batch, recorded=True)
        adv = -(mean(critic_fr(_frames_view(fake_hm, cfg))) + mean(critic_sq(_clip_view(fake_hm))))
        z_b = Tensor(rng.normal(size=(cfg.batch, cfg.noise_dim)))
        div = initial_diversity_loss(gen.initial_latent, z_a, z_b)
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

    info = {"history": history, "final": history[-1], "sigma": sigma, "times": times.tolist()}
    return gen, info
