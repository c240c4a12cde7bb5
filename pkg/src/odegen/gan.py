"""Wasserstein adversarial losses with gradient penalty, and diversity ratios.

The penalty differentiates the critic w.r.t. a random interpolate of real and
fake samples; because the first derivative is kept on the graph, the penalty
itself trains the critic parameters through second-order autodiff.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .autodiff import (
    Tensor,
    abs_,
    add,
    div,
    input_gradient,
    mean,
    mul,
    sqrt,
    sub,
    sum_,
)
from .exceptions import ContractError, ShapeError

Critic = Callable[[Tensor], Tensor]

# keeps the norm's backward finite when the critic gradient is exactly zero;
# below the float64 ulp for any norm >= 0.5, so closed-form checks are unaffected
_NORM_GUARD = 1e-16


def per_sample_grad_norm(g: Tensor) -> Tensor:
    """L2 norm over non-batch axes; (N, ...) -> (N,)."""
    axes = tuple(range(1, g.ndim))
    return sqrt(add(sum_(mul(g, g), axis=axes), Tensor(_NORM_GUARD)))


def gradient_penalty(critic: Critic, real: Tensor, fake: Tensor, rng: np.random.Generator) -> Tensor:
    """Mean squared distance of the critic's input-gradient norm from 1.

    Interpolates per sample with u ~ Uniform(0, 1); the interpolate is a fresh
    leaf so the gradient flows to the critic parameters only.
    """
    if real.shape != fake.shape:
        raise ShapeError(f"gradient_penalty: real {real.shape} vs fake {fake.shape}")
    n = real.shape[0]
    u = rng.uniform(size=(n,) + (1,) * (real.ndim - 1))
    x_hat = Tensor(u * real.data + (1.0 - u) * fake.data, requires_grad=True)
    scores = critic(x_hat)
    if scores.shape != (n,):
        raise ShapeError(f"critic must map (N, ...) to (N,), got {scores.shape}")
    g = input_gradient(sum_(scores), x_hat)
    norms = per_sample_grad_norm(g)
    dev = sub(norms, Tensor(1.0))
    return mean(mul(dev, dev))


def wgan_gp_loss(
    critic: Critic,
    real: Tensor,
    fake: Tensor,
    lambda_gp: float,
    rng: np.random.Generator,
) -> tuple[Tensor, Tensor, Tensor]:
    """Return (critic_loss, generator_loss, penalty).

    critic_loss = E[D(fake)] - E[D(real)] + lambda_gp * penalty
    generator_loss = -E[D(fake)]
    """
    if lambda_gp < 0:
        raise ContractError(f"lambda_gp must be >= 0, got {lambda_gp}")
    d_fake = mean(critic(fake))
    d_real = mean(critic(real))
    penalty = gradient_penalty(critic, real, fake, rng)
    d_loss = add(sub(d_fake, d_real), mul(Tensor(lambda_gp), penalty))
    g_loss = mul(Tensor(-1.0), d_fake)
    return d_loss, g_loss, penalty


def diversity_ratio_loss(z_a: Tensor, z_b: Tensor, out_a: Tensor, out_b: Tensor, eps: float = 1e-8) -> Tensor:
    """||z_a - z_b||_1 / (||out_a - out_b||_1 + eps).

    Minimizing this pushes outputs of distinct latents apart.  Identical
    latents give 0 / eps = 0.
    """
    if z_a.shape != z_b.shape:
        raise ShapeError(f"diversity_ratio_loss: latent shapes differ, {z_a.shape} vs {z_b.shape}")
    if out_a.shape != out_b.shape:
        raise ShapeError(f"diversity_ratio_loss: output shapes differ, {out_a.shape} vs {out_b.shape}")
    num = sum_(abs_(sub(z_a, z_b)))
    den = add(sum_(abs_(sub(out_a, out_b))), Tensor(eps))
    return div(num, den)
