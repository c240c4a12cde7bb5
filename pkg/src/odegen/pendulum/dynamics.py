"""Damped pendulum dynamics, oracle datasets, and smoothness metrics.

State is (angle, angular velocity).  The vector field is

    d(angle)/dt    = velocity
    d(velocity)/dt = -(g / length) * sin(angle) - (damping / mass) * velocity

and total mechanical energy is 0.5*m*l^2*w^2 + m*g*l*(1 - cos(angle)).
The field evaluates through numpy (sin/cos are not differentiable ops here);
it exists to simulate ground truth, not to be trained through.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..autodiff import Tensor
from ..exceptions import ContractError, DomainError
from ..ode import SolverConfig, Trajectory, integrate, trajectory_to_csv

GRAVITY = 9.81


@dataclass(frozen=True)
class PendulumParams:
    damping: float = 0.2
    length: float = 1.0
    mass: float = 1.0
    gravity: float = GRAVITY

    def validated(self) -> "PendulumParams":
        if self.length <= 0 or self.mass <= 0:
            raise DomainError(f"pendulum needs positive length/mass, got {self}")
        if self.damping < 0 or self.gravity <= 0:
            raise DomainError(f"pendulum needs damping >= 0 and gravity > 0, got {self}")
        return self


def pendulum_field(params: PendulumParams):
    """Vector field over states shaped (..., 2)."""
    p = params.validated()

    def f(h: Tensor, t: float) -> Tensor:
        s = h.data if isinstance(h, Tensor) else np.asarray(h, dtype=np.float64)
        theta = s[..., 0]
        omega = s[..., 1]
        dtheta = omega
        domega = -(p.gravity / p.length) * np.sin(theta) - (p.damping / p.mass) * omega
        return Tensor(np.stack([dtheta, domega], axis=-1))

    return f


def energy(params: PendulumParams, states: np.ndarray) -> np.ndarray:
    """Mechanical energy of states shaped (..., 2)."""
    p = params.validated()
    theta = states[..., 0]
    omega = states[..., 1]
    kinetic = 0.5 * p.mass * p.length**2 * omega**2
    potential = p.mass * p.gravity * p.length * (1.0 - np.cos(theta))
    return kinetic + potential


def simulate(
    params: PendulumParams,
    theta0: float,
    omega0: float = 0.0,
    dt: float = 0.1,
    steps: int = 50,
) -> Trajectory:
    """rk4 rollout; returns ``steps`` states including the initial one."""
    if steps < 1:
        raise ContractError(f"simulate: steps must be >= 1, got {steps}")
    if dt <= 0:
        raise ContractError(f"simulate: dt must be positive, got {dt}")
    f = pendulum_field(params)
    h0 = Tensor(np.array([theta0, omega0]))
    if steps == 1:
        return Trajectory(np.array([0.0]), Tensor(h0.data[None, :]))
    times = dt * np.arange(1, steps)
    cfg = SolverConfig(method="rk4", substeps=1)
    tail = integrate(f, h0, 0.0, times, cfg)
    states = np.concatenate([h0.data[None, :], tail.state_array()], axis=0)
    return Trajectory(np.concatenate([[0.0], times]), Tensor(states))


def _rk4_batch(states: np.ndarray, dt: float, grav_over_len: np.ndarray, damp_over_mass: np.ndarray, steps: int):
    """Vectorized rk4 across trajectories; identical math to the scalar path."""

    def deriv(s):
        return np.stack(
            [s[:, 1], -grav_over_len * np.sin(s[:, 0]) - damp_over_mass * s[:, 1]], axis=1
        )

    out = np.empty((steps, states.shape[0], 2))
    out[0] = states
    s = states
    for i in range(1, steps):
        k1 = deriv(s)
        k2 = deriv(s + 0.5 * dt * k1)
        k3 = deriv(s + 0.5 * dt * k2)
        k4 = deriv(s + dt * k3)
        s = s + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i] = s
    return out


@dataclass
class PendulumDataset:
    states: np.ndarray      # (N, T, 2)
    dt: float
    params: np.ndarray      # (N, 3): damping, length, mass

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.states.shape[1])


def sample_dataset(
    n: int = 1000,
    seed: int = 0,
    dt: float = 0.1,
    steps: int = 50,
    damping_mean: float = 0.2,
    length_mean: float = 1.0,
    mass_mean: float = 1.0,
    gravity: float = GRAVITY,
) -> PendulumDataset:
    """Oracle dataset: unit-variance normal physical params, clamped to valid ranges.

    damping >= 0, length >= 0.1, mass >= 0.1; initial angle uniform in
    (-pi/2, pi/2), initial velocity 0.
    """
    if n < 1:
        raise ContractError(f"sample_dataset: n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    damping = np.maximum(rng.normal(damping_mean, 1.0, size=n), 0.0)
    length = np.maximum(rng.normal(length_mean, 1.0, size=n), 0.1)
    mass = np.maximum(rng.normal(mass_mean, 1.0, size=n), 0.1)
    theta0 = rng.uniform(-np.pi / 2, np.pi / 2, size=n)
    init = np.stack([theta0, np.zeros(n)], axis=1)
    states = _rk4_batch(init, dt, gravity / length, damping / mass, steps)
    return PendulumDataset(states=states.transpose(1, 0, 2), dt=dt, params=np.stack([damping, length, mass], axis=1))


def roughness(seq: np.ndarray) -> float:
    """Mean absolute second difference of the angle channel.

    Accepts (T,), (T, D) with angle first, or (N, T, D) batches.
    """
    arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :, None]
    elif arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.shape[1] < 3:
        raise ContractError(f"roughness needs at least 3 timesteps, got {arr.shape[1]}")
    theta = arr[:, :, 0]
    second = theta[:, 2:] - 2.0 * theta[:, 1:-1] + theta[:, :-2]
    return float(np.mean(np.abs(second)))


def consistency_residual(seq: np.ndarray, dt: float) -> float:
    """Mean |(theta_{t+1} - theta_t)/dt - velocity_t| over a batch of (theta, velocity) sequences."""
    arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.shape[1] < 2:
        raise ContractError("consistency_residual needs at least 2 timesteps")
    theta = arr[:, :, 0]
    omega = arr[:, :, 1]
    return float(np.mean(np.abs((theta[:, 1:] - theta[:, :-1]) / dt - omega[:, :-1])))


def white_noise_like(states: np.ndarray, seed: int = 0) -> np.ndarray:
    """iid normal sequences with the dataset's per-channel std (the noise baseline)."""
    rng = np.random.default_rng(seed)
    std = states.std(axis=(0, 1), keepdims=True)
    return rng.normal(size=states.shape) * std


def save_dataset_csv(ds: PendulumDataset, out_dir) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    times = ds.times
    for i in range(ds.states.shape[0]):
        path = out / f"trajectory_{i:04d}.csv"
        trajectory_to_csv(Trajectory(times, Tensor(ds.states[i])), path)
        names.append(str(path))
    return names
