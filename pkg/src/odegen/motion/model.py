"""Stage-I motion generator: a latent ODE whose path reads out keypoint tracks.

A motion noise vector is mapped to an initial latent state, the latent evolves
under a small learned vector field, and a readout maps every latent state to K
normalized keypoint coordinates.  Because the latent path is a single
continuous trajectory, the model can be sampled on any time grid at any frame
rate after training.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..autodiff import Tensor, load_checkpoint, reshape, save_checkpoint, transpose
from ..exceptions import ContractError, UnsupportedConfigError
from ..nn import MLP, Module
from ..ode import SolverConfig, integrate, integrate_recorded


class MotionGenerator(Module):
    def __init__(
        self,
        rng: np.random.Generator,
        noise_dim: int = 128,
        latent_dim: int = 128,
        keypoints: int = 4,
    ):
        self.mapper = MLP(
            [noise_dim, latent_dim, latent_dim, latent_dim, latent_dim],
            ["relu", "relu", "relu", None],
            rng,
        )
        self.field_net = MLP([latent_dim, latent_dim, latent_dim], ["tanh", None], rng)
        self.readout = MLP(
            [latent_dim, latent_dim, latent_dim, 2 * keypoints],
            ["relu", "relu", None],
            rng,
        )
        # start keypoints near the frame center so early samples stay in view
        self.readout.layers[-1].bias.data[:] = 0.5
        self.noise_dim = noise_dim
        self.latent_dim = latent_dim
        self.keypoints = keypoints

    def field(self):
        net = self.field_net
        return lambda h, t: net(h)

    def initial_latent(self, z: Tensor) -> Tensor:
        if z.ndim != 2 or z.shape[1] != self.noise_dim:
            raise ContractError(f"motion noise must be (B, {self.noise_dim}), got {z.shape}")
        return self.mapper(z)

    def generate_keypoints(
        self,
        z: Tensor,
        times,
        solver: SolverConfig | None = None,
        recorded: bool = False,
    ) -> Tensor:
        """Sample keypoint tracks: (B, noise) -> (B, T, K, 2) normalized coords."""
        cfg = solver if solver is not None else SolverConfig(method="rk4", substeps=4)
        if recorded and cfg.method == "dopri5":
            raise UnsupportedConfigError("recorded sampling requires a fixed-step solver")
        h0 = self.initial_latent(z)
        run = integrate_recorded if recorded else integrate
        traj = run(self.field(), h0, 0.0, times, cfg)
        t, b = traj.states.shape[0], traj.states.shape[1]
        flat = reshape(traj.states, (t * b, self.latent_dim))
        coords = reshape(self.readout(flat), (t, b, self.keypoints, 2))
        return transpose(coords, (1, 0, 2, 3))

    # -- persistence -----------------------------------------------------------

    def meta(self) -> dict:
        return {
            "model": "motion",
            "noise_dim": self.noise_dim,
            "latent_dim": self.latent_dim,
            "keypoints": self.keypoints,
        }

    def save(self, path) -> None:
        save_checkpoint(path, self.parameters())
        Path(str(path) + ".json").write_text(json.dumps(self.meta(), indent=2))

    @classmethod
    def load(cls, path) -> "MotionGenerator":
        meta_path = Path(str(path) + ".json")
        if not meta_path.exists():
            raise ContractError(f"missing checkpoint sidecar {meta_path}")
        meta = json.loads(meta_path.read_text())
        if meta.get("model") != "motion":
            raise ContractError(f"{path} is not a motion checkpoint (model={meta.get('model')!r})")
        gen = cls(
            np.random.default_rng(0),
            noise_dim=int(meta["noise_dim"]),
            latent_dim=int(meta["latent_dim"]),
            keypoints=int(meta["keypoints"]),
        )
        gen.load_state(load_checkpoint(path))
        return gen
