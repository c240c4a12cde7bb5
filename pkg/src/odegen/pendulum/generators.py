"""Sequence generators for the pendulum study.

Both generators share the noise-to-initial-state mapper and the readout; they
differ only in how the hidden state evolves: a learned vector field integrated
through time versus a gated recurrent cell fed fresh Gaussian noise at every
step.  Both are trained adversarially (frame critic + sequence critic,
WGAN-GP) against oracle (angle, velocity) sequences.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Adam, Tensor, concat, div, gradients, mean, no_grad, reshape, sub, transpose
from ..exceptions import ContractError, TrainingError
from ..gan import diversity_ratio_loss, wgan_gp_loss
from ..nn import GRUCell, Linear, MLP, Module
from ..ode import SolverConfig, integrate, integrate_recorded
from .dynamics import PendulumDataset


class OdeSequenceGenerator(Module):
    """noise -> initial latent -> integrated latent path -> (angle, velocity) readout."""

    kind = "ode"

    def __init__(self, noise_dim: int, latent_dim: int, rng: np.random.Generator, out_dim: int = 2):
        self.mapper = MLP(
            [noise_dim, latent_dim, latent_dim, latent_dim, latent_dim],
            ["relu", "relu", "relu", None],
            rng,
        )
        self.field_net = MLP([latent_dim, latent_dim, latent_dim], ["tanh", None], rng)
        self.readout = MLP([latent_dim, latent_dim, latent_dim, out_dim], ["relu", "relu", None], rng)
        self.noise_dim = noise_dim
        self.latent_dim = latent_dim
        self.out_dim = out_dim

    def field(self):
        net = self.field_net
        return lambda h, t: net(h)

    def initial_latent(self, z: Tensor) -> Tensor:
        return self.mapper(z)

    def sample(self, z: Tensor, times, rng=None, recorded: bool = False, substeps: int = 1) -> Tensor:
        """Generate (B, T, out_dim) sequences at the given times (t0 = 0)."""
        h0 = self.initial_latent(z)
        cfg = SolverConfig(method="rk4", substeps=substeps)
        run = integrate_recorded if recorded else integrate
        traj = run(self.field(), h0, 0.0, times, cfg)
        t, b = traj.states.shape[0], traj.states.shape[1]
        flat = reshape(traj.states, (t * b, self.latent_dim))
        out = reshape(self.readout(flat), (t, b, self.out_dim))
        return transpose(out, (1, 0, 2))


class RnnSequenceGenerator(Module):
    """Same mapper/readout, but the latent path is a gated recurrent cell on noise."""

    kind = "rnn"

    def __init__(
        self,
        noise_dim: int,
        hidden_dim: int,
        rng: np.random.Generator,
        step_noise_dim: int = 8,
        out_dim: int = 2,
    ):
        self.mapper = MLP(
            [noise_dim, hidden_dim, hidden_dim, hidden_dim, hidden_dim],
            ["relu", "relu", "relu", None],
            rng,
        )
        self.cell = GRUCell(step_noise_dim, hidden_dim, rng)
        self.readout = MLP([hidden_dim, hidden_dim, hidden_dim, out_dim], ["relu", "relu", None], rng)
        self.noise_dim = noise_dim
        self.hidden_dim = hidden_dim
        self.step_noise_dim = step_noise_dim
        self.out_dim = out_dim

    def sample(self, z: Tensor, times, rng: np.random.Generator | None = None, recorded: bool = False, substeps: int = 1) -> Tensor:
        if rng is None:
            raise ContractError("RnnSequenceGenerator.sample needs an rng for the per-step noise")
        n_steps = len(times)
        b = z.shape[0]
        ctx = no_grad() if not recorded else _nullcontext()
        with ctx:
            h = self.mapper(z)
            outs = []
            for _ in range(n_steps):
                eps = Tensor(rng.normal(size=(b, self.step_noise_dim)))
                h = self.cell(eps, h)
                outs.append(reshape(self.readout(h), (b, 1, self.out_dim)))
        from ..autodiff import concat

        return concat(outs, axis=1)


class _nullcontext:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


class _swapped:
    """Temporarily load averaged weights into a parameter store."""

    def __init__(self, store, averaged):
        self.store = store
        self.averaged = averaged
        self.saved = None

    def __enter__(self):
        if self.averaged is not None:
            self.saved = {k: v.data.copy() for k, v in self.store.items()}
            for k, v in self.store.items():
                v.data[...] = self.averaged[k]
        return self

    def __exit__(self, *exc):
        if self.saved is not None:
            for k, v in self.store.items():
                v.data[...] = self.saved[k]
        return False


def matched_rnn_hidden(
    noise_dim: int, latent_dim: int, step_noise_dim: int = 8, out_dim: int = 2
) -> tuple[int, int, int]:
    """Pick the GRU hidden size whose total generator parameter count best
    matches the ODE generator's; returns (hidden, rnn_count, ode_count)."""
    throwaway = np.random.default_rng(0)
    ode_count = OdeSequenceGenerator(noise_dim, latent_dim, throwaway, out_dim).param_count()
    best = None
    for h in range(4, max(8, 4 * latent_dim)):
        c = RnnSequenceGenerator(noise_dim, h, throwaway, step_noise_dim, out_dim).param_count()
        gap = abs(c - ode_count)
        if best is None or gap < best[0]:
            best = (gap, h, c)
    return best[1], best[2], ode_count


class ChannelStats:
    """Fixed per-channel standardization constants taken from the dataset."""

    def __init__(self, states: np.ndarray, dt: float):
        self.mean = states.reshape(-1, states.shape[-1]).mean(axis=0)
        self.std = states.reshape(-1, states.shape[-1]).std(axis=0) + 1e-12
        resid = (states[:, 1:, 0] - states[:, :-1, 0]) / dt - states[:, :-1, 1]
        self.resid_std = float(resid.std()) + 1e-12
        self.dt = dt


class _FrameCritic(Module):
    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator,
                 stats: ChannelStats | None = None):
        self.net = MLP([in_dim, hidden, hidden, 1], ["leaky-relu", "leaky-relu", None], rng)
        self._stats = stats

    def __call__(self, x: Tensor) -> Tensor:
        if self._stats is not None:
            x = div(sub(x, Tensor(self._stats.mean)), Tensor(self._stats.std))
        return reshape(self.net(x), (x.shape[0],))


class _SequenceCritic(Module):
    """Temporal conv critic over (B, T, D) sequences.

    With stats attached, inputs are standardized per channel and the critic
    additionally sees the normalized first-difference consistency channel
    ((x0_{t+1} - x0_t)/dt - x1_t), giving it direct leverage on the coupling
    between a value channel and its stated derivative.
    """

    def __init__(self, in_dim: int, seq_len: int, hidden: int, rng: np.random.Generator,
                 stats: ChannelStats | None = None, consistency_feature: bool = False):
        from ..nn import Conv2d

        if consistency_feature and stats is None:
            raise ContractError("consistency feature requires channel stats")
        channels = in_dim + (1 if consistency_feature else 0)
        self.convs = [
            Conv2d(channels, hidden // 2, (1, 4), rng, stride=(1, 2), padding=(0, 1)),
            Conv2d(hidden // 2, hidden, (1, 4), rng, stride=(1, 2), padding=(0, 1)),
            Conv2d(hidden, hidden, (1, 4), rng, stride=(1, 2), padding=(0, 1)),
        ]
        t = seq_len
        for _ in self.convs:
            t = (t + 2 - 4) // 2 + 1
        self.head = Linear(hidden * t, 1, rng)
        self._flat = hidden * t
        self.in_dim = in_dim
        self._stats = stats
        self._use_feature = consistency_feature

    def _channels(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        parts = []
        if self._use_feature:
            s = self._stats
            diff = div(sub(x[:, 1:, 0], x[:, :-1, 0]), Tensor(s.dt))
            resid = div(sub(diff, x[:, :-1, 1]), Tensor(s.resid_std))
            resid = concat([resid, Tensor(np.zeros((b, 1)))], axis=1)
            parts.append(reshape(resid, (b, 1, t)))
        if self._stats is not None:
            x = div(sub(x, Tensor(self._stats.mean)), Tensor(self._stats.std))
        parts.insert(0, transpose(x, (0, 2, 1)))
        y = parts[0] if len(parts) == 1 else concat(parts, axis=1)
        return reshape(y, (b, y.shape[1], 1, t))

    def __call__(self, x: Tensor) -> Tensor:
        from ..autodiff import leaky_relu

        b = x.shape[0]
        y = self._channels(x)
        for c in self.convs:
            y = leaky_relu(c(y), 0.2)
        return reshape(self.head(reshape(y, (b, self._flat))), (b,))


@dataclass
class PendulumTrainConfig:
    kind: str = "ode"
    noise_dim: int = 32
    latent_dim: int = 32
    step_noise_dim: int = 8
    critic_hidden: int = 64
    batch_size: int = 64
    steps: int = 600
    d_steps_per_g: int = 2
    lr: float = 1e-3
    adam_beta1: float = 0.5
    adam_beta2: float = 0.9
    lambda_gp: float = 10.0
    lambda_div_initial: float = 1.0
    substeps: int = 1
    critic_standardize: bool = True
    consistency_feature: bool = True
    lr_decay: bool = True
    ema_decay: float = 0.998
    seed: int = 0


def train_pendulum_generator(
    dataset: PendulumDataset,
    cfg: PendulumTrainConfig,
    log_fn=None,
    eval_fn=None,
):
    """Adversarial training of one generator kind; returns (generator, info dict)."""
    if cfg.kind not in ("ode", "rnn"):
        raise ContractError(f"generator kind must be 'ode' or 'rnn', got {cfg.kind!r}")
    rng = np.random.default_rng(cfg.seed)
    data = dataset.states
    n, t_len, dim = data.shape
    times = dataset.dt * np.arange(1, t_len + 1)

    if cfg.kind == "ode":
        gen = OdeSequenceGenerator(cfg.noise_dim, cfg.latent_dim, rng, out_dim=dim)
        hidden_info = {}
    else:
        hidden, rnn_count, ode_count = matched_rnn_hidden(
            cfg.noise_dim, cfg.latent_dim, cfg.step_noise_dim, out_dim=dim
        )
        gen = RnnSequenceGenerator(cfg.noise_dim, hidden, rng, cfg.step_noise_dim, out_dim=dim)
        hidden_info = {"rnn_hidden": hidden, "rnn_param_count": rnn_count, "ode_param_count": ode_count}

    stats = ChannelStats(data, dataset.dt) if cfg.critic_standardize else None
    critic_f = _FrameCritic(dim, cfg.critic_hidden, rng, stats=stats)
    critic_s = _SequenceCritic(dim, t_len, cfg.critic_hidden, rng, stats=stats,
                               consistency_feature=cfg.consistency_feature and dim >= 2)
    g_store = gen.store()
    d_store = _Pair(critic_f, critic_s).store()
    opt_g = Adam(g_store, cfg.lr, cfg.adam_beta1, cfg.adam_beta2)
    opt_d = Adam(d_store, cfg.lr, cfg.adam_beta1, cfg.adam_beta2)

    def sample_fake(batch, recorded):
        z = Tensor(rng.normal(size=(batch, cfg.noise_dim)))
        return z, gen.sample(z, times, rng=rng, recorded=recorded, substeps=cfg.substeps)

    def frames(x: Tensor) -> Tensor:
        return reshape(x, (x.shape[0] * x.shape[1], dim))

    # averaged weights are what the caller samples from; raw weights keep training
    ema = {k: v.data.copy() for k, v in g_store.items()} if cfg.ema_decay > 0 else None

    t_start = time.monotonic()
    for step in range(cfg.steps):
        if cfg.lr_decay:
            opt_d.lr = opt_g.lr = cfg.lr * (1.0 - step / cfg.steps)
        for _ in range(cfg.d_steps_per_g):
            real = Tensor(data[rng.integers(0, n, size=cfg.batch_size)])
            with no_grad():
                _, fake = sample_fake(cfg.batch_size, recorded=False)
            d_fr, _, _ = wgan_gp_loss(critic_f, frames(real), frames(fake), cfg.lambda_gp, rng)
            d_sq, _, pen = wgan_gp_loss(critic_s, real, fake, cfg.lambda_gp, rng)
            d_loss = d_fr + d_sq
            if not np.isfinite(d_loss.item()):
                raise TrainingError(f"non-finite critic loss at step {step}", step=step)
            opt_d.step(gradients(d_loss, d_store))

        z, fake = sample_fake(cfg.batch_size, recorded=True)
        z2 = Tensor(rng.normal(size=(cfg.batch_size, cfg.noise_dim)))
        g_adv = -(mean(critic_f(frames(fake))) + mean(critic_s(fake)))
        if cfg.kind == "ode":
            div_loss = diversity_ratio_loss(z, z2, gen.initial_latent(z), gen.initial_latent(z2))
        else:
            div_loss = diversity_ratio_loss(z, z2, gen.mapper(z), gen.mapper(z2))
        g_loss = g_adv + Tensor(cfg.lambda_div_initial) * div_loss
        if not np.isfinite(g_loss.item()):
            raise TrainingError(f"non-finite generator loss at step {step}", step=step)
        opt_g.step(gradients(g_loss, g_store))
        if ema is not None:
            for name, param in g_store.items():
                ema[name] += (1.0 - cfg.ema_decay) * (param.data - ema[name])

        if log_fn is not None:
            log_fn(step, "d_loss", d_loss.item())
            log_fn(step, "g_loss", g_loss.item())
            log_fn(step, "gp", pen.item())
        if eval_fn is not None:
            with _swapped(g_store, ema):
                eval_fn(step, gen)

    if ema is not None:
        for name, param in g_store.items():
            param.data[...] = ema[name]

    info = {
        "kind": cfg.kind,
        "generator_params": gen.param_count(),
        "train_seconds": time.monotonic() - t_start,
        **hidden_info,
    }
    return gen, info


class _Pair(Module):
    """Glue module so two critics share one parameter store."""

    def __init__(self, a: Module, b: Module):
        self.a = a
        self.b = b


def save_pendulum_generator(gen, path) -> None:
    import json
    from pathlib import Path

    from ..autodiff import save_checkpoint

    if gen.kind == "ode":
        meta = {"model": "pendulum", "kind": "ode", "noise_dim": gen.noise_dim,
                "latent_dim": gen.latent_dim, "out_dim": gen.out_dim}
    else:
        meta = {"model": "pendulum", "kind": "rnn", "noise_dim": gen.noise_dim,
                "hidden_dim": gen.hidden_dim, "step_noise_dim": gen.step_noise_dim,
                "out_dim": gen.out_dim}
    save_checkpoint(path, gen.parameters())
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2))


def load_pendulum_generator(path):
    import json
    from pathlib import Path

    from ..autodiff import load_checkpoint

    meta_path = Path(str(path) + ".json")
    if not meta_path.exists():
        raise ContractError(f"missing checkpoint sidecar {meta_path}")
    meta = json.loads(meta_path.read_text())
    if meta.get("model") != "pendulum":
        raise ContractError(f"{path} is not a pendulum checkpoint (model={meta.get('model')!r})")
    throwaway = np.random.default_rng(0)
    if meta["kind"] == "ode":
        gen = OdeSequenceGenerator(int(meta["noise_dim"]), int(meta["latent_dim"]),
                                   throwaway, out_dim=int(meta["out_dim"]))
    else:
        gen = RnnSequenceGenerator(int(meta["noise_dim"]), int(meta["hidden_dim"]),
                                   throwaway, int(meta["step_noise_dim"]),
                                   out_dim=int(meta["out_dim"]))
    gen.load_state(load_checkpoint(path))
    return gen
