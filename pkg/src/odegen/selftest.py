"""Fast invariant checks covering every module; run via the `selftest` command.

Each check is a no-argument callable that raises AssertionError (or any
package error) on failure.  The whole suite is closed-form or tiny-scale and
finishes in seconds.
"""

from __future__ import annotations

import tempfile
import traceback
from pathlib import Path

import numpy as np


def _autodiff_gradients():
    from .autodiff import Tensor, grad, mul, sum_

    x = Tensor(np.array([3.0]), requires_grad=True)
    (g,) = grad(sum_(mul(x, x)), [x])
    assert np.allclose(g.data, [6.0]), g.data
    y = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
    w = Tensor(np.array([10.0, 20.0]), requires_grad=True)
    (gw,) = grad(sum_(mul(y, w)), [w])
    assert np.allclose(gw.data, [4.0, 6.0]), gw.data


def _ode_exponential():
    from .autodiff import Tensor
    from .ode import SolverConfig, integrate

    h0 = Tensor(np.array([[1.0]]))
    traj = integrate(lambda h, t: h, h0, 0.0, [1.0], SolverConfig(method="rk4", substeps=16))
    assert abs(traj.states.data[0, 0, 0] - np.e) < 1e-5


def _pendulum_energy():
    from .pendulum import PendulumParams, energy, simulate

    undamped = PendulumParams(damping=0.0, length=1.0, mass=1.0)
    traj = simulate(undamped, 0.5, 0.0, dt=0.01, steps=100)
    e = energy(undamped, traj.states.data)
    assert np.abs(e - e[0]).max() / abs(e[0]) < 1e-6
    damped = PendulumParams(damping=0.4, length=1.0, mass=1.0)
    e2 = energy(damped, simulate(damped, 0.5, 0.0, dt=0.01, steps=100).states.data)
    assert (np.diff(e2) <= 1e-9).all()


def _gan_closed_forms():
    from .autodiff import Tensor
    from .gan import diversity_ratio_loss, gradient_penalty

    critic = lambda x: Tensor(np.zeros(x.shape[0])) * x.sum() * 0.0 + (x * 0.0).sum(axis=1)
    rng = np.random.default_rng(0)
    real = Tensor(rng.normal(size=(4, 3)))
    fake = Tensor(rng.normal(size=(4, 3)))
    pen = gradient_penalty(critic, real, fake, rng)
    assert abs(pen.item() - 1.0) < 1e-6, pen.item()
    z = Tensor(rng.normal(size=(4, 2)))
    out = Tensor(rng.normal(size=(4, 5)))
    assert diversity_ratio_loss(z, z, out, out).item() == 0.0


def _heatmap_unit_values():
    from .autodiff import Tensor
    from .motion import render_heatmaps

    sigma = 2.0
    coords = Tensor(np.array([[0.5, 0.5]]))
    h = render_heatmaps(coords, 17, 17, sigma).data[0]
    assert abs(h[8, 8] - 1.0) < 1e-12
    assert abs(h[8, 10] - np.exp(-0.5)) < 1e-12  # 2 px = sigma away


def _critic_ladders():
    from .motion.discriminators import frame_critic_layers, sequence_critic_layers

    layers = frame_critic_layers(64, base=32, cap=256)
    assert layers[-1][0] == 1
    seq = sequence_critic_layers(16, 16, base=16, cap=64)
    assert seq[-1][0] == 1


def _composition_identity():
    from .autodiff import Tensor
    from .video.model import CompositionBlock

    rng = np.random.default_rng(0)
    block = CompositionBlock(4, 4, keypoints=2, feature_dim=8, rng=rng)
    # pushing both mixing gates hard negative makes gamma/beta appearance-only
    block.alpha_gamma_raw.data[:] = -50.0
    block.alpha_beta_raw.data[:] = -50.0
    x = Tensor(rng.normal(size=(2, 3, 4, 6, 6)))
    f = Tensor(rng.normal(size=(2, 8)))
    hm_a = Tensor(rng.uniform(size=(2, 3, 2, 6, 6)))
    hm_b = Tensor(rng.uniform(size=(2, 3, 2, 6, 6)))
    a = block.denorm(x, f, hm_a).data
    b = block.denorm(x, f, hm_b).data
    assert np.abs(a - b).max() < 1e-9


def _frechet_trivials():
    from .evaluation import GaussianStats, fit_stats, frechet_distance

    stats = fit_stats(np.random.default_rng(0).normal(size=(20, 3)))
    assert frechet_distance(stats, stats) < 1e-8
    a = GaussianStats(np.zeros(1), np.array([[4.0]]))
    b = GaussianStats(np.zeros(1), np.array([[1.0]]))
    assert abs(frechet_distance(a, b) - 1.0) < 1e-10


def _synthetic_determinism():
    from .video import make_synthetic_video_dataset

    a = make_synthetic_video_dataset(2, frames=2, height=8, width=8, seed=9)
    b = make_synthetic_video_dataset(2, frames=2, height=8, width=8, seed=9)
    assert np.array_equal(a.videos, b.videos)
    assert np.array_equal(a.keypoints, b.keypoints)


def _config_defaults():
    from .config import RunConfig, load_config
    from .exceptions import ConfigError

    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "empty.json"
        p.write_text("")
        assert load_config(p) == RunConfig()
        p.write_text('{"lambda_gp": -1}')
        try:
            load_config(p)
        except ConfigError as exc:
            assert "lambda_gp" in str(exc)
        else:
            raise AssertionError("invalid config accepted")


def _image_roundtrip():
    from .images import read_ppm, write_ppm

    with tempfile.TemporaryDirectory() as d:
        frame = np.random.default_rng(0).uniform(-1, 1, size=(3, 4, 5))
        p = Path(d) / "f.ppm"
        write_ppm(p, frame)
        back = read_ppm(p)
        assert np.abs(back - frame).max() <= 1.0 / 255 + 1e-12
        write_ppm(p, back)
        assert np.array_equal(read_ppm(p), back)


CHECKS = [
    ("autodiff-gradients", _autodiff_gradients),
    ("ode-exponential", _ode_exponential),
    ("pendulum-energy", _pendulum_energy),
    ("gan-closed-forms", _gan_closed_forms),
    ("heatmap-unit-values", _heatmap_unit_values),
    ("critic-ladders", _critic_ladders),
    ("composition-identity", _composition_identity),
    ("frechet-trivials", _frechet_trivials),
    ("synthetic-determinism", _synthetic_determinism),
    ("config-defaults", _config_defaults),
    ("image-roundtrip", _image_roundtrip),
]


def run_selftest(print_fn=print) -> bool:
    """Run all checks; prints one line per check, returns overall success."""
    ok = True
    for name, check in CHECKS:
        try:
            check()
        except Exception:
            ok = False
            print_fn(f"FAIL {name}")
            print_fn(traceback.format_exc())
        else:
            print_fn(f"PASS {name}")
    return ok
