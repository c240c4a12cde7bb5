"""Variant sweep for the standardized/consistency-feature critics (dev only)."""
import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")

from odegen.autodiff import Tensor, no_grad
from odegen.pendulum import (
    PendulumTrainConfig,
    consistency_residual,
    roughness,
    sample_dataset,
    train_pendulum_generator,
    white_noise_like,
)

ds = sample_dataset(512, seed=123)
noise = white_noise_like(ds.states, np.random.default_rng(5))
bar = consistency_residual(noise, ds.dt) / 10.0
print(f"bar={bar:.4f} data_res={consistency_residual(ds.states, ds.dt):.4f}", flush=True)

EVAL_EVERY = 150
T = ds.states.shape[1]
TIMES = ds.dt * np.arange(1, T + 1)


def evaluate(tag, step, gen, t0):
    if (step + 1) % EVAL_EVERY:
        return
    rng = np.random.default_rng(99)
    with no_grad():
        z = Tensor(rng.normal(size=(128, gen.noise_dim)))
        out = gen.sample(z, TIMES, rng=rng).data
    res = consistency_residual(out, ds.dt)
    rough = roughness(out)
    print(f"{tag} step={step+1} res={res:.4f} rough={rough:.4f} ({time.time()-t0:.0f}s)", flush=True)


def run(tag, kind="ode", **kw):
    cfg = PendulumTrainConfig(kind=kind, steps=1200, seed=0, batch_size=64, **kw)
    t0 = time.time()
    train_pendulum_generator(ds, cfg, eval_fn=lambda s, g: evaluate(tag, s, g, t0))
    print(f"{tag}: done {time.time()-t0:.0f}s", flush=True)


run("A_full")                                    # std + feature + decay, lam_div 1.0
run("B_div03", lambda_div_initial=0.3)
run("C_nodecay", lr_decay=False)
run("D_nofeat", consistency_feature=False)
run("E_rnn", kind="rnn")
