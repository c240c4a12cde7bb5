import time, numpy as np
from odegen.pendulum import sample_dataset, roughness, consistency_residual, white_noise_like
from odegen.pendulum.generators import PendulumTrainConfig, train_pendulum_generator
from odegen.autodiff import Tensor

ds = sample_dataset(n=512, seed=123)
noise_res = consistency_residual(white_noise_like(ds.states, seed=7), ds.dt)
noise_rough = roughness(white_noise_like(ds.states, seed=8))
print(f"data rough={roughness(ds.states):.4f} noise rough={noise_rough:.4f} "
      f"data res={consistency_residual(ds.states, ds.dt):.4f} noise res={noise_res:.4f}", flush=True)

for kind in ("ode", "rnn"):
    for seed in (0, 1, 2):
        t0 = time.time()
        cfg = PendulumTrainConfig(kind=kind, steps=600, batch_size=64, seed=seed)
        gen, info = train_pendulum_generator(ds, cfg)
        rng = np.random.default_rng(1000 + seed)
        z = Tensor(rng.normal(size=(256, cfg.noise_dim)))
        times = ds.dt * np.arange(1, ds.states.shape[1] + 1)
        samp = gen.sample(z, times, rng=rng).data
        r = roughness(samp)
        res = consistency_residual(samp, ds.dt)
        print(f"{kind} seed={seed}: rough={r:.4f} res={res:.4f} (10x bar={noise_res/10:.4f}) "
          f"params={info['generator_params']} {time.time()-t0:.0f}s", flush=True)
