"""Oracle tests for pendulum dynamics, dataset sampling, and the sequence generators."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from odegen.autodiff import Tensor, no_grad
from odegen.exceptions import ContractError
from odegen.pendulum import (
    PendulumParams,
    consistency_residual,
    energy,
    load_pendulum_generator,
    matched_rnn_hidden,
    pendulum_field,
    roughness,
    sample_dataset,
    save_dataset_csv,
    save_pendulum_generator,
    simulate,
    white_noise_like,
)
from odegen.pendulum.generators import (
    OdeSequenceGenerator,
    PendulumTrainConfig,
    RnnSequenceGenerator,
    train_pendulum_generator,
)


def field_at(params, theta, omega):
    f = pendulum_field(params)
    out = f(Tensor(np.array([theta, omega])), 0.0)
    return out.data


# -- vector field --------------------------------------------------------------


def test_field_equilibrium_is_stationary():
    np.testing.assert_array_equal(field_at(PendulumParams(), 0.0, 0.0), [0.0, 0.0])


def test_field_gravity_term_at_quarter_turn():
    params = PendulumParams(damping=0.0, length=1.0, mass=1.0, gravity=9.81)
    np.testing.assert_allclose(field_at(params, math.pi / 2, 0.0), [0.0, -9.81], atol=1e-12)


def test_field_damping_term_is_linear_in_velocity():
    params = PendulumParams(damping=0.2, length=1.0, mass=1.0)
    np.testing.assert_allclose(field_at(params, 0.0, 2.0), [2.0, -0.4], atol=1e-12)


# -- oracle simulation ----------------------------------------------------------


def test_simulate_from_rest_stays_at_rest():
    traj = simulate(PendulumParams(), 0.0, 0.0, dt=0.1, steps=30)
    np.testing.assert_array_equal(traj.states.data, np.zeros((30, 2)))


def test_small_angle_period_matches_analytic():
    params = PendulumParams(damping=0.0, length=1.0, mass=1.0, gravity=9.81)
    traj = simulate(params, 0.1, 0.0, dt=0.001, steps=4000)
    theta = traj.states.data[:, 0]
    # upward zero crossings, refined by linear interpolation
    crossings = []
    for i in range(len(theta) - 1):
        if theta[i] < 0.0 <= theta[i + 1]:
            frac = -theta[i] / (theta[i + 1] - theta[i])
            crossings.append((i + frac) * 0.001)
    assert len(crossings) >= 2
    period = crossings[1] - crossings[0]
    expected = 2.0 * math.pi * math.sqrt(1.0 / 9.81)
    assert abs(period - expected) / expected < 0.01


def test_damped_energy_never_increases():
    params = PendulumParams(damping=0.2, length=1.0, mass=1.0)
    traj = simulate(params, 1.2, 0.0, dt=0.1, steps=100)
    e = energy(params, traj.states.data)
    assert np.all(np.diff(e) <= 1e-9)
    assert e[-1] < e[0]


def test_undamped_energy_drift_is_tiny():
    params = PendulumParams(damping=0.0, length=1.0, mass=1.0)
    traj = simulate(params, 1.0, 0.0, dt=0.01, steps=100)
    e = energy(params, traj.states.data)
    drift = np.max(np.abs(e - e[0])) / e[0]
    assert drift < 1e-6


# -- dataset --------------------------------------------------------------------


def test_dataset_rerun_is_bit_identical():
    a = sample_dataset(n=1000, seed=7)
    b = sample_dataset(n=1000, seed=7)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.params, b.params)
    assert a.states.shape == (1000, 50, 2)


def test_dataset_seed_changes_the_draw():
    a = sample_dataset(n=8, seed=0)
    b = sample_dataset(n=8, seed=1)
    assert not np.array_equal(a.states, b.states)


def test_dataset_parameter_means_match_clamped_gaussians():
    """Sample means against the analytic mean of max(N(mu,1), floor)."""

    def clamped_mean(mu, floor):
        a = floor - mu
        phi = math.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)
        cdf = 0.5 * (1.0 + math.erf(a / math.sqrt(2.0)))
        return floor * cdf + mu * (1.0 - cdf) + phi

    ds = sample_dataset(n=8000, seed=3)
    damping, length, mass = ds.params[:, 0], ds.params[:, 1], ds.params[:, 2]
    assert abs(damping.mean() - clamped_mean(0.2, 0.0)) < 0.05
    assert abs(length.mean() - clamped_mean(1.0, 0.1)) < 0.05
    assert abs(mass.mean() - clamped_mean(1.0, 0.1)) < 0.05
    assert damping.min() >= 0.0 and length.min() >= 0.1 and mass.min() >= 0.1


def test_every_sampled_trajectory_decays_energy():
    # fine step: any per-step rise is integrator truncation, orders below the swings
    fine = sample_dataset(n=50, seed=11, dt=0.01, steps=400)
    for i in range(50):
        d, l, m = fine.params[i]
        e = energy(PendulumParams(damping=d, length=l, mass=m), fine.states[i])
        assert np.all(np.diff(e) <= 1e-6 * max(e[0], 1.0)), f"trajectory {i} gained energy"
    # default step: net energy over the window still decreases for every draw
    coarse = sample_dataset(n=50, seed=11)
    for i in range(50):
        d, l, m = coarse.params[i]
        e = energy(PendulumParams(damping=d, length=l, mass=m), coarse.states[i])
        assert e[-1] < e[0], f"trajectory {i} gained net energy"


def test_dataset_csv_files_roundtrip(tmp_path):
    ds = sample_dataset(n=3, seed=0, steps=10)
    names = save_dataset_csv(ds, tmp_path)
    assert len(names) == 3
    from odegen.ode import trajectory_from_csv

    back = trajectory_from_csv(names[1])
    np.testing.assert_allclose(back.states.data, ds.states[1], atol=1e-15)


# -- smoothness metrics ----------------------------------------------------------


def test_roughness_of_constant_and_linear_is_zero():
    assert roughness(np.full(10, 0.7)) == 0.0
    assert roughness(0.3 * np.arange(20.0)) == pytest.approx(0.0, abs=1e-12)


def test_roughness_of_alternating_sequence_is_four():
    seq = np.array([(-1.0) ** t for t in range(12)])
    assert roughness(seq) == pytest.approx(4.0)


def test_roughness_needs_three_samples():
    with pytest.raises(ContractError):
        roughness(np.array([0.0, 1.0]))


@given(st.integers(0, 10**6))
def test_oracle_trajectories_are_smoother_than_matched_noise(seed):
    ds = sample_dataset(n=4, seed=seed % 1000, steps=40)
    noise = white_noise_like(ds.states, seed=seed)
    assert roughness(ds.states) < roughness(noise)


def test_consistency_residual_vanishes_on_perfect_pairs():
    t = np.linspace(0.0, 5.0, 51)
    theta = np.sin(t)
    # forward difference of theta is the exact velocity channel here
    omega = np.diff(theta, append=theta[-1]) / 0.1
    seq = np.stack([theta, omega], axis=1)[None]
    assert consistency_residual(seq[:, :-1], 0.1) < 1e-12


def test_dataset_residual_is_far_below_noise_residual():
    ds = sample_dataset(n=64, seed=5)
    data_res = consistency_residual(ds.states, ds.dt)
    noise_res = consistency_residual(white_noise_like(ds.states, seed=1), ds.dt)
    assert data_res < noise_res / 10.0


# -- sequence generators ----------------------------------------------------------


def make_generators():
    rng = np.random.default_rng(0)
    ode = OdeSequenceGenerator(16, 16, rng)
    hidden, _, _ = matched_rnn_hidden(16, 16)
    rnn = RnnSequenceGenerator(16, hidden, np.random.default_rng(0))
    return ode, rnn


def test_untrained_generators_emit_finite_correctly_shaped_sequences():
    ode, rnn = make_generators()
    times = 0.1 * np.arange(1, 21)
    with no_grad():
        z = Tensor(np.random.default_rng(3).normal(size=(5, 16)))
        for gen in (ode, rnn):
            out = gen.sample(z, times, rng=np.random.default_rng(9))
            assert out.data.shape == (5, 20, 2)
            assert np.all(np.isfinite(out.data))


def test_generator_sampling_is_deterministic_under_seed():
    ode, rnn = make_generators()
    times = 0.1 * np.arange(1, 11)
    for gen in (ode, rnn):
        outs = []
        for _ in range(2):
            with no_grad():
                z = Tensor(np.random.default_rng(42).normal(size=(3, 16)))
                outs.append(gen.sample(z, times, rng=np.random.default_rng(7)).data)
        np.testing.assert_array_equal(outs[0], outs[1])


def test_rnn_capacity_is_matched_to_ode_generator():
    hidden, rnn_count, ode_count = matched_rnn_hidden(32, 32)
    assert abs(rnn_count - ode_count) / ode_count < 0.10


def test_generator_checkpoint_roundtrip(tmp_path):
    ode, _ = make_generators()
    times = 0.1 * np.arange(1, 9)
    path = tmp_path / "gen.npz"
    save_pendulum_generator(ode, path)
    back = load_pendulum_generator(path)
    with no_grad():
        z = Tensor(np.random.default_rng(1).normal(size=(2, 16)))
        a = ode.sample(z, times).data
        b = back.sample(z, times).data
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("kind", ["ode", "rnn"])
def test_training_smoke_runs_and_logs(kind):
    ds = sample_dataset(n=32, seed=0, steps=20)
    cfg = PendulumTrainConfig(kind=kind, steps=2, batch_size=8, noise_dim=8,
                              latent_dim=8, critic_hidden=16, d_steps_per_g=1, seed=0)
    rows = []
    gen, info = train_pendulum_generator(ds, cfg, log_fn=lambda s, k, v: rows.append((s, k, v)))
    assert gen.kind == kind
    assert rows and all(np.isfinite(v) for _, _, v in rows)
    times = ds.dt * np.arange(1, 11)
    with no_grad():
        out = gen.sample(Tensor(np.random.default_rng(0).normal(size=(2, 8))), times,
                         rng=np.random.default_rng(0))
    assert np.all(np.isfinite(out.data))


def test_training_loss_curve_is_seed_deterministic():
    ds = sample_dataset(n=32, seed=0, steps=20)

    def curve():
        cfg = PendulumTrainConfig(kind="ode", steps=3, batch_size=8, noise_dim=8,
                                  latent_dim=8, critic_hidden=16, d_steps_per_g=1, seed=5)
        rows = []
        train_pendulum_generator(ds, cfg, log_fn=lambda s, k, v: rows.append((s, k, v)))
        return rows

    assert curve() == curve()
