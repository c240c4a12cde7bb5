"""Oracle and property tests for the ODE integration engine."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import central_difference, leaf, rel_err
from odegen.autodiff import Tensor, grad, mul, sum_
from odegen.exceptions import (
    ContractError,
    ConvergenceError,
    DivergenceError,
    UnsupportedConfigError,
)
from odegen.ode import (
    SolverConfig,
    Trajectory,
    dopri5_dense,
    dopri5_step,
    integrate,
    integrate_recorded,
    rk4_step,
    trajectory_from_csv,
    trajectory_to_csv,
)


def zero_field(h, t):
    return mul(Tensor(0.0), h)


def exp_field(h, t):
    return h


def circular_field(h, t):
    """d/dt [x, y] = [y, -x]; solutions rotate on circles."""
    x = h.data
    return Tensor(np.array([x[1], -x[0]]))


# -- integrate ----------------------------------------------------------------


@pytest.mark.parametrize("method", ["euler", "rk4", "dopri5"])
def test_zero_field_holds_state_constant(method):
    h0 = Tensor(np.array([1.5, -2.0, 0.25]))
    cfg = SolverConfig(method=method, step=0.1)
    traj = integrate(zero_field, h0, 0.0, [0.3, 0.7, 2.0], cfg)
    assert traj.states.data.shape == (3, 3)
    for row in traj.states.data:
        np.testing.assert_array_equal(row, h0.data)


def test_rk4_exponential_growth_hits_e():
    cfg = SolverConfig(method="rk4", step=0.01)
    traj = integrate(exp_field, Tensor(np.array([1.0])), 0.0, [1.0], cfg)
    assert abs(traj.states.data[0, 0] - math.e) < 1e-8


def test_rk4_circular_field_closes_the_loop():
    cfg = SolverConfig(method="rk4", step=1e-3)
    traj = integrate(circular_field, Tensor(np.array([1.0, 0.0])), 0.0,
                     [2.0 * math.pi], cfg)
    np.testing.assert_allclose(traj.states.data[0], [1.0, 0.0], atol=1e-6)


def test_query_times_hit_exactly_with_partial_final_step():
    """A step that does not divide the gap still lands on the query time."""
    cfg = SolverConfig(method="rk4", step=0.3)
    traj = integrate(exp_field, Tensor(np.array([1.0])), 0.0, [0.5, 1.0], cfg)
    np.testing.assert_allclose(traj.states.data[:, 0],
                               [math.exp(0.5), math.e], atol=1e-3)
    np.testing.assert_array_equal(traj.times, [0.5, 1.0])


def test_integrate_validates_query_times():
    cfg = SolverConfig(method="rk4", step=0.1)
    h0 = Tensor(np.array([1.0]))
    with pytest.raises(ContractError):
        integrate(exp_field, h0, 0.0, [0.5, 0.5], cfg)
    with pytest.raises(ContractError):
        integrate(exp_field, h0, 1.0, [0.5], cfg)


def test_nan_field_raises_divergence_error():
    def bad(h, t):
        return Tensor(np.array([float("nan")]))

    cfg = SolverConfig(method="rk4", step=0.1)
    with pytest.raises(DivergenceError):
        integrate(bad, Tensor(np.array([1.0])), 0.0, [1.0], cfg)


# -- solver order and adaptivity ----------------------------------------------


def test_rk4_error_shrinks_sixteenfold_per_halving():
    errors = []
    for step in [0.1, 0.05, 0.025, 0.0125, 0.00625]:
        cfg = SolverConfig(method="rk4", step=step)
        traj = integrate(exp_field, Tensor(np.array([1.0])), 0.0, [1.0], cfg)
        errors.append(abs(traj.states.data[0, 0] - math.e))
    for coarse, fine in zip(errors, errors[1:]):
        ratio = coarse / fine
        assert 8.0 < ratio < 32.0, f"order-4 halving ratio out of range: {ratio}"


def test_euler_error_shrinks_twofold_per_halving():
    errors = []
    for step in [0.01, 0.005, 0.0025]:
        cfg = SolverConfig(method="euler", step=step)
        traj = integrate(exp_field, Tensor(np.array([1.0])), 0.0, [1.0], cfg)
        errors.append(abs(traj.states.data[0, 0] - math.e))
    for coarse, fine in zip(errors, errors[1:]):
        assert 1.7 < coarse / fine < 2.3


def test_dopri5_matches_tiny_step_rk4_reference():
    rtol = 1e-6
    cfg = SolverConfig(method="dopri5", rtol=rtol, atol=1e-9)
    times = [1.0, 2.0, 2.0 * math.pi]
    sol = integrate(circular_field, Tensor(np.array([1.0, 0.0])), 0.0, times, cfg)
    ref_cfg = SolverConfig(method="rk4", step=1e-4)
    ref = integrate(circular_field, Tensor(np.array([1.0, 0.0])), 0.0, times, ref_cfg)
    err = np.max(np.abs(sol.states.data - ref.states.data))
    assert err < 10.0 * rtol


def test_dopri5_step_on_zero_field_grows_dt_by_max_factor():
    accepted, state, est, dt_next = dopri5_step(zero_field, Tensor(np.array([2.0])), 0.0, 0.1)
    assert accepted
    assert est == 0.0
    np.testing.assert_array_equal(state.data, [2.0])
    assert dt_next == pytest.approx(0.5)  # 5x growth cap


def test_dopri5_tighter_tolerance_takes_more_field_evaluations():
    def run(rtol):
        calls = [0]

        def counted(h, t):
            calls[0] += 1
            return h

        cfg = SolverConfig(method="dopri5", rtol=rtol, atol=1e-12)
        integrate(counted, Tensor(np.array([1.0])), 0.0, [5.0], cfg)
        return calls[0]

    assert run(1e-10) > run(1e-3)


def test_dopri5_single_step_error_is_sixth_order():
    """Richardson check: halving dt divides the one-step error by ~2^6."""
    def one_step_error(dt):
        _, state, _, _ = dopri5_step(exp_field, Tensor(np.array([1.0])), 0.0, dt)
        return abs(state.data[0] - math.exp(dt))

    e1 = one_step_error(0.2)
    e2 = one_step_error(0.1)
    assert 32.0 < e1 / e2 < 128.0


def test_dopri5_max_steps_raises_with_last_time():
    cfg = SolverConfig(method="dopri5", rtol=1e-12, atol=1e-14, max_steps=3)
    with pytest.raises(ConvergenceError) as exc:
        integrate(circular_field, Tensor(np.array([1.0, 0.0])), 0.0, [50.0], cfg)
    assert 0.0 <= exc.value.last_time < 50.0


def test_dense_solution_tracks_the_analytic_exponential():
    cfg = SolverConfig(method="dopri5", rtol=1e-8, atol=1e-10)
    sol = dopri5_dense(exp_field, np.array([1.0]), 0.0, 2.0, cfg)
    assert sol.t_end >= 2.0
    for t in np.linspace(0.0, 2.0, 17):
        assert abs(sol.evaluate(t)[0] - math.exp(t)) < 1e-6


# -- consistency properties ---------------------------------------------------


def test_grid_consistency_on_shared_times():
    h0 = Tensor(np.array([1.0, 0.0]))
    cfg = SolverConfig(method="rk4", step=0.0625)
    coarse = integrate(circular_field, h0, 0.0, [0.5, 1.0], cfg)
    fine = integrate(circular_field, h0, 0.0, [0.25, 0.5, 0.75, 1.0], cfg)
    np.testing.assert_allclose(coarse.states.data[0], fine.states.data[1], atol=1e-9)
    np.testing.assert_allclose(coarse.states.data[1], fine.states.data[3], atol=1e-9)


@given(st.floats(min_value=-10.0, max_value=10.0, allow_nan=False))
def test_time_translation_invariance_for_autonomous_fields(shift):
    h0 = Tensor(np.array([0.3, -0.4]))
    cfg = SolverConfig(method="rk4", step=0.05)
    base_times = [0.2, 0.8, 1.3]
    a = integrate(circular_field, h0, 0.0, base_times, cfg)
    b = integrate(circular_field, h0, shift, [t + shift for t in base_times], cfg)
    np.testing.assert_allclose(a.states.data, b.states.data, atol=1e-12)


def test_substep_mode_splits_each_gap_evenly():
    cfg = SolverConfig(method="rk4", substeps=4)
    traj = integrate(exp_field, Tensor(np.array([1.0])), 0.0, [1.0], cfg)
    manual = Tensor(np.array([1.0]))
    for i in range(4):
        manual = rk4_step(exp_field, manual, i * 0.25, 0.25)
    np.testing.assert_array_equal(traj.states.data[0], manual.data)


# -- recorded integration ------------------------------------------------------


def test_recorded_euler_one_step_gradient_is_exact():
    w = leaf(np.array([0.7]))

    def field(h, t):
        return mul(w, h)

    h0 = Tensor(np.array([2.0]))
    dt = 0.25
    cfg = SolverConfig(method="euler", step=dt)
    traj = integrate_recorded(field, h0, 0.0, [dt], cfg)
    (g,) = grad(sum_(traj.states), [w])
    # h1 = h0 * (1 + w dt), so dh1/dw = h0 * dt
    np.testing.assert_allclose(g.data, [2.0 * dt], atol=1e-14)


def test_recorded_rk4_gradient_matches_central_differences():
    w0 = np.array([0.4])

    def loss_np(arrs):
        (wv,) = arrs

        def field(h, t):
            return mul(Tensor(wv), h)

        cfg = SolverConfig(method="rk4", step=0.2)
        traj = integrate(field, Tensor(np.array([1.0])), 0.0, [0.4, 1.0], cfg)
        return float(np.sum(traj.states.data ** 2))

    w = leaf(w0.copy())

    def field(h, t):
        return mul(w, h)

    cfg = SolverConfig(method="rk4", step=0.2)
    traj = integrate_recorded(field, Tensor(np.array([1.0])), 0.0, [0.4, 1.0], cfg)
    (g,) = grad(sum_(mul(traj.states, traj.states)), [w])
    (n,) = central_difference(loss_np, [w0.copy()])
    assert rel_err(g.data, n) < 1e-4


def test_recorded_zero_field_initial_state_gradient_is_identity():
    h0 = leaf(np.array([1.0, -2.0, 0.5]))
    cfg = SolverConfig(method="rk4", step=0.5)
    traj = integrate_recorded(zero_field, h0, 0.0, [1.0], cfg)
    final = traj.states
    for i in range(3):
        sel = mul(final, Tensor(np.eye(3)[i].reshape(1, 3)))
        (g,) = grad(sum_(sel), [h0])
        np.testing.assert_array_equal(g.data, np.eye(3)[i])


def test_recorded_rejects_adaptive_method():
    cfg = SolverConfig(method="dopri5")
    with pytest.raises(UnsupportedConfigError):
        integrate_recorded(exp_field, Tensor(np.array([1.0])), 0.0, [1.0], cfg)


# -- trajectory export ---------------------------------------------------------


def test_trajectory_csv_roundtrip(tmp_path):
    times = np.array([0.1, 0.4, 1.0])
    states = Tensor(np.arange(6.0).reshape(3, 2))
    path = tmp_path / "traj.csv"
    trajectory_to_csv(Trajectory(times, states), path)
    header = path.read_text().splitlines()[0]
    assert header == "time,state_0,state_1"
    back = trajectory_from_csv(path)
    np.testing.assert_allclose(back.times, times, atol=1e-15)
    np.testing.assert_allclose(back.states.data, states.data, atol=1e-15)


def test_solver_config_validation():
    with pytest.raises(ContractError):
        SolverConfig(method="heun").validated()
    with pytest.raises(ContractError):
        SolverConfig(step=-0.1).validated()
    with pytest.raises(ContractError):
        SolverConfig(substeps=0).validated()
    with pytest.raises(ContractError):
        SolverConfig(max_steps=0).validated()
