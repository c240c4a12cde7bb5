"""Oracle and property tests for the reverse-mode autodiff core."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import central_difference, leaf, rel_err
from odegen.autodiff import (
    Adam,
    OP_KINDS,
    ParameterStore,
    Tensor,
    abs_,
    add,
    batch_standardize,
    concat,
    conv2d,
    conv3d,
    div,
    exp,
    forward_op,
    grad,
    gradients,
    input_gradient,
    leaky_relu,
    load_checkpoint,
    matmul,
    mean,
    mul,
    neg,
    relu,
    reshape,
    save_checkpoint,
    slice_,
    sqrt,
    sub,
    sum_,
    tanh,
    upsample_nearest_2x,
)
from odegen.exceptions import ContractError, DomainError, ShapeError

# -- forward examples ---------------------------------------------------------


def test_matmul_identity_passthrough(rng):
    a = rng.normal(size=(3, 3))
    out = matmul(Tensor(np.eye(3)), Tensor(a))
    np.testing.assert_array_equal(out.data, a)


def test_tanh_of_zeros_is_zeros():
    out = tanh(Tensor(np.zeros((2, 5))))
    np.testing.assert_array_equal(out.data, np.zeros((2, 5)))


def test_conv2d_averaging_kernel_matches_sliding_window(rng):
    """A 3x3 kernel of ones/9 with zero pad 1 averages each neighborhood."""
    x = rng.normal(size=(1, 1, 4, 4))
    w = np.full((1, 1, 3, 3), 1.0 / 9.0)
    out = conv2d(Tensor(x), Tensor(w), stride=1, padding=1)
    padded = np.pad(x[0, 0], 1)
    expect = np.empty((4, 4))
    for i in range(4):
        for j in range(4):
            expect[i, j] = padded[i:i + 3, j:j + 3].mean()
    assert out.data.shape == (1, 1, 4, 4)
    np.testing.assert_allclose(out.data[0, 0], expect, atol=1e-12)


def test_forward_op_dispatch_covers_documented_kinds():
    x = Tensor(np.ones((2, 2)))
    assert forward_op("add", x, x).data.tolist() == [[2.0, 2.0], [2.0, 2.0]]
    assert forward_op("tanh", Tensor(np.zeros(3))).data.tolist() == [0.0, 0.0, 0.0]
    with pytest.raises(ContractError):
        forward_op("not-an-op", x)


def test_forward_op_rejects_shape_mismatch():
    with pytest.raises(ShapeError):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))


def test_div_by_zero_rejected():
    with pytest.raises(DomainError):
        div(Tensor(np.ones(3)), Tensor(np.array([1.0, 0.0, 2.0])))


# -- backward examples --------------------------------------------------------


def test_grad_of_sum_of_squares():
    x = leaf([1.0, 2.0, 3.0])
    loss = sum_(mul(x, x))
    (g,) = grad(loss, [x])
    np.testing.assert_array_equal(g.data, [2.0, 4.0, 6.0])


def test_grad_of_tanh_at_zero_is_one():
    x = leaf(np.zeros(4))
    (g,) = grad(sum_(tanh(x)), [x])
    np.testing.assert_array_equal(g.data, np.ones(4))


def test_backward_rejects_non_scalar_loss():
    x = leaf(np.ones(3))
    with pytest.raises(ContractError):
        grad(mul(x, x), [x])


def test_unused_parameter_gets_zero_gradient():
    used = leaf(np.ones(2))
    unused = leaf(np.ones(3))
    g_used, g_unused = grad(sum_(mul(used, used)), [used, unused])
    np.testing.assert_array_equal(g_used.data, [2.0, 2.0])
    np.testing.assert_array_equal(g_unused.data, np.zeros(3))


def test_mlp_gradient_matches_central_differences(rng):
    w1 = rng.normal(size=(4, 5)) * 0.5
    b1 = rng.normal(size=(1, 5)) * 0.1
    w2 = rng.normal(size=(5, 1)) * 0.5
    x = rng.normal(size=(3, 4))

    def forward(arrs):
        h = np.tanh(x @ arrs[0] + arrs[1])
        return float(np.sum(h @ arrs[2]) ** 2)

    t1, t2, t3 = leaf(w1), leaf(b1), leaf(w2)
    h = tanh(add(matmul(Tensor(x), t1), t2))
    out = sum_(matmul(h, t3))
    loss = mul(out, out)
    analytic = [t.data for t in grad(loss, [t1, t2, t3])]
    numeric = central_difference(forward, [w1.copy(), b1.copy(), w2.copy()])
    for a, n in zip(analytic, numeric):
        assert rel_err(a, n) < 1e-4


# -- input gradients and second order ----------------------------------------


def test_input_gradient_of_linear_score_is_the_weight(rng):
    w = rng.normal(size=(6, 1))
    x = leaf(rng.normal(size=(1, 6)))
    score = sum_(matmul(x, Tensor(w)))
    g = input_gradient(score, x)
    np.testing.assert_allclose(g.data, w.T, atol=1e-12)


def test_input_gradient_of_leaky_relu_sum_on_positive_input():
    x = leaf(np.array([0.5, 1.0, 2.0]))
    g = input_gradient(sum_(leaky_relu(x)), x)
    np.testing.assert_array_equal(g.data, np.ones(3))


def test_gradient_penalty_double_backward_matches_central_differences(rng):
    """d/dtheta of (|grad_x D(x)| - 1)^2 for a two-layer leaky-relu net."""
    w1 = rng.normal(size=(4, 6)) * 0.7
    w2 = rng.normal(size=(6, 1)) * 0.7
    x = rng.normal(size=(1, 4)) + 3.0  # keep activations off the kink

    def penalty_np(arrs):
        a1, a2 = arrs
        h = x @ a1
        hpos = (h > 0).astype(float)
        act = np.where(h > 0, h, 0.2 * h)
        dact = hpos + 0.2 * (1.0 - hpos)
        gx = (dact * a2.T) @ a1.T
        return float((np.sqrt(np.sum(gx * gx)) - 1.0) ** 2)

    t1, t2 = leaf(w1), leaf(w2)
    xt = leaf(x)
    score = sum_(matmul(leaky_relu(matmul(xt, t1)), t2))
    gx = input_gradient(score, xt)
    norm = sqrt(sum_(mul(gx, gx)))
    pen = mul(sub(norm, Tensor(1.0)), sub(norm, Tensor(1.0)))
    analytic = [t.data for t in grad(pen, [t1, t2])]
    numeric = central_difference(penalty_np, [w1.copy(), w2.copy()], eps=1e-6)
    for a, n in zip(analytic, numeric):
        assert rel_err(a, n) < 1e-4


def test_tanh_double_backward_matches_analytic_second_derivative():
    x = leaf(np.array([0.3, -0.7, 1.2]))
    y = sum_(tanh(x))
    (g1,) = grad(y, [x], create_graph=True)
    (g2,) = grad(sum_(g1), [x])
    t = np.tanh(x.data)
    np.testing.assert_allclose(g2.data, -2.0 * t * (1.0 - t * t), atol=1e-10)


def test_input_gradient_requires_connected_input():
    x = leaf(np.ones(3))
    other = leaf(np.ones(3))
    loss = sum_(mul(x, x))
    with pytest.raises(ContractError):
        input_gradient(loss, other)


# -- per-op gradient checks ---------------------------------------------------


def _away_from_kinks(a: np.ndarray) -> np.ndarray:
    """Shift values so relu/leaky-relu derivatives are well defined."""
    a = a.copy()
    a[np.abs(a) < 2e-3] += 5e-3
    return a


_UNARY_CASES = [
    ("neg", lambda t: neg(t), lambda a: -a, None),
    ("exp", lambda t: exp(t), np.exp, None),
    ("tanh", lambda t: tanh(t), np.tanh, None),
    ("relu", lambda t: relu(t), lambda a: np.maximum(a, 0.0), _away_from_kinks),
    ("leaky-relu", lambda t: leaky_relu(t, 0.2),
     lambda a: np.where(a > 0, a, 0.2 * a), _away_from_kinks),
    ("reshape", lambda t: reshape(t, (6,)), lambda a: a.reshape(6), None),
    ("slice", lambda t: slice_(t, (slice(0, 2), slice(1, 3))),
     lambda a: a[0:2, 1:3], None),
    ("sum", lambda t: sum_(t, axis=1, keepdims=True),
     lambda a: a.sum(axis=1, keepdims=True), None),
    ("mean", lambda t: mean(t, axis=0), lambda a: a.mean(axis=0), None),
    ("upsample", None, None, None),  # handled separately, needs 4D input
]


@pytest.mark.parametrize("name,op,ref,prep",
                         [c for c in _UNARY_CASES if c[1] is not None],
                         ids=[c[0] for c in _UNARY_CASES if c[1] is not None])
def test_unary_op_gradcheck(name, op, ref, prep, rng):
    a = rng.normal(size=(2, 3))
    if prep is not None:
        a = prep(a)
    t = leaf(a)
    out = op(t)
    np.testing.assert_allclose(out.data, ref(a), atol=1e-12)
    weights = rng.normal(size=out.data.shape)
    loss = sum_(mul(out, Tensor(weights)))
    (g,) = grad(loss, [t])

    def f(arrs):
        tt = leaf(arrs[0])
        return float(sum_(mul(op(tt), Tensor(weights))).data)

    (n,) = central_difference(f, [a.copy()])
    assert rel_err(g.data, n) < 1e-4


_BINARY_CASES = [
    ("add", add, np.add),
    ("sub", sub, np.subtract),
    ("mul", mul, np.multiply),
    ("div", div, np.divide),
    ("matmul", matmul, np.matmul),
]


@pytest.mark.parametrize("name,op,ref", _BINARY_CASES, ids=[c[0] for c in _BINARY_CASES])
def test_binary_op_gradcheck(name, op, ref, rng):
    a = rng.normal(size=(3, 3))
    b = rng.normal(size=(3, 3))
    if name == "div":
        b = b + 3.0 * np.sign(b)  # keep the denominator away from zero
    ta, tb = leaf(a), leaf(b)
    out = op(ta, tb)
    np.testing.assert_allclose(out.data, ref(a, b), atol=1e-12)
    weights = rng.normal(size=out.data.shape)
    loss = sum_(mul(out, Tensor(weights)))
    ga, gb = grad(loss, [ta, tb])

    def f(arrs):
        return float(sum_(mul(op(leaf(arrs[0]), leaf(arrs[1])), Tensor(weights))).data)

    na, nb = central_difference(f, [a.copy(), b.copy()])
    assert rel_err(ga.data, na) < 1e-4
    assert rel_err(gb.data, nb) < 1e-4


def test_concat_gradcheck(rng):
    a, b = rng.normal(size=(2, 2)), rng.normal(size=(3, 2))
    ta, tb = leaf(a), leaf(b)
    weights = rng.normal(size=(5, 2))
    loss = sum_(mul(concat([ta, tb], axis=0), Tensor(weights)))
    ga, gb = grad(loss, [ta, tb])
    np.testing.assert_allclose(ga.data, weights[:2], atol=1e-12)
    np.testing.assert_allclose(gb.data, weights[2:], atol=1e-12)


def test_conv2d_gradcheck(rng):
    x = rng.normal(size=(2, 2, 5, 5))
    w = rng.normal(size=(3, 2, 3, 3)) * 0.5
    b = rng.normal(size=(3,)) * 0.1
    tx, tw, tb = leaf(x), leaf(w), leaf(b)
    out = conv2d(tx, tw, tb, stride=2, padding=1)
    weights = rng.normal(size=out.data.shape)
    loss = sum_(mul(out, Tensor(weights)))
    gx, gw, gb = grad(loss, [tx, tw, tb])

    def f(arrs):
        o = conv2d(leaf(arrs[0]), leaf(arrs[1]), leaf(arrs[2]), stride=2, padding=1)
        return float(sum_(mul(o, Tensor(weights))).data)

    nx, nw, nb = central_difference(f, [x.copy(), w.copy(), b.copy()])
    assert rel_err(gx.data, nx) < 1e-4
    assert rel_err(gw.data, nw) < 1e-4
    assert rel_err(gb.data, nb) < 1e-4


def test_conv3d_gradcheck(rng):
    x = rng.normal(size=(1, 2, 4, 4, 4))
    w = rng.normal(size=(2, 2, 3, 1, 1)) * 0.5
    tx, tw = leaf(x), leaf(w)
    out = conv3d(tx, tw, stride=(2, 1, 1), padding=(1, 0, 0))
    weights = rng.normal(size=out.data.shape)
    loss = sum_(mul(out, Tensor(weights)))
    gx, gw = grad(loss, [tx, tw])

    def f(arrs):
        o = conv3d(leaf(arrs[0]), leaf(arrs[1]), stride=(2, 1, 1), padding=(1, 0, 0))
        return float(sum_(mul(o, Tensor(weights))).data)

    nx, nw = central_difference(f, [x.copy(), w.copy()])
    assert rel_err(gx.data, nx) < 1e-4
    assert rel_err(gw.data, nw) < 1e-4


def test_upsample_nearest_2x_gradcheck(rng):
    x = rng.normal(size=(1, 2, 2, 3, 3))
    tx = leaf(x)
    out = upsample_nearest_2x(tx)
    assert out.shape == (1, 2, 2, 6, 6)
    weights = rng.normal(size=out.data.shape)
    (g,) = grad(sum_(mul(out, Tensor(weights))), [tx])

    def f(arrs):
        o = upsample_nearest_2x(leaf(arrs[0]))
        return float(sum_(mul(o, Tensor(weights))).data)

    (n,) = central_difference(f, [x.copy()])
    assert rel_err(g.data, n) < 1e-4


def test_batch_standardize_gradcheck(rng):
    x = rng.normal(size=(2, 3, 4))
    tx = leaf(x)
    out = batch_standardize(tx, axes=(0, 2))
    weights = rng.normal(size=out.data.shape)
    (g,) = grad(sum_(mul(out, Tensor(weights))), [tx])

    def f(arrs):
        o = batch_standardize(leaf(arrs[0]), axes=(0, 2))
        return float(sum_(mul(o, Tensor(weights))).data)

    (n,) = central_difference(f, [x.copy()])
    assert rel_err(g.data, n) < 1e-4


def test_op_kind_list_is_exercised():
    """Every advertised op kind has a callable behind the dispatch table."""
    x2 = Tensor(np.full((1, 1, 2, 2), 0.5))
    args = {
        "add": (Tensor(np.ones(2)), Tensor(np.ones(2))),
        "sub": (Tensor(np.ones(2)), Tensor(np.ones(2))),
        "mul": (Tensor(np.ones(2)), Tensor(np.ones(2))),
        "div": (Tensor(np.ones(2)), Tensor(np.ones(2))),
        "neg": (Tensor(np.ones(2)),),
        "exp": (Tensor(np.zeros(2)),),
        "sum": (Tensor(np.ones(2)),),
        "mean": (Tensor(np.ones(2)),),
        "reshape": (Tensor(np.ones(4)), (2, 2)),
        "concat": ([Tensor(np.ones(2)), Tensor(np.ones(2))],),
        "slice": (Tensor(np.ones(4)), slice(0, 2)),
        "tanh": (Tensor(np.zeros(2)),),
        "relu": (Tensor(np.ones(2)),),
        "leaky-relu": (Tensor(np.ones(2)),),
        "matmul": (Tensor(np.eye(2)), Tensor(np.eye(2))),
        "conv2d": (x2, Tensor(np.ones((1, 1, 1, 1)))),
        "conv3d": (Tensor(np.full((1, 1, 2, 2, 2), 0.5)), Tensor(np.ones((1, 1, 1, 1, 1)))),
        "upsample-nearest-2x": (Tensor(np.ones((1, 1, 1, 2, 2))),),
        "batch-standardize": (Tensor(np.arange(8.0).reshape(2, 4)),),
    }
    kwargs = {"batch-standardize": {"axes": (0,)}}
    for kind in OP_KINDS:
        out = forward_op(kind, *args[kind], **kwargs.get(kind, {}))
        assert np.all(np.isfinite(out.data)), kind


# -- algebraic properties -----------------------------------------------------


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 2.0, -4.0, 8.0]))
def test_backward_linearity_is_exact_for_power_of_two_scales(seed, alpha):
    """Scaling the loss by +-2^k scales every gradient bit-exactly."""
    r = np.random.default_rng(seed)
    x = leaf(r.normal(size=(3, 4)))
    w = leaf(r.normal(size=(4, 2)))

    def grads_for(scale):
        out = tanh(matmul(x, w))
        loss = mul(sum_(mul(out, out)), Tensor(scale))
        return [t.data for t in grad(loss, [x, w])]

    base = grads_for(1.0)
    scaled = grads_for(alpha)
    for g1, ga in zip(base, scaled):
        np.testing.assert_array_equal(ga, alpha * g1)


@given(st.integers(0, 2**32 - 1), st.sampled_from([-3.0, 7.25, 0.3]))
def test_backward_linearity_holds_to_roundoff_for_general_scales(seed, alpha):
    r = np.random.default_rng(seed)
    x = leaf(r.normal(size=(3, 4)))
    w = leaf(r.normal(size=(4, 2)))

    def grads_for(scale):
        out = tanh(matmul(x, w))
        loss = mul(sum_(mul(out, out)), Tensor(scale))
        return [t.data for t in grad(loss, [x, w])]

    base = grads_for(1.0)
    scaled = grads_for(alpha)
    for g1, ga in zip(base, scaled):
        np.testing.assert_allclose(ga, alpha * g1, rtol=1e-12, atol=1e-15)


@given(st.integers(0, 2**32 - 1))
def test_forward_backward_determinism(seed):
    r1 = np.random.default_rng(seed)
    r2 = np.random.default_rng(seed)

    def run(r):
        x = leaf(r.normal(size=(2, 3)))
        w = leaf(r.normal(size=(3, 3)))
        loss = sum_(exp(neg(abs_(matmul(x, w)))))
        gx, gw = grad(loss, [x, w])
        return loss.data.copy(), gx.data.copy(), gw.data.copy()

    for a, b in zip(run(r1), run(r2)):
        np.testing.assert_array_equal(a, b)


@given(st.integers(0, 2**32 - 1))
def test_batch_standardize_moments(seed):
    r = np.random.default_rng(seed)
    x = Tensor(r.normal(loc=3.0, scale=2.5, size=(4, 3, 5)))
    out = batch_standardize(x, axes=(0, 2))
    mu = out.data.mean(axis=(0, 2))
    var = out.data.var(axis=(0, 2))
    assert np.max(np.abs(mu)) < 1e-10
    assert np.max(np.abs(var - 1.0)) < 1e-4  # eps in the denominator biases var slightly low
    tight = batch_standardize(Tensor(x.data * 1e3), axes=(0, 2))
    assert np.max(np.abs(tight.data.var(axis=(0, 2)) - 1.0)) < 1e-9


# -- optimizer ----------------------------------------------------------------


def test_adam_zero_gradients_keep_parameters():
    store = ParameterStore({"w": leaf(np.array([1.0, -2.0]))})
    opt = Adam(store, lr=0.1)
    before = store["w"].data.copy()
    opt.step({"w": Tensor(np.zeros(2))})
    np.testing.assert_array_equal(store["w"].data, before)
    opt.step({"w": Tensor(np.zeros(2))})
    np.testing.assert_array_equal(store["w"].data, before)


def test_adam_first_step_moves_by_lr():
    """On f(w)=w^2 from w=1 the first Adam step is ~ -lr * sign(grad)."""
    w = leaf(np.array([1.0]))
    store = ParameterStore({"w": w})
    opt = Adam(store, lr=0.1)
    loss = mul(w, w)
    gmap = gradients(sum_(loss), {"w": w})
    opt.step(gmap)
    assert abs(w.data[0] - 0.9) < 1e-6


def test_adam_converges_on_quadratic():
    w = leaf(np.array([0.0]))
    store = ParameterStore({"w": w})
    opt = Adam(store, lr=0.05)
    for _ in range(500):
        resid = sub(w, Tensor(np.array([3.0])))
        gmap = gradients(sum_(mul(resid, resid)), {"w": w})
        opt.step(gmap)
    assert abs(w.data[0] - 3.0) < 1e-2


def test_adam_rejects_mismatched_keys():
    store = ParameterStore({"w": leaf(np.ones(2))})
    opt = Adam(store, lr=0.1)
    with pytest.raises(ContractError):
        opt.step({"v": Tensor(np.zeros(2))})


def test_adam_step_matches_reference_recurrence(rng):
    """Two handwritten Adam updates, compared element by element."""
    w0 = rng.normal(size=(3,))
    grads = [rng.normal(size=(3,)) for _ in range(2)]
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8

    w = w0.copy()
    m = np.zeros(3)
    v = np.zeros(3)
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        w = w - lr * mhat / (np.sqrt(vhat) + eps)

    param = leaf(w0.copy())
    store = ParameterStore({"w": param})
    opt = Adam(store, lr=lr, beta1=b1, beta2=b2, eps=eps)
    for g in grads:
        opt.step({"w": Tensor(g)})
    np.testing.assert_allclose(param.data, w, atol=1e-14)


# -- checkpoint container -----------------------------------------------------


def test_checkpoint_roundtrip_is_bit_exact(tmp_path, rng):
    tensors = {
        "layer.weight": rng.normal(size=(4, 7)),
        "layer.bias": rng.normal(size=(7,)),
        "scalar": np.array(3.25),
    }
    path = tmp_path / "ckpt.bin"
    save_checkpoint(path, tensors)
    back = load_checkpoint(path)
    assert set(back) == set(tensors)
    for k in tensors:
        assert back[k].dtype == np.float64
        np.testing.assert_array_equal(back[k], np.asarray(tensors[k], dtype=np.float64))


def test_checkpoint_preserves_optimizer_state(tmp_path, rng):
    w = leaf(rng.normal(size=(3,)))
    store = ParameterStore({"w": w})
    opt = Adam(store, lr=0.05)
    for _ in range(3):
        gmap = gradients(sum_(mul(w, w)), {"w": w})
        opt.step(gmap)
    blob = store.state_arrays()
    blob.update(opt.state_arrays())
    path = tmp_path / "opt.bin"
    save_checkpoint(path, blob)

    w2 = leaf(np.zeros(3))
    store2 = ParameterStore({"w": w2})
    opt2 = Adam(store2, lr=0.05)
    back = load_checkpoint(path)
    store2.load_arrays(back)
    opt2.load_arrays(back)
    np.testing.assert_array_equal(w2.data, w.data)

    # one more identical step on both must stay in lockstep
    for ww, oo in ((w, opt), (w2, opt2)):
        gmap = gradients(sum_(mul(ww, ww)), {"w": ww})
        oo.step(gmap)
    np.testing.assert_array_equal(w2.data, w.data)
