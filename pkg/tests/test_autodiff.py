import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from basketgen import autodiff as ad
from basketgen.autodiff import (
    MLP,
    Adam,
    NonFiniteError,
    Parameter,
    ShapeError,
    Tensor,
    UnsupportedLayerError,
    backward,
    check_gradients,
    forward,
    gradient_penalty,
    input_gradient,
    load_checkpoint,
    numeric_grad,
    relative_error,
    save_checkpoint,
)

from oracles import op_cases


def _rand(rng, *shape):
    return rng.uniform(-1.0, 1.0, size=shape)


def _project(out, rng):
    """Scalarise an op's output with a random weighting so the full Jacobian is tested."""
    weights = Tensor(rng.normal(size=out.shape))
    return ad.tsum(out * weights)


# --- forward examples -------------------------------------------------------

def test_matmul_hand_example():
    out = ad.matmul(Tensor([[1, 2], [3, 4]]), Tensor([[1], [1]]))
    np.testing.assert_array_equal(out.data, [[3], [7]])


def test_relu_and_tanh_examples():
    np.testing.assert_array_equal(ad.relu(Tensor([-1.0, 0.0, 2.0])).data, [0, 0, 2])
    assert ad.tanh(Tensor([0.0])).data[0] == 0.0


def test_shape_mismatch_names_node():
    a = Parameter(np.ones((2, 3)), name="left")
    with pytest.raises(ShapeError, match="left"):
        ad.matmul(a, Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        ad.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))


def test_non_finite_forward_raises():
    with pytest.raises(NonFiniteError):
        ad.mul(Tensor([1.0]), Tensor([np.inf]))


def test_forward_recomputes_after_leaf_change():
    p = Parameter([1.0, 2.0, 3.0], name="p")
    root = ad.tsum(ad.square(p))
    assert root.item() == 14.0
    p.data[0] = 2.0
    assert forward(root) == 17.0


# --- backward examples ------------------------------------------------------

def test_backward_sum_of_squares():
    p = Parameter([1.0, 2.0, 3.0])
    backward(ad.tsum(ad.square(p)))
    np.testing.assert_array_equal(p.grad, [2, 4, 6])


def test_backward_mean():
    p = Parameter(np.arange(4.0))
    backward(ad.mean(p))
    np.testing.assert_array_equal(p.grad, [0.25] * 4)


def test_backward_needs_scalar_root():
    p = Parameter(np.ones(3))
    with pytest.raises(ShapeError):
        backward(ad.square(p))


def test_accumulation_doubles_gradient():
    rng = np.random.default_rng(3)
    p = Parameter(_rand(rng, 4, 3))
    w = Tensor(_rand(rng, 3, 2))
    root = ad.tsum(ad.tanh(p @ w))
    backward(root)
    once = p.grad.copy()
    backward(root)
    np.testing.assert_array_equal(p.grad, 2 * once)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_accumulation_property(seed):
    rng = np.random.default_rng(seed)
    p = Parameter(_rand(rng, 3))
    root = ad.tsum(ad.sigmoid(p) * Tensor(_rand(rng, 3)))
    backward(root)
    once = p.grad.copy()
    backward(root)
    assert np.array_equal(p.grad, 2 * once)


def test_mlp_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    net = MLP([5, 8, 6, 1], ["relu", "tanh", "identity"], rng)
    x = Tensor(_rand(rng, 7, 5))
    err = check_gradients(lambda: ad.mean(net(x)), net.parameters())
    assert err < 1e-4


# --- per-op gradient oracle -------------------------------------------------

@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("op", sorted(op_cases()))
def test_op_gradients(op, seed):
    fn, shapes = op_cases()[op]
    rng = np.random.default_rng(seed)
    params = [Parameter(_rand(rng, *s)) for s in shapes]
    weights_rng = np.random.default_rng(1000 + seed)
    out = fn(*params)
    weights = Tensor(weights_rng.normal(size=out.shape))
    err = check_gradients(lambda: ad.tsum(fn(*params) * weights), params)
    assert err < 1e-4, op


@pytest.mark.parametrize("seed", range(3))
def test_loss_gradients(seed):
    rng = np.random.default_rng(seed)
    logits = Parameter(_rand(rng, 6, 4))
    labels = rng.integers(0, 4, size=6)
    assert check_gradients(lambda: ad.cross_entropy(logits, labels), [logits]) < 1e-4

    scores = Parameter(_rand(rng, 6, 1))
    flags = rng.integers(0, 2, size=(6, 1)).astype(float)
    assert check_gradients(lambda: ad.bce_with_logits(scores, flags), [scores]) < 1e-4

    pred = Parameter(_rand(rng, 5, 2))
    target = Parameter(_rand(rng, 5, 2))
    assert check_gradients(lambda: ad.mse(pred, target), [pred, target]) < 1e-4


def test_cross_entropy_value():
    out = ad.cross_entropy(Tensor([[0.0, 0.0]]), [1])
    assert out.item() == pytest.approx(np.log(2.0), abs=1e-15)


@pytest.mark.parametrize("seed", range(3))
def test_lstm_sequence_gradients(seed):
    rng = np.random.default_rng(seed)
    d_in, hid, steps = 3, 4, 5
    x = Parameter(_rand(rng, steps, d_in))
    wx = Parameter(_rand(rng, d_in, 4 * hid))
    wh = Parameter(_rand(rng, hid, 4 * hid))
    b = Parameter(_rand(rng, 4 * hid))
    h0 = Parameter(_rand(rng, hid))
    c0 = Parameter(_rand(rng, hid))
    weights = Tensor(rng.normal(size=(steps, hid)))
    params = [x, wx, wh, b, h0, c0]
    err = check_gradients(lambda: ad.tsum(ad.lstm_sequence(*params) * weights), params)
    assert err < 1e-4


def test_relu_derivative_at_zero_is_zero():
    p = Parameter([0.0, 1.0])
    backward(ad.tsum(ad.relu(p)))
    np.testing.assert_array_equal(p.grad, [0.0, 1.0])


def test_norm_subgradient_at_zero():
    p = Parameter(np.zeros((1, 3)))
    backward(ad.tsum(ad.norm(p, axis=1)))
    np.testing.assert_array_equal(p.grad, np.zeros((1, 3)))


# --- input-gradient graph ---------------------------------------------------

def test_linear_critic_input_gradient_is_weight():
    rng = np.random.default_rng(0)
    net = MLP([3, 1], ["identity"], rng)
    for _ in range(3):
        x = _rand(rng, 4, 3)
        g = input_gradient(net, x)
        np.testing.assert_array_equal(g.data, np.tile(net.layers[0].weight.data.T, (4, 1)))


def test_relu_critic_input_gradient_matches_finite_differences():
    # hand-sized 2-d example
    rng = np.random.default_rng(1)
    net = MLP([2, 3, 1], ["relu", "identity"], rng)
    net.layers[0].weight.data[...] = [[1.0, -2.0, 0.5], [0.5, 1.0, -1.0]]
    net.layers[0].bias.data[...] = [0.1, 0.2, -0.3]
    net.layers[1].weight.data[...] = [[1.5], [-0.7], [2.0]]
    x = np.array([[0.3, -0.4], [0.9, 0.2]])
    g = input_gradient(net, x).data
    numeric = np.zeros_like(x)
    for r in range(x.shape[0]):
        row = x[r:r + 1].copy()
        numeric[r] = numeric_grad(lambda: float(net.predict(row).sum()), row)[0]
    np.testing.assert_allclose(g, numeric, atol=1e-4)


def test_input_gradient_with_condition_columns():
    rng = np.random.default_rng(2)
    net = MLP([5, 8, 8, 1], ["relu", "relu", "identity"], rng)
    x = _rand(rng, 3, 2)
    cond = _rand(rng, 3, 3)
    g = input_gradient(net, x, cond).data
    assert g.shape == (3, 2)
    for r in range(3):
        row = x[r:r + 1].copy()
        c = cond[r:r + 1]
        num = numeric_grad(lambda: float(net.predict(np.hstack([row, c])).sum()), row)
        np.testing.assert_allclose(g[r], num[0], atol=1e-6, rtol=1e-4)


def test_unit_norm_linear_critic_has_zero_penalty():
    rng = np.random.default_rng(4)
    net = MLP([3, 1], ["identity"], rng)
    w = np.array([[2.0], [-1.0], [2.0]]) / 3.0
    net.layers[0].weight.data[...] = w
    penalty, mean_norm = gradient_penalty(net, _rand(rng, 5, 3))
    assert penalty.item() == 0.0
    assert mean_norm == pytest.approx(1.0, abs=1e-15)
    backward(10.0 * penalty)
    assert not np.any(net.layers[0].weight.grad)
    assert not np.any(net.layers[0].bias.grad)


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("hidden", [[6], [8, 5]])
@pytest.mark.parametrize("act", ["relu", "tanh"])
def test_double_backprop_penalty_gradients(seed, hidden, act):
    rng = np.random.default_rng(seed)
    sizes = [3] + hidden + [1]
    net = MLP(sizes, [act] * len(hidden) + ["identity"], rng)
    x = _rand(rng, 4, 2)
    cond = _rand(rng, 4, 1)
    err = check_gradients(lambda: gradient_penalty(net, x, cond)[0], net.parameters())
    assert err < 1e-3


def test_unsupported_activation_rejected():
    rng = np.random.default_rng(0)
    net = MLP([2, 3, 1], [lambda z: ad.square(z), "identity"], rng)
    with pytest.raises(UnsupportedLayerError):
        input_gradient(net, np.zeros((1, 2)))


# --- Adam -------------------------------------------------------------------

def test_adam_single_step_descends():
    p = Parameter([1.0])
    opt = Adam([p], lr=0.1)
    backward(ad.tsum(ad.square(p)))
    opt.step()
    assert p.data[0] < 1.0


def test_adam_zero_gradient_keeps_value():
    p = Parameter([1.5])
    opt = Adam([p], lr=0.1)
    opt.step()
    assert p.data[0] == 1.5
    assert opt.step_count == 1


def test_adam_converges_on_quadratic():
    p = Parameter([0.0])
    opt = Adam([p], lr=0.1)
    for _ in range(200):
        opt.zero_grad()
        backward(ad.tsum(ad.square(p - 3.0)))
        opt.step()
    assert abs(p.data[0] - 3.0) < 0.05


def test_adam_leaves_gradients():
    p = Parameter([2.0])
    opt = Adam([p], lr=0.1)
    backward(ad.tsum(ad.square(p)))
    opt.step()
    assert p.grad[0] == 4.0


def test_training_is_deterministic():
    def run():
        rng = np.random.default_rng(11)
        net = MLP([3, 8, 1], ["tanh", "identity"], rng)
        opt = Adam(net.parameters(), lr=1e-2)
        x = Tensor(rng.normal(size=(16, 3)))
        y = Tensor(rng.normal(size=(16, 1)))
        for _ in range(20):
            opt.zero_grad()
            backward(ad.mse(net(x), y))
            opt.step()
        return np.concatenate([p.data.ravel() for p in net.parameters()])

    assert np.array_equal(run(), run())


# --- checkpoints ------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    arrays = {"w": rng.normal(size=(3, 4)), "b": rng.normal(size=4), "s": np.array(np.pi)}
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, arrays, {"kind": "test", "dims": [3, 4]})
    loaded, meta = load_checkpoint(path)
    assert meta == {"kind": "test", "dims": [3, 4]}
    assert set(loaded) == set(arrays)
    for k in arrays:
        assert loaded[k].shape == arrays[k].shape
        assert np.array_equal(loaded[k], arrays[k])


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_text("hello\n")
    with pytest.raises(ad.CheckpointError):
        load_checkpoint(path)


def test_relative_error_floor():
    assert relative_error(np.array([1e-9]), np.array([0.0])) == 0.0
    assert relative_error(np.array([1.0]), np.array([1.1])) == pytest.approx(0.1 / 1.1)
