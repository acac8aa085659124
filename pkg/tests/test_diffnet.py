import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from genmeter import diffnet
from genmeter.diffnet import Activation, AdamState, MlpNetwork, adam_step, init_mlp
from genmeter.errors import ConfigError, DataFormatError, InputError


def naive_forward(net, x):
    """Loop-based reference forward pass."""
    out = []
    for row in x:
        h = list(row)
        for W, b, act in zip(net.weights, net.biases, net.activations):
            a = []
            for i in range(W.shape[0]):
                s = b[i]
                for j in range(W.shape[1]):
                    s += W[i, j] * h[j]
                a.append(s)
            h = [float(act.value(np.float64(v))) for v in a]
        out.append(h)
    return np.array(out)


def central_diff(fn, params, h=1e-5):
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + h
            up = fn()
            p[idx] = old - h
            down = fn()
            p[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def max_rel_err(a_list, b_list):
    num = max(np.max(np.abs(a - b)) for a, b in zip(a_list, b_list))
    den = max(max(np.max(np.abs(a)), np.max(np.abs(b))) for a, b in zip(a_list, b_list))
    return num / max(den, 1e-12)


def test_identity_layer_passes_input_through():
    net = MlpNetwork([3, 3], [np.eye(3)], [np.zeros(3)], [Activation("identity")])
    x = np.array([[1.0, -2.0, 0.5], [3.0, 0.0, 1.0]])
    assert np.array_equal(diffnet.forward(net, x), x)


def test_zero_weight_tanh_layer_outputs_tanh_of_bias():
    b = np.array([0.3, -1.2])
    net = MlpNetwork([4, 2], [np.zeros((2, 4))], [b], [Activation("tanh")])
    out = diffnet.forward(net, np.random.default_rng(0).normal(size=(5, 4)))
    assert np.allclose(out, np.tanh(b)[None, :], atol=0, rtol=0)


def test_forward_matches_naive_loops():
    net = init_mlp([3, 5, 2], hidden="tanh", seed=7)
    net.biases[0][:] = np.linspace(-0.5, 0.5, 5)
    x = np.random.default_rng(1).normal(size=(4, 3))
    assert np.allclose(diffnet.forward(net, x), naive_forward(net, x), rtol=1e-12, atol=1e-12)


def test_forward_shape_mismatch_raises():
    net = init_mlp([3, 4, 1], seed=0)
    with pytest.raises(ConfigError):
        diffnet.forward(net, np.zeros((2, 2)))


def test_zero_output_grad_gives_zero_gradients():
    net = init_mlp([3, 6, 2], hidden="tanh", seed=0)
    x = np.random.default_rng(0).normal(size=(5, 3))
    g = diffnet.backward(net, x, np.zeros((5, 2)))
    assert all(np.all(p == 0) for p in g.parameters())
    assert np.all(g.inputs == 0)


def test_linear_net_weight_gradient_is_outer_product_sum():
    W = np.array([[1.0, 2.0, -1.0]])
    net = MlpNetwork([3, 1], [W], [np.zeros(1)], [Activation("identity")])
    x = np.random.default_rng(2).normal(size=(6, 3))
    g = np.random.default_rng(3).normal(size=(6, 1))
    grads = diffnet.backward(net, x, g)
    assert np.allclose(grads.weights[0], g.T @ x)
    assert np.allclose(grads.biases[0], g.sum(axis=0))
    assert np.allclose(grads.inputs, g @ W)


@pytest.mark.parametrize("hidden", ["tanh", "sigmoid", "leaky_relu"])
def test_backward_matches_central_differences(hidden):
    rng = np.random.default_rng(5)
    net = init_mlp([3, 7, 5, 1], hidden=hidden, seed=11)
    for b in net.biases:
        b[:] = rng.normal(scale=0.1, size=b.shape)
    x = rng.normal(size=(8, 3))
    w = rng.normal(size=(8, 1))
    params = net.parameters()

    def loss():
        return float(np.sum(diffnet.forward(net, x) * w))

    fd = central_diff(loss, params)
    an = diffnet.backward(net, x, w).parameters()
    assert max_rel_err(an, fd) < 1e-4


def test_input_gradient_matches_central_differences():
    net = init_mlp([4, 8, 1], hidden="tanh", seed=3)
    x = np.random.default_rng(4).normal(size=(3, 4))
    fd = central_diff(lambda: float(np.sum(diffnet.forward(net, x))), [x])[0]
    assert np.allclose(diffnet.input_gradient(net, x), fd, atol=1e-8)


def test_constant_net_penalties():
    net = MlpNetwork([2, 1], [np.zeros((1, 2))], [np.array([0.7])], [Activation("identity")])
    real = np.random.default_rng(0).normal(size=(10, 2))
    fake = np.random.default_rng(1).normal(size=(10, 2))
    assert diffnet.gradient_penalty(net, real, fake, "r1")[0] == 0.0
    assert diffnet.gradient_penalty(net, real, fake, "zero_centered_gp")[0] == 0.0
    assert diffnet.gradient_penalty(net, real, fake, "one_centered_gp")[0] == 1.0


def test_linear_1d_r1_is_slope_squared():
    net = MlpNetwork([1, 1], [np.array([[3.0]])], [np.array([0.2])], [Activation("identity")])
    for seed in range(3):
        real = np.random.default_rng(seed).normal(size=(7, 1))
        assert diffnet.gradient_penalty(net, real, real, "r1")[0] == pytest.approx(9.0, rel=1e-12)


@pytest.mark.parametrize("mode", diffnet.GP_MODES)
@pytest.mark.parametrize("hidden", ["tanh", "sigmoid", "leaky_relu"])
def test_penalty_parameter_gradients_match_finite_differences(mode, hidden):
    rng = np.random.default_rng(8)
    net = init_mlp([2, 6, 6, 1], hidden=hidden, seed=9)
    for b in net.biases:
        b[:] = rng.normal(scale=0.2, size=b.shape)
    real, fake = rng.normal(size=(6, 2)), rng.normal(size=(6, 2))
    value, grads = diffnet.gradient_penalty(net, real, fake, mode, seed=4)
    fd = central_diff(lambda: diffnet.gradient_penalty(net, real, fake, mode, seed=4)[0], net.parameters())
    assert max_rel_err(grads.parameters(), fd) < 1e-4


def test_penalty_value_matches_fd_input_gradients():
    net = init_mlp([3, 5, 1], hidden="tanh", seed=2)
    real = np.random.default_rng(0).normal(size=(4, 3))
    g = []
    for r in real:
        row = r.copy()
        g.append(central_diff(lambda: float(diffnet.forward(net, row[None, :])[0, 0]), [row])[0])
    g = np.array(g)
    expected = np.mean(np.sum(g * g, axis=1))
    assert diffnet.gradient_penalty(net, real, real, "r1")[0] == pytest.approx(expected, rel=1e-6)


def test_penalty_errors():
    net = init_mlp([2, 3, 1], seed=0)
    with pytest.raises(ConfigError):
        diffnet.gradient_penalty(net, np.zeros((2, 2)), np.zeros((2, 2)), "two_centered")
    with pytest.raises(InputError):
        diffnet.gradient_penalty(net, np.zeros((0, 2)), np.zeros((0, 2)), "r1")


def test_penalty_deterministic_given_seed():
    net = init_mlp([2, 4, 1], hidden="tanh", seed=0)
    real, fake = np.ones((5, 2)), -np.ones((5, 2))
    a = diffnet.gradient_penalty(net, real, fake, "one_centered_gp", seed=3)
    b = diffnet.gradient_penalty(net, real, fake, "one_centered_gp", seed=3)
    assert a[0] == b[0]
    assert all(np.array_equal(x, y) for x, y in zip(a[1].parameters(), b[1].parameters()))


def test_adam_zero_gradient_leaves_params():
    p = [np.array([1.0, -2.0])]
    state = AdamState.fresh(p, lr=0.1)
    new_p, new_state = adam_step(state, p, [np.zeros(2)])
    assert np.array_equal(new_p[0], p[0])
    assert new_state.step == 1


def test_adam_single_step_matches_hand_formula():
    lr, b1, b2, eps, g, x = 0.01, 0.9, 0.999, 1e-8, 0.3, 2.0
    state = AdamState.fresh([np.array([x])], lr, b1, b2, eps)
    new_p, _ = adam_step(state, [np.array([x])], [np.array([g])])
    m = (1 - b1) * g
    v = (1 - b2) * g * g
    expected = x - lr * (m / (1 - b1)) / (np.sqrt(v / (1 - b2)) + eps)
    assert new_p[0][0] == pytest.approx(expected, rel=0, abs=1e-15)


def test_adam_replay_is_deterministic():
    rng = np.random.default_rng(0)
    grads = [[rng.normal(size=3)] for _ in range(2)]

    def run():
        p, s = [np.zeros(3)], AdamState.fresh([np.zeros(3)], 0.05)
        for g in grads:
            p, s = adam_step(s, p, g)
        return p[0]

    assert np.array_equal(run(), run())


def test_adam_minimises_quadratic():
    p = [np.array([3.0, -4.0])]
    state = AdamState.fresh(p, lr=0.1)
    for _ in range(500):
        p, state = adam_step(state, p, [2 * p[0]])
    assert np.max(np.abs(p[0])) < 1e-2


def test_adam_rejects_bad_betas_and_shapes():
    with pytest.raises(ConfigError):
        AdamState.fresh([np.zeros(1)], beta1=1.0)
    state = AdamState.fresh([np.zeros(2)])
    with pytest.raises(ConfigError):
        adam_step(state, [np.zeros(2)], [np.zeros(3)])


def test_glorot_bounds_and_zero_biases():
    net = init_mlp([10, 30, 1], seed=0)
    assert np.max(np.abs(net.weights[0])) <= np.sqrt(6 / 40)
    assert all(np.all(b == 0) for b in net.biases)


def test_checkpoint_round_trip_bitwise(tmp_path):
    net = init_mlp([2, 5, 3], hidden="leaky_relu", output="sigmoid", seed=4, slope=0.1)
    path = tmp_path / "net.gmtr"
    diffnet.save_network(net, path)
    back = diffnet.load_network(path)
    assert path.read_bytes()[:5] == b"GMTR1"
    assert back.layer_widths == net.layer_widths
    assert [a.kind for a in back.activations] == [a.kind for a in net.activations]
    assert back.activations[0].slope == 0.1
    assert all(np.array_equal(a, b) for a, b in zip(back.parameters(), net.parameters()))


def test_checkpoint_rejects_garbage():
    data = diffnet.checkpoint_bytes(init_mlp([2, 3, 1], seed=0))
    with pytest.raises(DataFormatError):
        diffnet.network_from_bytes(b"XXXXX" + data[5:])
    with pytest.raises(DataFormatError):
        diffnet.network_from_bytes(data[:-3])
    with pytest.raises(DataFormatError):
        diffnet.network_from_bytes(data + b"\x00")


@settings(max_examples=25, deadline=None)
@given(widths=st.lists(st.integers(1, 6), min_size=2, max_size=5), n=st.integers(1, 7),
       seed=st.integers(0, 2 ** 32 - 1))
def test_shape_algebra(widths, n, seed):
    net = init_mlp(widths, hidden="tanh", seed=seed)
    x = np.random.default_rng(seed).normal(size=(n, widths[0]))
    y = diffnet.forward(net, x)
    assert y.shape == (n, widths[-1])
    g = diffnet.backward(net, x, np.ones_like(y))
    assert [w.shape for w in g.weights] == [w.shape for w in net.weights]
    assert [b.shape for b in g.biases] == [b.shape for b in net.biases]
    assert g.inputs.shape == x.shape
    assert np.array_equal(y, diffnet.forward(net, x))


@settings(max_examples=30, deadline=None)
@given(x=st.floats(-4, 4), kind=st.sampled_from(["tanh", "sigmoid"]))
def test_activation_derivatives(x, kind):
    act = Activation(kind)
    h = 1e-5
    a = np.array([x])
    fd1 = (act.value(a + h) - act.value(a - h)) / (2 * h)
    assert np.allclose(act.d1(a, act.value(a)), fd1, atol=1e-8)
    fd2 = (act.d1(a + h, act.value(a + h)) - act.d1(a - h, act.value(a - h))) / (2 * h)
    assert np.allclose(act.d2(a, act.value(a)), fd2, atol=1e-7)
