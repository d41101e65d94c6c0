import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import shiftlab.nets as nets_mod
from shiftlab.attacks import finite_difference_gradient
from shiftlab.datagen import dots, orth_vectors
from shiftlab.kernels import KernelKind, cntk_gap, gram
from shiftlab.margin import LabeledSet
from shiftlab.nets import (
    ConvGapNet,
    FcNet,
    TrainConfig,
    TrainingDivergedError,
    conv_forward,
    empirical_ntk,
    fc_forward,
    forward,
    init_normal,
    input_gradient,
    load_net,
    loss_and_grads,
    net_classifier,
    save_net,
    suggest_learning_rate,
    train_full_batch,
)
from shiftlab.signals import circular_shift, cyclic_patches


def conv_reference(net, x):
    """Loop form of (1/d) v^T relu(W * x) 1_d."""
    d = net.d
    total = 0.0
    for k in range(net.width):
        for i in range(d):
            pre = sum(net.W[k, j] * x[(i + j) % d] for j in range(net.q))
            total += net.v[k] * max(pre, 0.0)
    return total / d


def param_fd(net, X, y, h=1e-6):
    """Central differences of the loss in every parameter."""
    dW = np.zeros_like(net.W)
    for idx in np.ndindex(net.W.shape):
        a, b = net.copy(), net.copy()
        a.W[idx] += h
        b.W[idx] -= h
        dW[idx] = (loss_and_grads(a, X, y)[0] - loss_and_grads(b, X, y)[0]) / (2 * h)
    dv = np.zeros_like(net.v)
    for k in range(net.width):
        a, b = net.copy(), net.copy()
        a.v[k] += h
        b.v[k] -= h
        dv[k] = (loss_and_grads(a, X, y)[0] - loss_and_grads(b, X, y)[0]) / (2 * h)
    return dW, dv


@pytest.fixture(params=[False, True], ids=["patches", "fft"])
def conv_path(request, monkeypatch):
    """Run a test through both convolution code paths."""
    monkeypatch.setattr(nets_mod, "_use_fft", lambda d, q: request.param)
    return request.param


class TestForward:
    def test_fc_examples(self):
        assert fc_forward(FcNet([[1, 0]], [1]), np.array([2.0, -3.0])) == 2.0
        assert fc_forward(FcNet([[-1, 0]], [1]), np.array([2.0, 0.0])) == 0.0
        assert fc_forward(FcNet([[1, 0], [0, 1]], [1, 1]), np.array([1.0, 1.0])) == 2.0

    def test_conv_example(self, conv_path):
        net = ConvGapNet([[1.0]], [1.0], 4)
        assert conv_forward(net, np.array([1.0, 0, 0, 0])) == pytest.approx(0.25, abs=1e-15)

    def test_conv_zero_readout(self, rng):
        net = ConvGapNet(rng.standard_normal((5, 3)), np.zeros(5), 7)
        assert forward(net, rng.standard_normal(7)) == 0.0

    def test_conv_matches_loops(self, rng, conv_path):
        net = init_normal("conv", 7, 6, 3, q=3)
        x = rng.standard_normal(7)
        assert conv_forward(net, x) == pytest.approx(conv_reference(net, x), rel=1e-12)

    def test_batch(self, rng, conv_path):
        for net in (init_normal("fc", 5, 8, 0), init_normal("conv", 5, 8, 0, q=2)):
            X = rng.standard_normal((4, 5))
            np.testing.assert_allclose(forward(net, X), [forward(net, x) for x in X], rtol=1e-13)

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            forward(init_normal("fc", 5, 4, 0), np.ones(4))

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            FcNet(np.ones((3, 2)), np.ones(2))
        with pytest.raises(ValueError):
            ConvGapNet(np.ones((3, 6)), np.ones(3), 4)

    @given(st.integers(0, 1000), st.integers(2, 9), st.data())
    def test_conv_exact_shift_invariance(self, seed, d, data):
        q = data.draw(st.integers(1, d))
        net = init_normal("conv", d, 8, seed, q=q)
        x = np.random.default_rng(seed).standard_normal(d)
        f = forward(net, x)
        for s in range(d):
            assert abs(forward(net, circular_shift(x, s)) - f) <= 1e-9 * (1 + abs(f))


class TestInit:
    def test_deterministic(self):
        a = init_normal("conv", 8, 4, 11, q=3)
        b = init_normal("conv", 8, 4, 11, q=3)
        np.testing.assert_array_equal(a.W, b.W)
        np.testing.assert_array_equal(a.v, b.v)

    def test_moments(self):
        net = init_normal("fc", 1000, 1000, 0)
        entries = net.W.ravel()
        assert -0.01 < entries.mean() < 0.01
        assert 0.99 < entries.var() < 1.01

    def test_symmetric_zero_output(self, rng):
        net = init_normal("conv", 6, 10, 0, q=4, symmetric=True)
        assert np.max(np.abs(forward(net, rng.standard_normal((5, 6))))) <= 1e-12

    def test_symmetric_needs_even_width(self):
        with pytest.raises(ValueError):
            init_normal("fc", 4, 3, 0, symmetric=True)

    def test_invalid(self):
        with pytest.raises(ValueError):
            init_normal("rnn", 4, 3, 0)
        with pytest.raises(ValueError):
            init_normal("conv", 4, 3, 0, q=5)
        with pytest.raises(ValueError):
            init_normal("fc", 4, 0, 0)


class TestGradients:
    @pytest.mark.parametrize("arch", ["fc", "conv"])
    def test_parameter_gradients(self, rng, arch, conv_path):
        net = init_normal(arch, 5, 4, 2, q=3)
        X = rng.standard_normal((3, 5))
        y = np.array([1.0, -1.0, 1.0])
        _, dW, dv = loss_and_grads(net, X, y)
        fW, fv = param_fd(net, X, y)
        np.testing.assert_allclose(dW, fW, rtol=1e-5, atol=1e-7)
        np.testing.assert_allclose(dv, fv, rtol=1e-5, atol=1e-7)

    @pytest.mark.parametrize("arch", ["fc", "conv"])
    def test_input_gradient(self, rng, arch, conv_path):
        net = init_normal(arch, 6, 12, 4, q=6)
        c = net_classifier(net)
        for x in rng.standard_normal((5, 6)):
            g = input_gradient(net, x)
            fd = finite_difference_gradient(c, x)
            assert np.linalg.norm(g - fd) <= 1e-4 * max(np.linalg.norm(fd), 1e-12)

    def test_input_gradient_single_only(self, rng):
        with pytest.raises(ValueError):
            input_gradient(init_normal("fc", 3, 2, 0), rng.standard_normal((2, 3)))


class TestEmpiricalNtk:
    @pytest.mark.parametrize("arch", ["fc", "conv"])
    def test_is_jacobian_gram(self, rng, arch, conv_path):
        net = init_normal(arch, 5, 3, 1, q=2)
        X = rng.standard_normal((3, 5))
        J = []
        for x in X:
            # jacobian of the output, via loss_and_grads with residual 1/2: d/dθ (f - y)^2 / 1
            _, dW, dv = loss_and_grads(net, x[None], np.array([forward(net, x) - 0.5]))
            J.append(np.concatenate([dW.ravel(), dv]))
        J = np.array(J)
        np.testing.assert_allclose(empirical_ntk(net, X), J @ J.T, rtol=1e-10, atol=1e-12)

    def test_conv_wide_limit_matches_cntk(self, rng):
        # E[empirical NTK] = (m/2) * CNTK under standard normal init
        d, q, m = 6, 3, 40000
        net = init_normal("conv", d, m, 0, q=q)
        X = rng.standard_normal((3, d))
        K = empirical_ntk(net, X) / (m / 2)
        H = gram(KernelKind.cntk(q), X).entries
        np.testing.assert_allclose(K, H, rtol=0.05, atol=0.02)

    def test_suggested_rate(self, rng):
        net = init_normal("fc", 4, 10, 0)
        X = rng.standard_normal((5, 4))
        lam = np.linalg.eigvalsh(empirical_ntk(net, X)).max()
        assert suggest_learning_rate(net, X) == pytest.approx(0.5 * 5 / lam)


class TestTraining:
    def test_zero_steps(self):
        net = init_normal("fc", 2, 4, 0)
        data = LabeledSet([[1.0, 0.0]], [[-1.0, 0.0]])
        out, losses = train_full_batch(net, data, TrainConfig(1e-2, 0))
        np.testing.assert_array_equal(out.W, net.W)
        np.testing.assert_array_equal(out.v, net.v)
        assert losses.shape == (1,)

    def test_tiny_problem_converges(self):
        net = init_normal("fc", 2, 64, 0)
        data = LabeledSet([[1.0, 0.5]], [[-0.5, 1.0]])
        _, losses = train_full_batch(net, data, TrainConfig(1e-2, 500))
        assert losses[-1] < 1e-3

    def test_small_rate_monotone(self):
        net = init_normal("fc", 2, 64, 0)
        data = LabeledSet([[1.0, 0.5]], [[-0.5, 1.0]])
        _, losses = train_full_batch(net, data, TrainConfig(1e-3, 300))
        assert np.all(np.diff(losses) <= 1e-15)

    def test_input_not_modified(self):
        net = init_normal("conv", 4, 6, 0, q=2)
        W0 = net.W.copy()
        train_full_batch(net, dots(4), TrainConfig(1e-2, 5))
        np.testing.assert_array_equal(net.W, W0)

    def test_target_loss_stops(self):
        net = init_normal("fc", 2, 64, 0, symmetric=True)
        data = LabeledSet([[1.0, 0.5]], [[-0.5, 1.0]])
        _, losses = train_full_batch(net, data, TrainConfig(suggest_learning_rate(net, data.points), 1000,
                                                            target_loss=1e-2))
        assert losses[-1] <= 1e-2
        assert len(losses) < 1000

    def test_divergence(self):
        # all units stay active on the positive class, so the loss grows without bound
        net = FcNet(np.ones((4, 2)), np.ones(4))
        data = LabeledSet([[1.0, 1.0], [2.0, 2.5]], [[-1.0, -1.0]])
        with pytest.raises(TrainingDivergedError):
            train_full_batch(net, data, TrainConfig(1.0, 200))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(0.0, 10)
        with pytest.raises(ValueError):
            TrainConfig(0.1, -1)
        assert TrainConfig(0.1, 1).loss == "squared"

    def test_non_finite_data(self):
        data = LabeledSet([[1.0, 0.5]], [[-0.5, 1.0]])
        object.__setattr__(data, "class_pos", np.array([[np.nan, 0.0]]))
        with pytest.raises(ValueError):
            train_full_batch(init_normal("fc", 2, 4, 0), data, TrainConfig(0.1, 1))


class TestClassifierAndCheckpoint:
    def test_classifier_matches_forward(self, rng):
        net = init_normal("fc", 4, 8, 0)
        c = net_classifier(net)
        x = rng.standard_normal(4)
        assert c(x) == forward(net, x)
        assert np.isfinite(c(x))

    def test_classifier_frozen(self, rng):
        net = init_normal("fc", 4, 8, 0)
        c = net_classifier(net)
        x = rng.standard_normal(4)
        before = c(x)
        net.W[:] = 0.0
        assert c(x) == before

    @pytest.mark.parametrize("arch", ["fc", "conv"])
    def test_round_trip(self, tmp_path, arch):
        net = init_normal(arch, 9, 5, 3, q=4)
        path = tmp_path / "net.bin"
        save_net(net, path)
        back = load_net(path)
        assert type(back) is type(net)
        np.testing.assert_array_equal(back.W, net.W)
        np.testing.assert_array_equal(back.v, net.v)
        assert back.d == net.d

    def test_corrupt_checkpoint(self, tmp_path):
        path = tmp_path / "net.bin"
        save_net(init_normal("fc", 3, 2, 0), path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(ValueError):
            load_net(path)
        path.write_bytes(b"garbage!" + raw[8:])
        with pytest.raises(ValueError):
            load_net(path)


class TestFftPath:
    def test_paths_agree_on_long_filters(self, rng, monkeypatch):
        net = init_normal("conv", 16, 20, 0, q=12)
        X = rng.standard_normal((4, 16))
        y = np.array([1.0, -1.0, 1.0, -1.0])
        results = {}
        for flag in (False, True):
            monkeypatch.setattr(nets_mod, "_use_fft", lambda d, q, flag=flag: flag)
            results[flag] = (forward(net, X), *loss_and_grads(net, X, y)[1:], empirical_ntk(net, X),
                             input_gradient(net, X[0]))
        for a, b in zip(results[False], results[True]):
            np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)

    def test_patch_definition_used(self):
        # the pre-activation at position i uses patch i = (x_i, ..., x_{i+q-1})
        net = ConvGapNet([[1.0, 10.0]], [1.0], 3)
        x = np.array([1.0, 2.0, 3.0])
        expected = np.maximum(cyclic_patches(x, 2) @ net.W[0], 0).mean()
        assert forward(net, x) == pytest.approx(expected)
