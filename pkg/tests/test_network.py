import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sann.dataset import encode_labels
from sann.errors import InputError, NumericalError
from sann.network import (
    MAGIC,
    Mode,
    Network,
    Prediction,
    TrainConfig,
    accuracy,
    forward,
    from_bytes,
    gradients,
    init_network,
    load_network,
    predict,
    predict_with_response,
    sample_loss,
    save_network,
    to_bytes,
    train,
    train_epoch,
)
from sann.numerics import Rng

ALL_MODES = list(Mode)


def numeric_gradients(net, x, target, eps=1e-5):
    """Central differences of the per-sample MSE, one parameter at a time."""
    out = []
    for layer in net.layers:
        pair = []
        for arr in (layer.weights, layer.biases):
            g = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + eps
                up = sample_loss(net, x, target)
                arr[idx] = old - eps
                down = sample_loss(net, x, target)
                arr[idx] = old
                g[idx] = (up - down) / (2 * eps)
            pair.append(g)
        out.append(tuple(pair))
    return out


def max_relative_error(analytic, numeric, floor=1e-8):
    worst = 0.0
    for (aw, ab), (nw, nb) in zip(analytic, numeric):
        for a, n in ((aw, nw), (ab, nb)):
            denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
            worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def test_init_shapes_for_default_topology():
    net = init_network((16, 16, 15), seed=1)
    assert [l.weights.shape for l in net.layers] == [(16, 16), (15, 16)]
    assert [l.biases.shape for l in net.layers] == [(16,), (15,)]
    assert net.dims == (16, 16, 15)
    assert net.mode is Mode.NONE


def test_init_state():
    net = init_network((16, 16, 15), seed=1)
    assert np.all(net.salience == 0.0)
    for layer in net.layers:
        bound = 1 / math.sqrt(layer.weights.shape[1])
        assert np.all(np.abs(layer.weights) <= bound)
        assert np.all(layer.biases == 0.0)
        assert np.all(layer.salience == 0.0)


def test_init_is_deterministic():
    a, b = init_network((16, 16, 15), 9), init_network((16, 16, 15), 9)
    for la, lb in zip(a.layers, b.layers):
        np.testing.assert_array_equal(la.weights, lb.weights)
    c = init_network((16, 16, 15), 10)
    assert not np.array_equal(a.layers[0].weights, c.layers[0].weights)


@pytest.mark.parametrize("dims", [(), (4,), (4, 0, 2), (3, -1)])
def test_init_rejects_bad_dims(dims):
    with pytest.raises(InputError):
        init_network(dims, 0)


def test_layer_views_share_network_state():
    net = init_network((4, 3, 2), 0)
    net.layers[1].salience[:] = 0.25
    assert np.all(net.salience[3:] == 0.25)
    forward(net, np.ones(4))
    np.testing.assert_array_equal(net.activations[3:], net.layers[1].last_activation)


def test_forward_none_matches_hand_computation():
    net = init_network((3, 2), 4)
    x = np.array([0.2, -0.4, 0.9])
    w, b = net.layers[0].weights, net.layers[0].biases
    expected = [1 / (1 + math.exp(-(sum(w[i, j] * x[j] for j in range(3)) + b[i]))) for i in range(2)]
    np.testing.assert_allclose(forward(net, x), expected, rtol=1e-14)


def test_forward_caches_activations():
    net = init_network((4, 3, 2), 0)
    y = forward(net, np.array([1.0, 0.0, 0.5, 0.25]))
    np.testing.assert_array_equal(net.layers[-1].last_activation, y)
    assert np.all((net.activations > 0) & (net.activations < 1))


@pytest.mark.parametrize("mode", ALL_MODES)
def test_zero_salience_modes_are_bit_identical(mode):
    net = init_network((16, 16, 15), 3)
    x = Rng(1).uniform(0, 1, size=16)
    ref = forward(net, x)
    net.mode = mode
    np.testing.assert_array_equal(forward(net, x), ref)


def _single_node(weight, bias, s, mode):
    net = Network([[[weight]]], [[bias]], [[s]], mode)
    return float(forward(net, np.array([1.0]))[0])


def test_mode_formulas():
    x, s = 0.7, 0.4
    assert _single_node(x, 0.0, s, Mode.HORIZONTAL_OFFSET) == pytest.approx(1 / (1 + math.exp(-(x + s))), rel=1e-14)
    assert _single_node(x, 0.0, s, Mode.GRADIENT) == pytest.approx(1 / (1 + math.exp(-x * math.sqrt(0.5**-s))), rel=1e-14)
    assert _single_node(x, 0.0, s, Mode.AMPLITUDE) == pytest.approx(0.5**-s / (1 + math.exp(-x)), rel=1e-14)


def test_amplitude_asymptote_and_offset_midpoint():
    assert _single_node(60.0, 0.0, 1.0, Mode.AMPLITUDE) == pytest.approx(2.0, abs=1e-12)
    assert _single_node(-0.3, 0.0, 0.3, Mode.HORIZONTAL_OFFSET) == pytest.approx(0.5, abs=1e-15)


def test_forward_dimension_mismatch():
    with pytest.raises(InputError):
        forward(init_network((4, 3, 2), 0), np.ones(5))


def test_mode_parse():
    assert Mode.parse("amplitude") is Mode.AMPLITUDE
    assert Mode.parse("Horizontal-Offset") is Mode.HORIZONTAL_OFFSET
    with pytest.raises(InputError):
        Mode.parse("relu")


# -- gradients -----------------------------------------------------------------


def test_backprop_matches_finite_differences(small_net):
    rng = np.random.default_rng(0)
    for _ in range(4):
        x = rng.uniform(-1, 1, 4)
        t = rng.uniform(0, 1, 2)
        _, analytic = gradients(small_net, x, t)
        assert max_relative_error(analytic, numeric_gradients(small_net, x, t)) < 1e-5


def test_zero_error_means_zero_update(small_net):
    x = np.array([0.1, 0.2, 0.3, 0.4])
    before = to_bytes(small_net)
    target = forward(small_net, x)
    loss, grads = gradients(small_net, x, target)
    assert loss == 0.0
    for gw, gb in grads:
        assert not gw.any() and not gb.any()
    train_epoch(small_net, [(x, target)], TrainConfig(0.5, 1, 0))
    assert to_bytes(small_net) == before


def test_train_epoch_rejects_modulated_mode(small_net):
    small_net.mode = Mode.AMPLITUDE
    with pytest.raises(InputError):
        train_epoch(small_net, [(np.zeros(4), np.zeros(2))], TrainConfig())


def test_train_epoch_rejects_shape_mismatch(small_net):
    with pytest.raises(InputError):
        train_epoch(small_net, [(np.zeros(3), np.zeros(2))], TrainConfig())


def test_non_finite_loss_names_epoch(small_net):
    with pytest.raises(NumericalError, match="epoch 7"):
        train_epoch(small_net, [(np.zeros(4), np.array([np.nan, 0.0]))], TrainConfig(), epoch=7)


@pytest.mark.parametrize("kw", [dict(learning_rate=0.0), dict(learning_rate=-1.0), dict(epochs=0)])
def test_train_config_validation(kw):
    with pytest.raises(InputError):
        TrainConfig(**kw)


def test_training_leaves_salience_alone(small_net):
    small_net.salience[:] = np.linspace(-0.5, 0.5, small_net.n_nodes)
    before = small_net.salience.copy()
    samples = [(np.random.default_rng(k).uniform(0, 1, 4), np.array([1.0, 0.0])) for k in range(4)]
    train(small_net, samples, TrainConfig(0.5, 3, 0))
    np.testing.assert_array_equal(small_net.salience, before)


def test_training_is_reproducible():
    samples = [(np.random.default_rng(k).uniform(0, 1, 4), np.array([k % 2, 1 - k % 2], float)) for k in range(6)]
    a, b = init_network((4, 3, 2), 1), init_network((4, 3, 2), 1)
    la = train(a, samples, TrainConfig(1.0, 20, 5))
    lb = train(b, samples, TrainConfig(1.0, 20, 5))
    assert la == lb
    assert to_bytes(a) == to_bytes(b)


def test_silhouettes_reach_full_accuracy(bench):
    net = init_network((16, 16, 15), 3)
    losses = []
    first = None
    rng = Rng(3)
    cfg = TrainConfig(2.0, 500, 3)
    for epoch in range(1, 501):
        losses.append(train_epoch(net, bench.pairs, cfg, rng, epoch))
        if accuracy(net, bench.pairs) == (1.0, 1.0):
            first = epoch
            break
    assert first is not None and first <= 500
    # 50-epoch moving average keeps falling while accuracy is below 100%
    ma = np.convolve(losses, np.ones(50) / 50, mode="valid")
    assert np.all(np.diff(ma) <= 0)


# -- prediction ------------------------------------------------------------------


def _output_net(outputs):
    """Zero weights and logit biases, so the outputs are exactly ``outputs`` for any input."""
    logits = np.log(np.asarray(outputs) / (1 - np.asarray(outputs)))
    return Network([np.zeros((15, 1))], [logits])


def test_predict_argmax_and_confidence():
    out = np.full(15, 0.05)
    out[:3] = [0.9, 0.1, 0.2]
    out[9] = 0.8
    p = predict(_output_net(out), np.zeros(1))
    assert isinstance(p, Prediction)
    assert (p.class_index, p.individual_index) == (0, 6)
    assert p.class_confidence == pytest.approx(0.9)
    assert p.individual_confidence == pytest.approx(0.8)


def test_predict_tie_goes_to_lowest_index():
    out = np.full(15, 0.3)
    out[1] = out[2] = 0.7
    out[5] = out[12] = 0.6
    p = predict(_output_net(out), np.zeros(1))
    assert p.class_index == 1
    assert p.individual_index == 2


def test_predict_is_a_pure_read():
    net = init_network((16, 16, 15), 2)
    net.salience[:] = 0.3
    x = Rng(0).uniform(0, 1, 16)
    w = to_bytes(net)
    p1, p2 = predict(net, x), predict(net, x)
    assert p1.class_confidence == p2.class_confidence
    np.testing.assert_array_equal(p1.raw_outputs, p2.raw_outputs)
    assert to_bytes(net) == w
    assert 0 < p1.class_confidence < 1 and 0 < p1.individual_confidence < 1


def test_predict_with_response_agrees_with_predict():
    net = init_network((16, 16, 15), 2)
    net.salience[:] = np.linspace(-1, 1, net.n_nodes)
    x = Rng(4).uniform(0, 1, 16)
    p, r = predict_with_response(net, x)
    assert p.raw_outputs.tolist() == predict(net, x).raw_outputs.tolist()
    assert r == pytest.approx(float(np.sum(net.salience * net.activations)))


def test_accuracy_range_and_perfect():
    net = init_network((16, 16, 15), 0)
    rng = Rng(1)
    samples = [(rng.uniform(0, 1, 16), encode_labels(k // 4, k)) for k in range(12)]
    ca, ia = accuracy(net, samples)
    assert 0 <= ca <= 1 and 0 <= ia <= 1
    memorized = [(x, encode_labels(predict(net, x).class_index, predict(net, x).individual_index)) for x, _ in samples]
    assert accuracy(net, memorized) == (1.0, 1.0)
    with pytest.raises(InputError):
        accuracy(net, [])


# -- snapshots --------------------------------------------------------------------


def test_snapshot_round_trip(tmp_path):
    net = init_network((16, 16, 15), 5)
    net.salience[:] = np.linspace(-1, 1, net.n_nodes)
    net.mode = Mode.GRADIENT
    path = tmp_path / "n.sann"
    save_network(net, path)
    back = load_network(path, expected_dims=(16, 16, 15))
    assert back.mode is Mode.GRADIENT and back.dims == net.dims
    assert to_bytes(back) == to_bytes(net)
    np.testing.assert_array_equal(back.salience, net.salience)


def test_snapshot_layout_is_little_endian_f64():
    net = init_network((2, 1), 0)
    data = to_bytes(net)
    assert data.startswith(MAGIC)
    assert data[5] == 0  # mode none
    assert int.from_bytes(data[6:8], "little") == 2
    payload = np.frombuffer(data[16:], dtype="<f8")
    np.testing.assert_array_equal(payload[:2], net.layers[0].weights.ravel())
    assert len(payload) == 2 + 1 + 1


def test_snapshot_rejects_bad_magic_and_dims():
    data = to_bytes(init_network((4, 3, 2), 0))
    with pytest.raises(InputError, match="magic"):
        from_bytes(b"XANN1" + data[5:])
    with pytest.raises(InputError, match="expected"):
        from_bytes(data, expected_dims=(4, 3, 3))
    with pytest.raises(InputError):
        from_bytes(data[:-8])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=2, max_size=4), st.integers(0, 2**32))
def test_snapshot_round_trip_property(dims, seed):
    net = init_network(dims, seed)
    net.salience[:] = Rng(seed).uniform(-1, 1, net.n_nodes)
    assert to_bytes(from_bytes(to_bytes(net))) == to_bytes(net)
