"""Dense sigmoid feedforward network with per-node salience state.

Node state (salience and the activation cache) lives in two flat vectors
shared by all layers; each ``Layer`` holds views into them. That keeps the
salience response a single dot product at inference time.
"""

import enum
import io
import math
import struct
from dataclasses import dataclass

import numpy as np

from sann.errors import InputError, NumericalError
from sann.numerics import CLAMP, Rng, sigmoid_prime_from_output

N_CLASSES = 3
N_INDIVIDUALS = 12
N_OUTPUTS = N_CLASSES + N_INDIVIDUALS
DEFAULT_DIMS = (16, 16, 15)

MAGIC = b"SANN1"


class Mode(enum.Enum):
    """How a node's salience reshapes its sigmoid."""

    NONE = "none"
    HORIZONTAL_OFFSET = "horizontal_offset"
    GRADIENT = "gradient"
    AMPLITUDE = "amplitude"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"offset": "horizontal_offset", "horizontal": "horizontal_offset", "amp": "amplitude"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise InputError(f"unknown activation mode {value!r} (expected one of {names})") from None


_MODE_CODES = {Mode.NONE: 0, Mode.HORIZONTAL_OFFSET: 1, Mode.GRADIENT: 2, Mode.AMPLITUDE: 3}
_CODE_MODES = {v: k for k, v in _MODE_CODES.items()}


@dataclass
class Layer:
    weights: np.ndarray  # (out_dim, in_dim)
    biases: np.ndarray
    salience: np.ndarray  # view into Network.salience
    last_activation: np.ndarray  # view into Network.activations

    @property
    def shape(self):
        return self.weights.shape


class Network:
    """Layered dense net. ``dims[0]`` is the input width; every later entry is a layer of nodes."""

    def __init__(self, weights, biases, salience=None, mode=Mode.NONE):
        if len(weights) == 0 or len(weights) != len(biases):
            raise InputError("need one bias vector per weight matrix and at least one layer")
        weights = [np.array(w, dtype=np.float64, order="C") for w in weights]
        biases = [np.array(b, dtype=np.float64) for b in biases]
        dims = [weights[0].shape[1]]
        for w, b in zip(weights, biases):
            if w.ndim != 2 or w.shape[1] != dims[-1] or b.shape != (w.shape[0],):
                raise InputError(f"layer shapes do not chain: weights {w.shape}, biases {b.shape}, fan-in {dims[-1]}")
            dims.append(w.shape[0])
        self.dims = tuple(dims)
        self.mode = Mode.parse(mode)

        n_nodes = sum(dims[1:])
        self.salience = np.zeros(n_nodes)
        if salience is not None:
            flat = np.concatenate([np.asarray(s, dtype=np.float64).ravel() for s in salience])
            if flat.shape != (n_nodes,):
                raise InputError(f"salience has {flat.size} entries, network has {n_nodes} nodes")
            self.salience[:] = flat
        self.activations = np.zeros(n_nodes)

        self.layers = []
        start = 0
        for w, b in zip(weights, biases):
            stop = start + w.shape[0]
            self.layers.append(Layer(w, b, self.salience[start:stop], self.activations[start:stop]))
            start = stop

    @property
    def n_nodes(self):
        return self.salience.size

    def copy(self):
        return Network(
            [l.weights for l in self.layers],
            [l.biases for l in self.layers],
            [self.salience],
            self.mode,
        )

    def with_mode(self, mode):
        """Copy of this network evaluated under a different activation mode."""
        net = self.copy()
        net.mode = Mode.parse(mode)
        return net

    def node_ids(self):
        """``(layer, index)`` for every non-input node, in flat order (layer 1 is the first hidden layer)."""
        return [(li + 1, i) for li, l in enumerate(self.layers) for i in range(l.shape[0])]

    def __repr__(self):
        return f"Network(dims={self.dims}, mode={self.mode.value})"


def init_network(dims=DEFAULT_DIMS, seed=0):
    """Uniform weights in +-1/sqrt(fan_in), zero biases, zero salience, mode NONE."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise InputError(f"need at least two positive layer sizes, got {dims}")
    rng = Rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(weights, biases)


def _activate(x, s, mode):
    if mode is Mode.NONE:
        z = x
    elif mode is Mode.HORIZONTAL_OFFSET:
        z = x + s
    elif mode is Mode.GRADIENT:
        z = x * np.sqrt(0.5 ** -s)
    else:
        return 0.5 ** -s * (1.0 / (1.0 + np.exp(-np.clip(x, -CLAMP, CLAMP))))
    return 1.0 / (1.0 + np.exp(-np.clip(z, -CLAMP, CLAMP)))


def _check_input(net, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.dims[0],):
        raise InputError(f"input has shape {x.shape}, network expects ({net.dims[0]},)")
    return x


def forward(net, x):
    """Propagate one input, caching every node's output; returns a copy of the final layer."""
    a = _check_input(net, x)
    mode = net.mode
    for layer in net.layers:
        a = _activate(layer.weights @ a + layer.biases, layer.salience, mode)
        layer.last_activation[:] = a
    return a.copy()


def forward_batch(net, xs):
    """Outputs for a batch of inputs (rows). Does not touch the activation cache."""
    a = np.asarray(xs, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != net.dims[0]:
        raise InputError(f"batch has shape {a.shape}, network expects (n, {net.dims[0]})")
    for layer in net.layers:
        a = _activate(a @ layer.weights.T + layer.biases, layer.salience, net.mode)
    return a


def hidden_batch(net, xs, layer_index=0):
    """Activations of one layer for a batch of inputs."""
    a = np.asarray(xs, dtype=np.float64)
    for layer in net.layers[: layer_index + 1]:
        a = _activate(a @ layer.weights.T + layer.biases, layer.salience, net.mode)
    return a


# -- training ---------------------------------------------------------------


@dataclass
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 500
    seed: int = 0
    shuffle_each_epoch: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InputError(f"learning_rate must be positive, got {self.learning_rate}")
        if int(self.epochs) < 1:
            raise InputError(f"epochs must be at least 1, got {self.epochs}")
        self.epochs = int(self.epochs)


def sample_loss(net, x, target):
    """Per-sample MSE: mean over outputs of the squared error."""
    y = forward(net, x)
    return float(np.mean((y - target) ** 2))


def gradients(net, x, target):
    """Backprop gradients of the per-sample MSE for a mode-NONE network.

    Returns ``(loss, [(dW, db), ...])`` ordered like ``net.layers``.
    """
    x = _check_input(net, x)
    target = np.asarray(target, dtype=np.float64)
    acts = [x]
    for layer in net.layers:
        acts.append(1.0 / (1.0 + np.exp(-np.clip(layer.weights @ acts[-1] + layer.biases, -CLAMP, CLAMP))))
    y = acts[-1]
    err = y - target
    loss = float(np.mean(err**2))
    delta = (2.0 / y.size) * err * sigmoid_prime_from_output(y)
    grads = [None] * len(net.layers)
    for li in range(len(net.layers) - 1, -1, -1):
        a_prev = acts[li]
        grads[li] = (np.outer(delta, a_prev), delta)
        if li > 0:
            delta = (net.layers[li].weights.T @ delta) * sigmoid_prime_from_output(a_prev)
    return loss, grads


def dataset_loss(net, inputs, targets):
    out = forward_batch(net, inputs)
    return float(np.mean((out - np.asarray(targets)) ** 2))


def train_epoch(net, samples, cfg, rng=None, epoch=None):
    """One pass of per-sample SGD over ``samples`` (pairs of input, target).

    ``rng`` drives the shuffle; pass the same generator across epochs so each
    epoch gets a fresh order. Returns the MSE over the full set after the pass.
    """
    if net.mode is not Mode.NONE:
        raise InputError(f"classification training runs in mode NONE, network is in {net.mode.value}")
    if not samples:
        raise InputError("no training samples")
    inputs = np.array([s[0] for s in samples], dtype=np.float64)
    targets = np.array([s[1] for s in samples], dtype=np.float64)
    if inputs.shape[1] != net.dims[0] or targets.shape[1] != net.dims[-1]:
        raise InputError(
            f"samples are {inputs.shape[1]} -> {targets.shape[1]}, network is {net.dims[0]} -> {net.dims[-1]}"
        )
    if cfg.shuffle_each_epoch:
        if rng is None:
            rng = Rng(cfg.seed)
        order = rng.permutation(len(samples))
    else:
        order = range(len(samples))

    lr = cfg.learning_rate
    for k in order:
        _, grads = gradients(net, inputs[k], targets[k])
        for layer, (gw, gb) in zip(net.layers, grads):
            layer.weights -= lr * gw
            layer.biases -= lr * gb

    loss = dataset_loss(net, inputs, targets)
    if not math.isfinite(loss):
        where = f"epoch {epoch}" if epoch is not None else "this epoch"
        raise NumericalError(f"training loss became non-finite in {where}")
    return loss


def train(net, samples, cfg, on_epoch=None):
    """Run ``cfg.epochs`` epochs with one seeded shuffle stream; returns per-epoch losses.

    ``on_epoch(epoch, loss)`` is called after each epoch (1-based).
    """
    rng = Rng(cfg.seed)
    losses = []
    for epoch in range(1, cfg.epochs + 1):
        loss = train_epoch(net, samples, cfg, rng=rng, epoch=epoch)
        losses.append(loss)
        if on_epoch is not None:
            on_epoch(epoch, loss)
    return losses


# -- prediction -------------------------------------------------------------


@dataclass(frozen=True)
class Prediction:
    class_index: int
    individual_index: int
    class_confidence: float
    individual_confidence: float
    raw_outputs: np.ndarray


def _read_outputs(y):
    if y.shape[-1] != N_OUTPUTS:
        raise InputError(f"predictions need {N_OUTPUTS} outputs, network has {y.shape[-1]}")
    c = int(np.argmax(y[:N_CLASSES]))
    i = int(np.argmax(y[N_CLASSES:]))
    return Prediction(c, i, float(y[c]), float(y[N_CLASSES + i]), y)


def predict(net, x):
    return _read_outputs(forward(net, x))


def predict_with_response(net, x):
    """Prediction plus the salience response R from the same forward pass."""
    y = forward(net, x)
    return _read_outputs(y), float(net.salience @ net.activations)


def accuracy(net, samples):
    """Fractions of samples whose predicted class / individual match the target's hot slots."""
    if not samples:
        raise InputError("accuracy of an empty sample list is undefined")
    inputs = np.array([s[0] for s in samples], dtype=np.float64)
    targets = np.array([s[1] for s in samples], dtype=np.float64)
    out = forward_batch(net, inputs)
    cls_ok = np.argmax(out[:, :N_CLASSES], axis=1) == np.argmax(targets[:, :N_CLASSES], axis=1)
    ind_ok = np.argmax(out[:, N_CLASSES:], axis=1) == np.argmax(targets[:, N_CLASSES:], axis=1)
    return float(np.mean(cls_ok)), float(np.mean(ind_ok))


# -- snapshot file ------------------------------------------------------------
#
# Layout (all little-endian):
#   5 bytes  magic "SANN1"
#   u8       activation mode (0 none, 1 horizontal offset, 2 gradient, 3 amplitude)
#   u16      number of dims D
#   D x u32  dims
#   per layer: weights (out*in f64, row-major), biases (out f64), salience (out f64)


def to_bytes(net):
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<BH", _MODE_CODES[net.mode], len(net.dims)))
    buf.write(struct.pack(f"<{len(net.dims)}I", *net.dims))
    for layer in net.layers:
        for arr in (layer.weights, layer.biases, layer.salience):
            buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def from_bytes(data, expected_dims=None):
    if data[: len(MAGIC)] != MAGIC:
        raise InputError(f"not a network snapshot (magic {bytes(data[:len(MAGIC)])!r}, expected {MAGIC!r})")
    pos = len(MAGIC)
    if len(data) < pos + 3:
        raise InputError("snapshot header truncated")
    code, ndims = struct.unpack_from("<BH", data, pos)
    pos += 3
    if code not in _CODE_MODES:
        raise InputError(f"unknown activation mode code {code}")
    if ndims < 2 or len(data) < pos + 4 * ndims:
        raise InputError("snapshot header truncated or has fewer than two dims")
    dims = struct.unpack_from(f"<{ndims}I", data, pos)
    pos += 4 * ndims
    if expected_dims is not None and tuple(dims) != tuple(expected_dims):
        raise InputError(f"snapshot dims {dims} do not match expected {tuple(expected_dims)}")
    expected = 8 * sum(o * i + 2 * o for i, o in zip(dims[:-1], dims[1:]))
    if len(data) - pos != expected:
        raise InputError(f"snapshot payload is {len(data) - pos} bytes, dims {dims} need {expected}")

    def take(n):
        nonlocal pos
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=pos).astype(np.float64)
        pos += 8 * n
        return arr

    weights, biases, salience = [], [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(take(fan_in * fan_out).reshape(fan_out, fan_in))
        biases.append(take(fan_out))
        salience.append(take(fan_out))
    return Network(weights, biases, salience, _CODE_MODES[code])


def save_network(net, path):
    with open(path, "wb") as f:
        f.write(to_bytes(net))


def load_network(path, expected_dims=None):
    with open(path, "rb") as f:
        return from_bytes(f.read(), expected_dims)
