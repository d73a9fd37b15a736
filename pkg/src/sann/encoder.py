"""784-16-784 sigmoid autoencoder used as the frozen front-end of the classifier."""

import csv

import numpy as np

from sann.errors import InputError
from sann.network import Mode, TrainConfig, forward_batch, from_bytes, hidden_batch, init_network, to_bytes, train

IMAGE_DIM = 28 * 28
CODE_DIM = 16
ENCODER_DIMS = (IMAGE_DIM, CODE_DIM, IMAGE_DIM)

# MSE over 784 outputs yields tiny per-weight gradients, hence the large step.
DEFAULT_ENCODER_LR = 60.0


class Autoencoder:
    def __init__(self, net):
        if net.dims[0] != net.dims[-1] or len(net.dims) != 3:
            raise InputError(f"autoencoder must be in-code-in, got dims {net.dims}")
        if net.mode is not Mode.NONE:
            raise InputError("autoencoder runs in activation mode NONE")
        self.net = net

    @classmethod
    def create(cls, seed=0, dims=ENCODER_DIMS):
        return cls(init_network(dims, seed))

    @property
    def code_dim(self):
        return self.net.dims[1]

    def to_bytes(self):
        return to_bytes(self.net)

    @classmethod
    def from_bytes(cls, data):
        return cls(from_bytes(data))


def _as_matrix(images, dim):
    xs = np.array([np.asarray(getattr(im, "vector", im), dtype=np.float64).reshape(-1) for im in images])
    if xs.ndim != 2 or xs.shape[1] != dim:
        raise InputError(f"expected images of {dim} pixels, got array of shape {xs.shape}")
    if xs.min() < 0.0 or xs.max() > 1.0:
        raise InputError("pixel values must lie in [0, 1]")
    return xs


def train_encoder(ae, images, epochs=200, cfg=None):
    """Train input -> input; returns the per-epoch MSE."""
    cfg = cfg or TrainConfig(learning_rate=DEFAULT_ENCODER_LR, epochs=epochs)
    cfg = TrainConfig(cfg.learning_rate, epochs, cfg.seed, cfg.shuffle_each_epoch)
    xs = _as_matrix(images, ae.net.dims[0])
    return train(ae.net, [(x, x) for x in xs], cfg)


def encode(ae, image):
    """Hidden-layer code of one image (or flat pixel vector)."""
    return encode_batch(ae, [image])[0]


def encode_batch(ae, images):
    return hidden_batch(ae.net, _as_matrix(images, ae.net.dims[0]), 0)


def reconstruct(ae, images):
    return forward_batch(ae.net, _as_matrix(images, ae.net.dims[0]))


def reconstruction_accuracy(ae, images):
    """100 * (1 - mean absolute pixel error), averaged over images."""
    if len(images) == 0:
        raise InputError("reconstruction accuracy of an empty image list is undefined")
    xs = _as_matrix(images, ae.net.dims[0])
    return accuracy_from_reconstruction(xs, forward_batch(ae.net, xs))


def accuracy_from_reconstruction(originals, reconstructions):
    err = np.abs(np.asarray(originals, dtype=np.float64) - np.asarray(reconstructions, dtype=np.float64))
    return float(100.0 * (1.0 - err.mean()))


def write_codes_csv(ids, codes, path):
    codes = np.asarray(codes)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id"] + [f"c{k}" for k in range(codes.shape[1])])
        for image_id, code in zip(ids, codes):
            w.writerow([image_id] + [repr(float(v)) for v in code])
