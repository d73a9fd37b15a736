"""Salience affected neural network: one-shot salience tagging on a small sigmoid classifier."""

__version__ = "0.1.0"

from sann.network import Network, Prediction, TrainConfig, init_network, forward, predict, accuracy, train_epoch
from sann.salience import SalienceConfig, SalienceResponse, tag, tag_sequence, response

__all__ = [
    "Network",
    "Prediction",
    "TrainConfig",
    "init_network",
    "forward",
    "predict",
    "accuracy",
    "train_epoch",
    "SalienceConfig",
    "SalienceResponse",
    "tag",
    "tag_sequence",
    "response",
]
