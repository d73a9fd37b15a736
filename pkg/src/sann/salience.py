"""One-time salience tagging and the salience response read back at inference.

A tagging event runs one forward pass to capture each node's activation
``alpha``, moves the node's salience towards the neuromodulator level,
optionally scales the node's input weights by ``1 + |S * alpha * theta|``,
and optionally switches the network into a salience-shaped activation mode.
"""

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from sann.errors import InputError
from sann.network import Mode, forward

log = logging.getLogger(__name__)


@dataclass
class SalienceConfig:
    level: float = 1.0  # neuromodulator level N, before intensity scaling
    intensity_factor: float = 1.0
    theta: float = 0.1
    gamma: float = 1.0
    affect_weights: bool = True
    activation_mode: Mode = Mode.NONE
    # Use (1 - S) instead of (1 - |S|) in the salience update; only meaningful for comparison runs.
    literal_update: bool = False

    def __post_init__(self):
        self.activation_mode = Mode.parse(self.activation_mode)
        if not -1.0 <= self.level <= 1.0:
            raise InputError(f"neuromodulator level must lie in [-1, 1], got {self.level}")
        if not (self.intensity_factor >= 0 and math.isfinite(self.intensity_factor)):
            raise InputError(f"intensity factor must be finite and >= 0, got {self.intensity_factor}")
        if not (self.theta >= 0 and math.isfinite(self.theta)):
            raise InputError(f"theta must be finite and >= 0, got {self.theta}")
        if not math.isfinite(self.gamma):
            raise InputError(f"gamma must be finite, got {self.gamma}")

    @property
    def effective_level(self):
        return min(1.0, max(-1.0, self.level * self.intensity_factor))

    def negated(self):
        return SalienceConfig(
            -self.level,
            self.intensity_factor,
            self.theta,
            self.gamma,
            self.affect_weights,
            self.activation_mode,
            self.literal_update,
        )


@dataclass
class TaggingReport:
    layer_of_node: np.ndarray  # 1-based layer number per node
    index_in_layer: np.ndarray
    alpha: np.ndarray
    salience_before: np.ndarray
    salience_after: np.ndarray
    weight_scale: np.ndarray  # factor applied to every input weight of the node (1 when untouched)
    weights_touched: int
    effective_level: float
    label: str = ""

    @property
    def salience_delta(self):
        return self.salience_after - self.salience_before

    def layer_deltas(self):
        """Salience change split per layer, keyed by 1-based layer number."""
        delta = self.salience_delta
        return {int(l): delta[self.layer_of_node == l] for l in np.unique(self.layer_of_node)}


@dataclass(frozen=True)
class SalienceResponse:
    response: float
    desire_to_act: float

    # short aliases
    @property
    def R(self):
        return self.response

    @property
    def D(self):
        return self.desire_to_act


def update_salience(s, alpha, level, literal=False):
    """Move salience towards ``level`` in proportion to activation; result clamped to [-1, 1]."""
    room = 1.0 - s if literal else 1.0 - np.abs(s)
    return np.clip(s + room * alpha * level, -1.0, 1.0)


def tag(net, x, cfg=None, label=""):
    """Apply one tagging event for input ``x`` to ``net`` in place."""
    cfg = cfg or SalienceConfig()
    forward(net, x)
    raw = cfg.level * cfg.intensity_factor
    n_eff = cfg.effective_level
    if n_eff != raw:
        log.info("neuromodulator level %.4g clamped to %.4g", raw, n_eff)

    layer_of_node = np.concatenate([np.full(l.shape[0], k + 1) for k, l in enumerate(net.layers)])
    index_in_layer = np.concatenate([np.arange(l.shape[0]) for l in net.layers])
    alpha = net.activations.copy()
    before = net.salience.copy()
    scale = np.ones_like(alpha)
    touched = 0

    # A zero level leaves the network exactly as it was, including weights of previously tagged nodes.
    if n_eff != 0.0:
        net.salience[:] = update_salience(before, alpha, n_eff, cfg.literal_update)
        if cfg.affect_weights:
            scale = 1.0 + np.abs(net.salience * alpha * cfg.theta)
            for layer, s in zip(net.layers, _split(net, scale)):
                layer.weights *= s[:, None]
                touched += int(np.count_nonzero(s != 1.0)) * layer.shape[1]
        if cfg.activation_mode is not Mode.NONE:
            net.mode = cfg.activation_mode

    return TaggingReport(
        layer_of_node, index_in_layer, alpha, before, net.salience.copy(), scale, touched, n_eff, label
    )


def _split(net, flat):
    out, start = [], 0
    for layer in net.layers:
        stop = start + layer.shape[0]
        out.append(flat[start:stop])
        start = stop
    return out


def tag_sequence(net, events):
    """Apply ``(input, SalienceConfig)`` events in order; later events see earlier effects."""
    return [tag(net, x, cfg, label=str(k)) for k, (x, cfg) in enumerate(events)]


def response(net, x, gamma=1.0):
    """Salience response R = sum(S * alpha) over all non-input nodes, and desire to act gamma * R."""
    forward(net, x)
    r = float(net.salience @ net.activations)
    return SalienceResponse(r, gamma * r)


REPORT_HEADER = ["event", "node_id", "layer", "alpha", "s_before", "s_after", "weight_scale"]


def write_reports_csv(reports, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for k, rep in enumerate(reports):
            event = rep.label or str(k)
            for n in range(rep.alpha.size):
                w.writerow([
                    event,
                    n,
                    int(rep.layer_of_node[n]),
                    repr(float(rep.alpha[n])),
                    repr(float(rep.salience_before[n])),
                    repr(float(rep.salience_after[n])),
                    repr(float(rep.weight_scale[n])),
                ])
