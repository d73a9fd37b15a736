import numpy as np
import pytest

from sann import experiments
from sann.network import init_network


@pytest.fixture(scope="session")
def plan():
    return experiments.ExperimentPlan()


@pytest.fixture(scope="session")
def bench(plan):
    return experiments.prepare(plan)


@pytest.fixture(scope="session")
def training(plan, bench):
    return experiments.run_baseline_endline(plan, bench)


@pytest.fixture
def small_net():
    net = init_network((4, 3, 2), seed=11)
    rng = np.random.default_rng(3)
    for layer in net.layers:
        layer.biases[:] = rng.uniform(-0.5, 0.5, layer.biases.shape)
    return net
