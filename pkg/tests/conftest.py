"""Shared fixtures and random-instance helpers for the test suite."""

import numpy as np
import pytest

from dlsched.cli import bundled_config
from dlsched.net_model import load_network
from dlsched.packet_dp import PriceVector


@pytest.fixture(scope="session")
def relay3():
    """The bundled three-flow relay network (read-only across tests)."""
    return load_network(bundled_config("relay3.json"))


def random_instance(rng, max_hops=3, max_deadline=5, p_lo=0.05):
    """A random single-flow packet-DP instance: (route, alpha, prices, D)."""
    L = int(rng.integers(1, max_hops + 1))
    D = int(rng.integers(L, max_deadline + 1))
    route = [(i, i, float(rng.uniform(p_lo, 1.0))) for i in range(L)]
    prices = PriceVector(rng.uniform(0.0, 1.0, size=L))
    alpha = float(rng.uniform(0.1, 2.0))
    return route, alpha, prices, D


def single_link(p):
    return [(0, 0, p)]


def make_weights(spec):
    return [f.weight for f in spec.flows]


def combined_se(a, b):
    return float(np.sqrt(a * a + b * b))
