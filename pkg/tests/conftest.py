"""Shared fixtures and tiny-network builders for the test suite."""

import numpy as np
import pytest

from pathgrow.model import make_mlp


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def all_ones_mlp(widths=(2, 2, 1)):
    """Fully-connected MLP with every weight set to 1 and zero biases."""
    net = make_mlp(list(widths), np.random.default_rng(0), prunable_last=True)
    for _idx, layer in net.weighted_layers():
        layer.weight.data[:] = 1.0
        layer.bias.data[:] = 0.0
        layer.mask[:] = 1
    return net


def set_weights(net, per_layer):
    """Assign explicit weight matrices (and full masks) layer by layer."""
    for (_idx, layer), w in zip(net.weighted_layers(), per_layer):
        layer.weight.data[:] = np.asarray(w, dtype=float)
        layer.bias.data[:] = 0.0
        layer.mask[:] = 1
    return net
