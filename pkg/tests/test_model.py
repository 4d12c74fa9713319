"""Network construction, masks, density bookkeeping, and node accounting."""

import numpy as np
import pytest

from pathgrow.model import (MaskedNetwork, MaskedLinear, make_mlp, make_resnet,
                            build_architecture, prunable_scope, ConfigError)
from pathgrow.tensor import Tensor, Tape

from conftest import all_ones_mlp


def test_make_mlp_structure(rng):
    net = make_mlp([784, 128, 128, 10], rng)
    wl = net.weighted_layers()
    assert len(wl) == 3
    assert not wl[-1][1].prunable  # readout stays dense by default
    assert net.prunable_count() == 784 * 128 + 128 * 128


def test_density_counts_prunable_only(rng):
    net = make_mlp([4, 3, 2], rng)
    net.layers[0].mask[:] = 0
    net.layers[0].mask[0, 0] = 1
    assert net.density() == pytest.approx(1 / 12)
    # masking the non-prunable readout must not change the density
    assert net.mask.total() == 12


def test_forward_shapes_mlp(rng):
    net = make_mlp([6, 5, 3], rng)
    tape = Tape()
    out = net.forward(tape, Tensor(rng.normal(size=(7, 6))))
    assert out.data.shape == (7, 3)


def test_build_architecture_parsing(rng):
    net = build_architecture("mlp-784-128-128-10", rng)
    assert [l.out_features for _i, l in net.weighted_layers()] == [128, 128, 10]
    with pytest.raises(ConfigError):
        build_architecture("transformer-12", rng)
    with pytest.raises(ConfigError):
        build_architecture("resnet-21", rng)  # not 6n+2


def test_resnet_sizes_and_forward(rng):
    net = make_resnet(20, rng)
    tape = Tape()
    out = net.forward(tape, Tensor(rng.normal(size=(2, 3, 32, 32))))
    assert out.data.shape == (2, 10)
    # projection shortcuts and readout are excluded from the prunable pool
    assert net.prunable_count() == 267696
    net32 = make_resnet(32, rng)
    assert net32.prunable_count() == 461232  # the ~460K-weight configuration


def test_resnet_density_target_hits_within_one_edge(rng):
    from pathgrow.seedinit import init_uniform_random
    net = init_uniform_random("resnet-32", 0.05, rng)
    n = net.prunable_count()
    assert abs(net.density() - 0.05) <= 1.0 / n


def test_node_groups_and_degrees(rng):
    net = make_mlp([3, 2, 2], rng, prunable_last=True)
    groups = net.node_groups()
    assert [g.size for g in groups] == [3, 2, 2]
    assert [g.kind for g in groups] == ["input", "hidden", "output"]
    net.layers[0].mask[:] = [[1, 0], [1, 1], [0, 0]]
    net.layers[2].mask[:] = [[1, 1], [0, 1]]
    _groups, in_deg, out_deg = net.channel_degrees()
    assert list(out_deg[0]) == [1, 2, 0]
    assert list(in_deg[1]) == [2, 1]
    assert list(out_deg[1]) == [2, 1]
    assert list(in_deg[2]) == [1, 2]


def test_isolated_node_fraction(rng):
    net = make_mlp([2, 2, 2], rng, prunable_last=True)
    net.layers[0].mask[:] = [[1, 0], [1, 0]]  # hidden unit 1 has no input
    net.layers[2].mask[:] = [[1, 1], [1, 1]]
    # hidden node 1 lacks incoming edges -> isolated; all others fine
    assert net.isolated_node_fraction() == pytest.approx(1 / 6)


def test_prunable_scope_override(rng):
    net = make_mlp([4, 3, 2], rng)
    flags = prunable_scope(net)
    assert flags == {0: True, 2: False}
    flags = prunable_scope(net, override={2: True})
    assert flags[2] is True and net.layers[2].prunable
    with pytest.raises(ConfigError):
        prunable_scope(net, override={1: False})  # ReLU is not weighted


def test_single_layer_network(rng):
    layer = MaskedLinear(3, 2, rng, prunable=True)
    net = MaskedNetwork([layer], "tiny", (3,))
    tape = Tape()
    out = net.forward(tape, Tensor(np.ones((1, 3))))
    assert out.data.shape == (1, 2)
    assert net.prunable_count() == 6


def test_all_ones_fixture_density():
    net = all_ones_mlp()
    assert net.density() == 1.0
    assert net.prunable_count() == 6
