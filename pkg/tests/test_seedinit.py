"""Seed topologies (random, ERK, walk-based) and the magnitude-pruning step."""

import numpy as np
import pytest

from pathgrow.model import ConfigError, make_mlp
from pathgrow.pathscore import score_pass
from pathgrow.seedinit import (initialize, init_uniform_random, init_erk,
                               init_phew, find_min_viable_density,
                               imp_c_step, InitError)


def test_uniform_random_exact_density(rng):
    net = init_uniform_random("mlp-20-10-5", 0.3, rng)
    n = net.prunable_count()
    assert net.mask.nnz() == round(n * 0.3)
    # weights outside the mask are exactly zero
    for _i, layer in net.prunable_layers():
        assert np.all(layer.weight.data[layer.mask == 0] == 0.0)


def test_uniform_random_rejects_bad_density(rng):
    with pytest.raises(InitError):
        init_uniform_random("mlp-4-3", 0.0, rng)
    with pytest.raises(InitError):
        init_uniform_random("mlp-4-3", 1.5, rng)


def test_erk_hits_target_and_respects_bounds(rng):
    net = init_erk("mlp-100-50-20", 0.2, rng)
    n = net.prunable_count()
    assert abs(net.mask.nnz() - 0.2 * n) <= len(net.prunable_layers()) + 1
    for _i, layer in net.prunable_layers():
        assert layer.mask.sum() <= layer.mask.size


def test_phew_reaches_density(rng):
    net = init_phew("mlp-10-8-6", 0.3, rng)
    n = net.prunable_count()
    target = round(n * 0.3)
    # walks overshoot by at most one edge per traversed layer
    assert target <= net.mask.nnz() <= target + len(net.weighted_layers())


def test_phew_edges_lie_on_complete_paths(rng):
    # every retained edge was traversed by a full input-to-output walk, so
    # both of its endpoints must carry positive complexity and generality
    net = init_phew("mlp-8-6-4", 0.25, rng, prunable_last=True)
    for _i, layer in net.weighted_layers():
        layer.weight.data = layer.mask.astype(float).copy()
    scores = score_pass(net)
    for idx, layer in net.weighted_layers():
        rows, cols = np.nonzero(layer.mask)
        assert (scores.phi_in[idx][rows] > 0).all()
        assert (scores.psi_out[idx][cols] > 0).all()


def test_phew_full_density_is_dense(rng):
    net = init_phew("mlp-4-3-2", 1.0, rng)
    assert net.density() == 1.0


def test_initialize_dispatch(rng):
    net = initialize("uniform-random", "mlp-6-4-2", 0.5, rng)
    assert net.density() == pytest.approx(0.5)
    with pytest.raises(ConfigError):
        initialize("lottery", "mlp-6-4-2", 0.5, rng)


def test_find_min_viable_density_rows(rng):
    rows = find_min_viable_density("mlp-10-8-6", rng, [0.05, 0.3, 0.9],
                                   method="uniform-random", seeds=2)
    assert [r[0] for r in rows] == [0.05, 0.3, 0.9]
    assert all(0.0 <= r[1] <= 1.0 for r in rows)
    # denser seeds cannot be more disconnected on average than the sparsest
    assert rows[-1][1] <= rows[0][1]
    with pytest.raises(InitError):
        find_min_viable_density("mlp-10-8-6", rng, [0.9, 0.1])


def test_imp_c_removes_smallest_magnitude(rng):
    net = make_mlp([5, 1], rng, prunable_last=True)
    layer = net.layers[0]
    layer.weight.data[:, 0] = [0.1, -0.5, 2.0, -0.05, 0.3]
    removed = imp_c_step(net, 0.2)
    assert removed == 1  # floor(0.2 * 5)
    assert layer.mask[3, 0] == 0  # |-0.05| is the smallest
    assert layer.weight.data[3, 0] == 0.0
    assert layer.mask.sum() == 4


def test_imp_c_tie_breaks_to_lower_global_index(rng):
    net = make_mlp([5, 1], rng, prunable_last=True)
    layer = net.layers[0]
    layer.weight.data[:, 0] = [0.1, -0.1, 0.2, 0.3, 0.4]
    imp_c_step(net, 0.2)
    assert layer.mask[0, 0] == 0 and layer.mask[1, 0] == 1


def test_imp_c_does_not_reset_surviving_weights(rng):
    net = make_mlp([6, 4], rng, prunable_last=True)
    before = net.layers[0].weight.data.copy()
    imp_c_step(net, 0.25)
    layer = net.layers[0]
    assert np.array_equal(layer.weight.data[layer.mask == 1],
                          before[layer.mask == 1])


def test_imp_c_mask_subset_and_ratio_validation(rng):
    net = make_mlp([8, 6, 4], rng, prunable_last=True)
    before = {i: l.mask.copy() for i, l in net.prunable_layers()}
    imp_c_step(net, 0.2)
    for i, l in net.prunable_layers():
        assert (l.mask <= before[i]).all()
    with pytest.raises(ConfigError):
        imp_c_step(net, 0.0)
    with pytest.raises(ConfigError):
        imp_c_step(net, 1.0)
