"""Growth policies: step arithmetic, invariants, ranking, and sampling."""

import itertools

import numpy as np
import pytest

from pathgrow.model import make_mlp
from pathgrow.pathscore import score_pass, candidate_scores
from pathgrow.growth import (growth_amount, grow_score_biased,
                             grow_score_deterministic, grow_random,
                             grow_gradient, dense_weight_grads,
                             sample_without_replacement, GrowthError)
from pathgrow.verify import random_masked_mlp

from conftest import all_ones_mlp


def test_growth_amount_basic():
    drho, m = growth_amount(0.05, 0.25, 1000)
    assert drho == pytest.approx(0.0125)
    assert m == 12  # floor(1000 * 0.0125)


def test_growth_amount_cap_clamps():
    drho, m = growth_amount(0.5, 0.5, 1000, cap=0.625)
    assert drho == pytest.approx(0.125)
    assert m == 125


def test_growth_amount_edge_cases():
    assert growth_amount(1.0, 0.25, 100) == (0.0, 0)
    with pytest.raises(GrowthError):
        growth_amount(0.5, 0.0, 100)
    with pytest.raises(GrowthError):
        growth_amount(0.0, 0.25, 100)


def _sparse_net(rng, widths=(6, 5, 4), density=0.4):
    net = make_mlp(list(widths), rng, prunable_last=True)
    for _i, layer in net.weighted_layers():
        layer.mask = (rng.random(layer.mask.shape) < density).astype(np.uint8)
        layer.weight.data *= layer.mask
    return net


@pytest.mark.parametrize("method", ["rg", "pwmpr", "pwmp"])
def test_growth_invariants(method, rng):
    net = _sparse_net(rng)
    before = {i: l.mask.copy() for i, l in net.prunable_layers()}
    nnz_before = net.mask.nnz()
    m = 5
    if method == "rg":
        event = grow_random(net, m, rng)
    elif method == "pwmpr":
        event = grow_score_biased(net, m, rng)
    else:
        event = grow_score_deterministic(net, m)
    assert net.mask.nnz() == nnz_before + m
    assert len(event.edges) == m
    for i, l in net.prunable_layers():
        assert (l.mask >= before[i]).all()  # mask superset
    for layer_idx, flat in event.edges:
        assert net.layers[layer_idx].weight.data.ravel()[flat] == 0.0


def test_grow_requesting_too_many_edges_raises(rng):
    net = all_ones_mlp([2, 2, 1])
    net.layers[2].mask[0, 0] = 0
    with pytest.raises(GrowthError):
        grow_score_deterministic(net, 2)
    with pytest.raises(GrowthError):
        grow_score_biased(net, 2, rng)


def test_deterministic_growth_picks_max_score_subset(rng):
    for _ in range(5):
        net = _sparse_net(rng)
        table = candidate_scores(net, score_pass(net))
        pairs, values = table.flat()
        m = 3
        event = grow_score_deterministic(net, m)
        picked_total = sum(values[pairs.index(e)] for e in
                           [(int(a), int(b)) for a, b in event.edges])
        best = max(sum(c) for c in itertools.combinations(values, m))
        assert picked_total == pytest.approx(best)


def test_deterministic_growth_tie_breaks_by_layer_then_flat():
    net = all_ones_mlp([2, 2, 1])
    net.layers[0].mask[0, 0] = 0
    net.layers[0].mask[1, 1] = 0
    net.layers[0].weight.data *= net.layers[0].mask
    # both candidates score identically by symmetry; lower flat index wins
    event = grow_score_deterministic(net, 1)
    assert event.edges == [(0, 0)]


def test_biased_growth_deterministic_given_rng_state(rng):
    net_a = _sparse_net(np.random.default_rng(3))
    net_b = _sparse_net(np.random.default_rng(3))
    ev_a = grow_score_biased(net_a, 4, np.random.default_rng(11))
    ev_b = grow_score_biased(net_b, 4, np.random.default_rng(11))
    assert ev_a.edges == ev_b.edges


def test_biased_growth_falls_back_to_uniform_on_zero_scores(rng):
    net = _sparse_net(rng)
    for _i, layer in net.weighted_layers():
        layer.weight.data[:] = 0.0
    event = grow_score_biased(net, 3, rng)
    assert event.fallback_uniform
    assert len(event.edges) == 3


def test_sample_without_replacement_properties(rng):
    w = np.array([1.0, 2.0, 3.0, 4.0])
    chosen = sample_without_replacement(w, 4, rng)
    assert sorted(chosen) == [0, 1, 2, 3]  # exhausts the support
    with pytest.raises(GrowthError):
        sample_without_replacement(np.array([1.0, 0.0]), 2, rng)


def test_sample_without_replacement_never_repeats(rng):
    for _ in range(50):
        w = rng.random(8) + 0.01
        m = int(rng.integers(1, 9))
        chosen = sample_without_replacement(w, m, rng)
        assert len(set(chosen.tolist())) == m


def test_gradient_growth_matches_analytic_ranking(rng):
    # single linear layer, so dW = x^T (softmax(z) - onehot) / B exactly
    net = make_mlp([3, 3], rng, prunable_last=True)
    layer = net.layers[0]
    layer.mask[:] = 0
    layer.mask[0, 0] = 1
    layer.weight.data *= layer.mask
    x = rng.normal(size=(4, 3))
    y = np.array([0, 1, 2, 0])
    grads = dense_weight_grads(net, x, y)[0]
    z = x @ (layer.weight.data * layer.mask) + layer.bias.data
    p = np.exp(z - z.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    p[np.arange(4), y] -= 1.0
    ref = x.T @ (p / 4)
    assert np.allclose(grads, ref)
    miss = np.flatnonzero(layer.mask.ravel() == 0)
    event = grow_gradient(net, 2, x, y)
    # the event grew the two largest-|grad| missing entries (pre-growth)
    grown = {flat for _l, flat in event.edges}
    mags = np.abs(ref.ravel())
    expect = set(sorted(miss, key=lambda f: (-mags[f], f))[:2])
    assert grown == expect


def test_growth_event_serialization(rng):
    net = _sparse_net(rng)
    event = grow_random(net, 2, rng, seed=5)
    d = event.to_dict()
    assert d["method"] == "rg"
    assert d["seed"] == 5
    assert all(isinstance(v, int) for e in d["edges"] for v in e)
    assert d["density_after"] > d["density_before"]
