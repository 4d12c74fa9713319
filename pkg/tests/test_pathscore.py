"""Path scoring: hand-computed examples, brute-force equivalence, cores."""

import numpy as np
import pytest

from pathgrow.model import make_mlp
from pathgrow.pathscore import (score_pass, candidate_scores, total_pwmp,
                                path_centrality, tau_core, global_tau_core,
                                avg_tau_core_ratio, topology_record,
                                EmptyCoreError)
from pathgrow.oracle import (enum_all_phi_psi, enum_total_pwmp, enum_centrality,
                             enum_candidate_score)
from pathgrow.verify import random_masked_mlp

from conftest import all_ones_mlp, set_weights


def test_all_ones_2_2_1_phi_psi_total():
    net = all_ones_mlp([2, 2, 1])
    scores = score_pass(net)
    # 4 complete paths, each of product 1
    assert scores.total == pytest.approx(4.0)
    assert np.allclose(scores.group_phi[1], [2.0, 2.0])  # hidden complexity
    assert np.allclose(scores.group_psi[1], [1.0, 1.0])  # hidden generality
    assert np.allclose(scores.group_phi[2], [4.0])


def test_all_ones_centrality_values():
    net = all_ones_mlp([2, 2, 1])
    cents = path_centrality(net)
    assert np.allclose(cents[0], [2.0, 2.0])  # inputs: psi
    assert np.allclose(cents[1], [2.0, 2.0])  # hidden: phi*psi
    assert np.allclose(cents[2], [4.0])       # output: phi


def test_weighted_example_total():
    net = make_mlp([2, 2, 1], np.random.default_rng(0), prunable_last=True)
    set_weights(net, [[[1.0, -2.0], [3.0, 0.5]], [[2.0], [-1.0]]])
    # paths: 1*2, -2*-1, 3*2, 0.5*-1 -> |products| 2 + 2 + 6 + 0.5
    assert total_pwmp(net) == pytest.approx(10.5)


def test_missing_edge_score_is_phi_times_psi():
    net = all_ones_mlp([2, 2, 1])
    net.layers[2].mask[0, 0] = 0  # drop hidden0 -> output
    scores = score_pass(net)
    table = candidate_scores(net, scores)
    # phi(hidden0) = 2 (two input edges), psi(output) = 1
    assert table.scores[2][0, 0] == pytest.approx(2.0)
    assert table.n_missing() == 1


def test_present_edges_are_not_candidates():
    net = all_ones_mlp([2, 2, 1])
    table = candidate_scores(net, score_pass(net))
    pairs, values = table.flat()
    assert pairs == [] and values.size == 0


def test_candidate_scores_nonnegative_and_match_oracle(rng):
    for _ in range(10):
        net = random_masked_mlp(rng)
        scores = score_pass(net)
        table = candidate_scores(net, scores)
        wl = [idx for idx, _l in net.weighted_layers()]
        for pos, idx in enumerate(wl):
            s = table.scores[idx]
            assert (s >= 0).all()
            miss = np.argwhere(net.layers[idx].mask == 0)
            for i, j in miss[:3]:
                ref = enum_candidate_score(net, pos, int(i), int(j))
                assert s[i, j] == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_phi_psi_match_enumeration(rng):
    net = random_masked_mlp(rng)
    scores = score_pass(net)
    phi_ref, psi_ref = enum_all_phi_psi(net)
    for g in range(len(phi_ref)):
        assert np.allclose(scores.group_phi[g], phi_ref[g])
        assert np.allclose(scores.group_psi[g], psi_ref[g])
    assert scores.total == pytest.approx(enum_total_pwmp(net))
    for c, ref in zip(path_centrality(net, scores), enum_centrality(net)):
        assert np.allclose(c, ref)


def test_ranking_invariant_under_global_scaling(rng):
    net = random_masked_mlp(rng)
    table = candidate_scores(net, score_pass(net))
    _pairs, before = table.flat()
    for _i, layer in net.weighted_layers():
        layer.weight.data *= 3.0
    table = candidate_scores(net, score_pass(net))
    _pairs, after = table.flat()
    assert np.array_equal(np.argsort(-before, kind="stable"),
                          np.argsort(-after, kind="stable"))


def test_zero_network_scores():
    net = all_ones_mlp([2, 2, 1])
    for _i, layer in net.weighted_layers():
        layer.weight.data[:] = 0.0
    assert total_pwmp(net) == 0.0
    with pytest.raises(EmptyCoreError):
        tau_core(np.concatenate(path_centrality(net)), 0.9)


def test_tau_core_prefix_example():
    nodes, size = tau_core(np.array([5.0, 3.0, 1.0, 1.0]), 0.9)
    assert size == 3
    assert list(nodes) == [0, 1, 2]


def test_tau_core_tie_breaks_to_lower_index():
    nodes, size = tau_core(np.array([1.0, 1.0, 1.0, 1.0]), 0.5)
    assert size == 2
    assert list(nodes) == [0, 1]


def test_tau_core_full_coverage_and_bad_tau():
    _nodes, size = tau_core(np.array([1.0, 1.0]), 1.0)
    assert size == 2
    with pytest.raises(ValueError):
        tau_core(np.array([1.0]), 0.0)
    with pytest.raises(ValueError):
        tau_core(np.array([1.0]), 1.5)


def test_avg_tau_core_ratio_uniform_network():
    net = all_ones_mlp([2, 2, 1])
    # every group's centrality is uniform, so each tau=0.9 core is the
    # whole group and each ratio is 1
    assert avg_tau_core_ratio(net, 0.9) == pytest.approx(1.0)
    assert global_tau_core(net, 0.9) == 5


def test_concentrated_network_has_smaller_core():
    net = all_ones_mlp([4, 4, 1])
    uniform = avg_tau_core_ratio(net, 0.9)
    net.layers[0].mask[:] = 0
    net.layers[0].mask[:, 0] = 1  # all paths through hidden unit 0
    assert avg_tau_core_ratio(net, 0.9) < uniform


def test_topology_record_fields():
    net = all_ones_mlp([2, 2, 1])
    rec = topology_record(net, 0.9)
    assert set(rec) == {"density", "total_pwmp", "global_tau_core",
                        "avg_tau_core_ratio"}
    assert rec["total_pwmp"] == pytest.approx(4.0)


def test_score_pass_does_not_mutate(rng):
    net = random_masked_mlp(rng)
    weights = [l.weight.data.copy() for _i, l in net.weighted_layers()]
    masks = [l.mask.copy() for _i, l in net.weighted_layers()]
    score_pass(net)
    candidate_scores(net, score_pass(net))
    for (_i, l), w, m in zip(net.weighted_layers(), weights, masks):
        assert np.array_equal(l.weight.data, w)
        assert np.array_equal(l.mask, m)
