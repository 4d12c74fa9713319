"""Path-magnitude scoring: complexity/generality passes, candidate edge
scores, total path product, node centrality, and tau-cores.

All functions here are pure over a network snapshot: they read weights,
masks, and batch-norm stats but never mutate them.

The scoring pass runs on the absolute-value network with activations
treated as identity.  Feeding an all-ones input yields, at each node,
the sum of absolute path-weight products from the inputs to that node
(its *complexity* phi).  Backpropagating a unit signal from the summed
final pre-activations yields the symmetric quantity from each node to
the outputs (its *generality* psi).  The score of a missing edge (i, j)
is phi(i) * psi(j); for conv kernels the per-weight score sums the
weight's involvement across all spatial positions, which is exactly the
cross-correlation of the phi map with the psi map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (MaskedNetwork, MaskedLinear, MaskedConv2d, ReLU,
                    MaxPool2d, AvgPool2d, GlobalAvgPool, Flatten,
                    BatchNormLite, ResidualAdd, Reroute, WEIGHTED)
from .tensor import im2col, col2im


class EmptyCoreError(ValueError):
    """tau-core requested on all-zero centralities."""


@dataclass
class PathScores:
    """Complexity/generality fields from one scoring pass.

    ``phi_in``/``phi_out`` and ``psi_in``/``psi_out`` hold per-weighted-layer
    maps (vectors for linear layers, (C,H,W) maps for convs).  ``group_phi``
    and ``group_psi`` are node-level values aligned with net.node_groups():
    for conv groups the map is reduced over spatial positions.
    """
    phi_in: dict = field(default_factory=dict)
    phi_out: dict = field(default_factory=dict)
    psi_in: dict = field(default_factory=dict)
    psi_out: dict = field(default_factory=dict)
    group_phi: list = field(default_factory=list)
    group_psi: list = field(default_factory=list)
    total: float = 0.0


def _weight_fn(kind):
    if kind == "abs":
        return np.abs
    if kind == "square":
        return np.square
    raise ValueError(kind)


def score_pass(net: MaskedNetwork, weight_transform="abs") -> PathScores:
    """Single forward/backward pass over the transformed-weight network.

    ``weight_transform="abs"`` gives the magnitude-product scores;
    ``"square"`` gives the path-kernel trace quantities (used as the
    reference routine for the trace-gain check).
    """
    wt = _weight_fn(weight_transform)
    scores = PathScores()
    layers = net.layers
    n_layers = len(layers)

    # ---- forward: complexity ----------------------------------------
    outputs = [None] * n_layers
    if len(net.input_shape) == 1:
        cur = np.ones((1, net.input_shape[0]))
    else:
        cur = np.ones((1,) + tuple(net.input_shape))
    net_input = cur
    for idx, layer in enumerate(layers):
        if isinstance(layer, MaskedLinear):
            scores.phi_in[idx] = cur[0].copy()
            cur = cur @ (wt(layer.weight.data) * layer.mask)
            scores.phi_out[idx] = cur[0].copy()
        elif isinstance(layer, MaskedConv2d):
            scores.phi_in[idx] = cur[0].copy()
            weff = (wt(layer.weight.data) * layer.mask).reshape(
                layer.out_channels, -1)
            cols, ho, wo = im2col(cur, layer.kernel, layer.kernel,
                                  layer.stride, layer.pad)
            cur = np.einsum("ok,bkl->bol", weff, cols).reshape(
                1, layer.out_channels, ho, wo)
            scores.phi_out[idx] = cur[0].copy()
        elif isinstance(layer, BatchNormLite):
            cur = _scale_channels(cur, wt(layer.path_scale()
                                          if weight_transform == "abs"
                                          else layer.gamma.data
                                          / np.sqrt(layer.running_var + layer.eps)))
        elif isinstance(layer, ResidualAdd):
            cur = cur + outputs[layer.source]
        elif isinstance(layer, Reroute):
            cur = outputs[layer.source]
        elif isinstance(layer, (MaxPool2d, AvgPool2d)):
            # pooling passes the sum of absolute contributions
            b, c, h, w = cur.shape
            k = layer.k
            cur = cur.reshape(b, c, h // k, k, w // k, k).sum(axis=(3, 5))
        elif isinstance(layer, GlobalAvgPool):
            cur = cur.sum(axis=(2, 3))
        elif isinstance(layer, Flatten):
            cur = cur.reshape(1, -1)
        elif isinstance(layer, ReLU):
            pass
        else:
            raise TypeError(f"unsupported layer in scoring pass: {layer!r}")
        outputs[idx] = cur
    scores.total = float(cur.sum())

    # ---- backward: generality ---------------------------------------
    pending = {n_layers - 1: np.ones_like(outputs[-1])}
    psi_input = np.zeros_like(net_input)
    for idx in range(n_layers - 1, -1, -1):
        g = pending.pop(idx, None)
        if g is None:
            continue
        layer = layers[idx]
        if isinstance(layer, MaskedLinear):
            scores.psi_out[idx] = g[0].copy()
            g_in = g @ (wt(layer.weight.data) * layer.mask).T
            scores.psi_in[idx] = g_in[0].copy()
            g = g_in
        elif isinstance(layer, MaskedConv2d):
            scores.psi_out[idx] = g[0].copy()
            weff = (wt(layer.weight.data) * layer.mask).reshape(
                layer.out_channels, -1)
            gmat = g.reshape(1, layer.out_channels, -1)
            dcols = np.einsum("ok,bol->bkl", weff, gmat)
            in_shape = (1,) + tuple(_input_shape_of(net, idx))
            g = col2im(dcols, in_shape, layer.kernel, layer.kernel,
                       layer.stride, layer.pad)
            scores.psi_in[idx] = g[0].copy()
        elif isinstance(layer, BatchNormLite):
            sc = (layer.path_scale() if weight_transform == "abs"
                  else wt(layer.gamma.data / np.sqrt(layer.running_var + layer.eps)))
            g = _scale_channels(g, sc)
        elif isinstance(layer, ResidualAdd):
            _accumulate(pending, layer.source, g)
        elif isinstance(layer, Reroute):
            _accumulate(pending, layer.source, g)
            continue  # does not consume idx-1
        elif isinstance(layer, (MaxPool2d, AvgPool2d)):
            k = layer.k
            g = np.repeat(np.repeat(g, k, axis=2), k, axis=3)
        elif isinstance(layer, GlobalAvgPool):
            c, h, w = _input_shape_of(net, idx)
            g = np.broadcast_to(g.reshape(1, c, 1, 1), (1, c, h, w)).copy()
        elif isinstance(layer, Flatten):
            g = g.reshape((1,) + tuple(_input_shape_of(net, idx)))
        if idx == 0:
            psi_input += g
        else:
            _accumulate(pending, idx - 1, g)

    # ---- node-level reductions --------------------------------------
    scores.group_phi = [_reduce_nodes(net_input[0], kind="phi")]
    scores.group_psi = [_reduce_nodes(psi_input[0], kind="psi")]
    for idx, _layer in net.weighted_layers():
        scores.group_phi.append(_reduce_nodes(scores.phi_out[idx], kind="phi"))
        scores.group_psi.append(_reduce_nodes(scores.psi_out[idx], kind="psi"))
    return scores


def _input_shape_of(net, idx):
    preds = net.predecessors(idx)
    if preds[0] == -1:
        return net.input_shape
    return net.layer_shapes[preds[0]]


def _scale_channels(x, scale):
    if x.ndim == 4:
        return x * scale[None, :, None, None]
    return x * scale


def _accumulate(pending, idx, g):
    if idx in pending:
        pending[idx] = pending[idx] + g
    else:
        pending[idx] = g


def _reduce_nodes(arr, kind):
    """Collapse a map to node granularity: feature maps sum over space."""
    if arr.ndim == 1:
        return arr.copy()
    return arr.sum(axis=(1, 2))


# ---------------------------------------------------------------------------
# Candidate scores
# ---------------------------------------------------------------------------

@dataclass
class CandidateTable:
    """Per prunable layer: score array congruent to the weight tensor and a
    boolean array marking missing (growable) entries.  Present-edge entries
    are zeroed and excluded by the missing mask."""
    layers: list          # layer indices
    scores: dict          # idx -> ndarray, weight-shaped
    missing: dict         # idx -> bool ndarray

    def flat(self):
        """Concatenate missing-entry scores; returns (pairs, values) where
        pairs is a list of (layer_idx, flat_weight_idx)."""
        pairs = []
        vals = []
        for idx in self.layers:
            miss = self.missing[idx].ravel()
            flat_ids = np.flatnonzero(miss)
            pairs.extend((idx, int(f)) for f in flat_ids)
            vals.append(self.scores[idx].ravel()[flat_ids])
        values = np.concatenate(vals) if vals else np.array([])
        return pairs, values

    def n_missing(self):
        return sum(int(self.missing[idx].sum()) for idx in self.layers)


def candidate_scores(net: MaskedNetwork, scores: PathScores) -> CandidateTable:
    """Score every missing edge inside prunable layers as phi(i)*psi(j)."""
    table = CandidateTable(layers=[], scores={}, missing={})
    for idx, layer in net.prunable_layers():
        if isinstance(layer, MaskedLinear):
            s = np.outer(scores.phi_in[idx], scores.psi_out[idx])
        else:
            phi = scores.phi_in[idx][None]   # (1,C,H,W)
            psi = scores.psi_out[idx]        # (O,Ho,Wo)
            cols, ho, wo = im2col(phi, layer.kernel, layer.kernel,
                                  layer.stride, layer.pad)
            psi_mat = psi.reshape(1, layer.out_channels, ho * wo)
            s = np.einsum("bol,bkl->ok", psi_mat, cols).reshape(layer.weight.shape)
        miss = layer.mask == 0
        s = np.where(miss, s, 0.0)
        table.layers.append(idx)
        table.scores[idx] = s
        table.missing[idx] = miss
    return table


def total_pwmp(net: MaskedNetwork) -> float:
    """Sum over all input-to-output paths of the absolute weight product."""
    return score_pass(net).total


def path_centrality(net: MaskedNetwork, scores: PathScores | None = None):
    """Per-node total absolute path product over paths through the node.

    Returns a list of arrays aligned with net.node_groups().  For hidden
    nodes this is phi*psi (spatially summed for feature maps); input nodes
    use psi alone and output nodes phi alone.
    """
    if scores is None:
        scores = score_pass(net)
    groups = net.node_groups()
    cents = []
    # input group: phi == 1 per input unit/pixel, so C = sum of psi
    cents.append(scores.group_psi[0])
    for gi, g in enumerate(groups[1:], start=1):
        idx = int(g.name[len("layer"):])
        phi_map = scores.phi_out[idx]
        psi_map = scores.psi_out[idx]
        if g.kind == "output":
            cents.append(_reduce_nodes(phi_map, "phi"))
        else:
            prod = phi_map * psi_map
            cents.append(_reduce_nodes(prod, "c"))
    return cents


def tau_core(centralities, tau):
    """Smallest prefix of descending-centrality nodes covering tau of the total.

    ``centralities`` is a 1-D array; returns (node_indices, size).  Ties
    break toward lower node index (stable sort).
    """
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must be in (0,1], got {tau}")
    c = np.asarray(centralities, dtype=float)
    total = c.sum()
    if total <= 0.0:
        raise EmptyCoreError("all centralities are zero")
    order = np.argsort(-c, kind="stable")
    csum = np.cumsum(c[order])
    target = tau * total
    size = int(np.searchsorted(csum, target * (1.0 - 1e-12))) + 1
    return order[:size], size


def global_tau_core(net: MaskedNetwork, tau, scores: PathScores | None = None):
    cents = path_centrality(net, scores)
    _, size = tau_core(np.concatenate(cents), tau)
    return size


def avg_tau_core_ratio(net: MaskedNetwork, tau, scores: PathScores | None = None):
    """Mean over node groups of (group tau-core size / group width).

    Groups with all-zero centrality contribute 0.
    """
    cents = path_centrality(net, scores)
    ratios = []
    for c in cents:
        if c.sum() <= 0.0:
            ratios.append(0.0)
        else:
            _, size = tau_core(c, tau)
            ratios.append(size / len(c))
    return float(np.mean(ratios))


def topology_record(net: MaskedNetwork, tau=0.9):
    """One growth-step topology report row."""
    scores = score_pass(net)
    return {
        "density": net.density(),
        "total_pwmp": scores.total,
        "global_tau_core": global_tau_core(net, tau, scores),
        "avg_tau_core_ratio": avg_tau_core_ratio(net, tau, scores),
    }
