"""Brute-force reference routines for path-score verification.

Everything here enumerates paths explicitly, one at a time, with no
dynamic programming, so it stays independent of the single-pass scoring
implementation it is used to check.  Only viable for tiny networks.
"""

from __future__ import annotations

import numpy as np

from .model import MaskedNetwork, MaskedLinear, MaskedConv2d
from .tensor import conv_out_shape


def mlp_edge_layers(net: MaskedNetwork):
    """Effective |weight| matrices and masks of an all-linear network."""
    mats = []
    masks = []
    for _idx, layer in net.weighted_layers():
        if not isinstance(layer, MaskedLinear):
            raise TypeError("enumeration oracle handles all-linear networks only")
        mats.append(np.abs(layer.weight.data))
        masks.append(layer.mask.astype(bool))
    return mats, masks


def _paths_to(mats, masks, g, v):
    """Yield the weight product of every path from any input to node (g, v)."""
    if g == 0:
        yield 1.0
        return
    a = mats[g - 1]
    m = masks[g - 1]
    for u in range(a.shape[0]):
        if m[u, v]:
            for prod in _paths_to(mats, masks, g - 1, u):
                yield prod * a[u, v]


def _paths_from(mats, masks, g, v):
    """Yield the weight product of every path from node (g, v) to any output."""
    if g == len(mats):
        yield 1.0
        return
    a = mats[g]
    m = masks[g]
    for w in range(a.shape[1]):
        if m[v, w]:
            for prod in _paths_from(mats, masks, g + 1, w):
                yield prod * a[v, w]


def enum_phi(net, g, v):
    mats, masks = mlp_edge_layers(net)
    return sum(_paths_to(mats, masks, g, v))


def enum_psi(net, g, v):
    mats, masks = mlp_edge_layers(net)
    return sum(_paths_from(mats, masks, g, v))


def enum_all_phi_psi(net):
    """phi and psi for every node, as lists of arrays per node group."""
    mats, masks = mlp_edge_layers(net)
    widths = [mats[0].shape[0]] + [a.shape[1] for a in mats]
    phi = [np.array([sum(_paths_to(mats, masks, g, v)) for v in range(w)])
           for g, w in enumerate(widths)]
    psi = [np.array([sum(_paths_from(mats, masks, g, v)) for v in range(w)])
           for g, w in enumerate(widths)]
    return phi, psi


def enum_complete_paths(net):
    """Yield (node_list, product) for every complete input-to-output path."""
    mats, masks = mlp_edge_layers(net)

    def walk(g, v, nodes, prod):
        if g == len(mats):
            yield nodes, prod
            return
        a, m = mats[g], masks[g]
        for w in range(a.shape[1]):
            if m[v, w]:
                yield from walk(g + 1, w, nodes + [(g + 1, w)], prod * a[v, w])

    for s in range(mats[0].shape[0]):
        yield from walk(0, s, [(0, s)], 1.0)


def enum_total_pwmp(net):
    return sum(prod for _nodes, prod in enum_complete_paths(net))


def enum_centrality(net):
    """C(v) per node by accumulating complete-path products node by node."""
    mats, masks = mlp_edge_layers(net)
    widths = [mats[0].shape[0]] + [a.shape[1] for a in mats]
    cents = [np.zeros(w) for w in widths]
    for nodes, prod in enum_complete_paths(net):
        for g, v in nodes:
            cents[g][v] += prod
    return cents


def enum_candidate_score(net, layer_pos, i, j, power=1):
    """Score of the missing edge (i, j) in edge-layer ``layer_pos``.

    Sums, over all paths that would contain the edge, the product of the
    other edges' weights raised to ``power`` (1 gives the magnitude score,
    2 gives the path-kernel trace gain).
    """
    mats, masks = mlp_edge_layers(net)
    if power == 2:
        mats = [a ** 2 for a in mats]
    prefixes = list(_paths_to(mats, masks, layer_pos, i))
    suffixes = list(_paths_from(mats, masks, layer_pos + 1, j))
    return sum(p * s for p in prefixes for s in suffixes)


def enum_delta_trace(net, layer_pos, i, j):
    """Path-kernel trace increase from adding edge (i, j) with zero init."""
    return enum_candidate_score(net, layer_pos, i, j, power=2)


# ---------------------------------------------------------------------------
# Conv unrolling oracle
# ---------------------------------------------------------------------------

def unroll_conv(layer: MaskedConv2d, in_shape):
    """im2col-unrolled masked-linear equivalent of one conv layer.

    Returns (weight, mask, share) where weight/mask are (Cin*H*W, Cout*Ho*Wo)
    arrays and share holds, per connection, the flat kernel-element index it
    is tied to (-1 where no structural connection exists).
    """
    cin, h, w = in_shape
    kh = kw = layer.kernel
    stride, pad = layer.stride, layer.pad
    ho, wo = conv_out_shape(h, w, kh, kw, stride, pad)
    n_in = cin * h * w
    n_out = layer.out_channels * ho * wo
    weight = np.zeros((n_in, n_out))
    mask = np.zeros((n_in, n_out), dtype=np.uint8)
    share = -np.ones((n_in, n_out), dtype=np.int64)
    for o in range(layer.out_channels):
        for i in range(ho):
            for j in range(wo):
                out_flat = (o * ho + i) * wo + j
                for m in range(kh):
                    for n in range(kw):
                        r = i * stride + m - pad
                        c = j * stride + n - pad
                        if not (0 <= r < h and 0 <= c < w):
                            continue
                        for ch in range(cin):
                            in_flat = (ch * h + r) * w + c
                            kidx = ((o * cin + ch) * kh + m) * kw + n
                            weight[in_flat, out_flat] = layer.weight.data[o, ch, m, n]
                            mask[in_flat, out_flat] = layer.mask[o, ch, m, n]
                            share[in_flat, out_flat] = kidx
    return weight, mask, share


def conv_scores_by_unrolling(layer: MaskedConv2d, in_shape):
    """phi map, psi map, and per-kernel-element candidate scores of a single
    conv layer, computed on its unrolled masked-linear equivalent with the
    weight-sharing sums applied."""
    cin, h, w = in_shape
    weight, mask, share = unroll_conv(layer, in_shape)
    a = np.abs(weight) * mask
    phi_in = np.ones(a.shape[0])
    phi_out = phi_in @ a
    psi_out = np.ones(a.shape[1])
    psi_in = a @ psi_out
    # candidate score of kernel element k: sum of phi_in*psi_out over every
    # structural position tied to k
    n_kernel = layer.weight.data.size
    scores = np.zeros(n_kernel)
    pos_in, pos_out = np.nonzero(share >= 0)
    for r, c in zip(pos_in, pos_out):
        scores[share[r, c]] += phi_in[r] * psi_out[c]
    scores = scores.reshape(layer.weight.shape)
    scores = np.where(layer.mask == 0, scores, 0.0)
    ho, wo = conv_out_shape(h, w, layer.kernel, layer.kernel,
                            layer.stride, layer.pad)
    return (phi_out.reshape(layer.out_channels, ho, wo),
            psi_in.reshape(cin, h, w),
            scores)
