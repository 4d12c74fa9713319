"""Initial sparse topologies and the magnitude-pruning baseline.

The walk-based initializer samples input-to-output (and reversed) random
walks over the dense weight draw, picking each next edge with probability
proportional to absolute weight, and keeps the traversed connections
until the requested density is reached.  Weights outside the final mask
are zeroed exactly.
"""

from __future__ import annotations

import numpy as np

from .model import (MaskedNetwork, MaskedLinear, MaskedConv2d,
                    build_architecture, ConfigError)


class InitError(ValueError):
    pass


def _zero_outside_mask(net: MaskedNetwork):
    for _idx, layer in net.weighted_layers():
        layer.weight.data *= layer.mask


def _clear_prunable_masks(net: MaskedNetwork):
    for _idx, layer in net.prunable_layers():
        layer.mask[:] = 0


def init_uniform_random(arch_id, rho_init, rng, **overrides) -> MaskedNetwork:
    """Dense weight draw, then a uniform random mask at the target density."""
    if not 0.0 < rho_init <= 1.0:
        raise InitError(f"rho_init must be in (0,1], got {rho_init}")
    net = build_architecture(arch_id, rng, **overrides)
    _clear_prunable_masks(net)
    n = net.prunable_count()
    m = int(round(n * rho_init))
    chosen = rng.choice(n, size=m, replace=False)
    _set_global_bits(net, chosen)
    _zero_outside_mask(net)
    return net


def init_erk(arch_id, rho_init, rng, **overrides) -> MaskedNetwork:
    """Erdos-Renyi-Kernel layer densities: per-layer budget proportional to
    (fan_in + fan_out + kernel area) / params, rescaled to hit rho_init."""
    if not 0.0 < rho_init <= 1.0:
        raise InitError(f"rho_init must be in (0,1], got {rho_init}")
    net = build_architecture(arch_id, rng, **overrides)
    layers = net.prunable_layers()
    raw = []
    for _idx, layer in layers:
        if isinstance(layer, MaskedLinear):
            raw.append((layer.in_features + layer.out_features)
                       / (layer.in_features * layer.out_features))
        else:
            k = layer.kernel
            raw.append((layer.in_channels + layer.out_channels + 2 * k)
                       / (layer.in_channels * layer.out_channels * k * k))
    sizes = np.array([l.weight.data.size for _i, l in layers], dtype=float)
    raw = np.array(raw)
    scale = rho_init * sizes.sum() / (raw * sizes).sum()
    dens = np.minimum(raw * scale, 1.0)
    # redistribute mass lost to clipping
    for _ in range(10):
        deficit = rho_init * sizes.sum() - (dens * sizes).sum()
        free = dens < 1.0
        if deficit <= 1e-12 or not free.any():
            break
        dens[free] += deficit / sizes[free].sum()
        dens = np.minimum(dens, 1.0)
    for (idx, layer), d in zip(layers, dens):
        layer.mask[:] = 0
        n = layer.weight.data.size
        m = int(round(n * d))
        chosen = rng.choice(n, size=m, replace=False)
        layer.mask.ravel()[chosen] = 1
    _zero_outside_mask(net)
    return net


def _set_global_bits(net, chosen):
    offsets = []
    start = 0
    for idx, layer in net.prunable_layers():
        offsets.append((start, idx, layer))
        start += layer.weight.data.size
    chosen = np.sort(chosen)
    pos = 0
    for start, idx, layer in offsets:
        end = start + layer.weight.data.size
        sel = chosen[(chosen >= start) & (chosen < end)] - start
        layer.mask.ravel()[sel] = 1


def init_phew(arch_id, rho_init, rng, max_walks=None, **overrides) -> MaskedNetwork:
    """Walk-based sparse seed: |weight|-biased random walks in alternating
    forward and backward directions; traversed edges are retained until the
    target density is reached.

    Only all-linear architectures walk at individual-weight granularity;
    conv layers are walked at channel granularity, retaining one kernel
    element (sampled by magnitude) per traversed channel edge.
    """
    if not 0.0 < rho_init <= 1.0:
        raise InitError(f"rho_init must be in (0,1], got {rho_init}")
    net = build_architecture(arch_id, rng, **overrides)
    dense_weights = {idx: layer.weight.data.copy()
                     for idx, layer in net.weighted_layers()}
    _clear_prunable_masks(net)
    n = net.prunable_count()
    target = int(round(n * rho_init))
    walks = 0
    limit = max_walks or 100 * n
    forward = True
    while net.mask.nnz() < target:
        if walks >= limit:
            raise InitError("walk budget exhausted before reaching target density")
        if forward:
            _walk(net, dense_weights, rng, reverse=False)
        else:
            _walk(net, dense_weights, rng, reverse=True)
        forward = not forward
        walks += 1
    _zero_outside_mask(net)
    return net


def _backbone(net):
    """Main-path weighted layers in execution order (skips shortcut convs)."""
    chain = []
    idx = len(net.layers) - 1
    while idx >= 0:
        layer = net.layers[idx]
        if isinstance(layer, (MaskedLinear, MaskedConv2d)):
            chain.append((idx, layer))
        idx = net.predecessors(idx)[0]
    return list(reversed(chain))


def _walk(net, dense_weights, rng, reverse):
    """One biased random walk along the backbone; marks mask bits."""
    wl = _backbone(net)
    order = list(reversed(wl)) if reverse else wl
    node = None
    for idx, layer in order:
        w = dense_weights[idx]
        if isinstance(layer, MaskedLinear):
            aw = np.abs(w)
            if node is None:
                node = int(rng.integers(aw.shape[0] if not reverse else aw.shape[1]))
            probs = aw[node, :] if not reverse else aw[:, node]
            if probs.sum() == 0.0:
                probs = np.ones_like(probs)
            nxt = int(rng.choice(len(probs), p=probs / probs.sum()))
            if layer.prunable:
                if reverse:
                    layer.mask[nxt, node] = 1
                else:
                    layer.mask[node, nxt] = 1
            node = nxt
        else:
            # channel-level walk for convs
            ch_w = np.abs(w).sum(axis=(2, 3))  # (out, in)
            if node is None:
                node = int(rng.integers(ch_w.shape[1] if not reverse else ch_w.shape[0]))
            probs = ch_w[:, node] if not reverse else ch_w[node, :]
            if probs.sum() == 0.0:
                probs = np.ones_like(probs)
            nxt = int(rng.choice(len(probs), p=probs / probs.sum()))
            out_ch, in_ch = (nxt, node) if not reverse else (node, nxt)
            if layer.prunable:
                kern = np.abs(w[out_ch, in_ch]).ravel()
                kp = kern / kern.sum() if kern.sum() > 0 else None
                kidx = int(rng.choice(kern.size, p=kp))
                layer.mask[out_ch, in_ch].flat[kidx] = 1
            node = nxt


INIT_METHODS = {
    "phew": init_phew,
    "uniform-random": init_uniform_random,
    "erk": init_erk,
}


def initialize(method, arch_id, rho_init, rng, **overrides) -> MaskedNetwork:
    if method not in INIT_METHODS:
        raise ConfigError(f"unknown init method {method!r}")
    return INIT_METHODS[method](arch_id, rho_init, rng, **overrides)


def find_min_viable_density(arch_id, rng, densities, method="phew", seeds=1,
                            **overrides):
    """Isolated-node fraction at each candidate density (ascending).

    Returns a list of (density, mean isolated fraction) rows; the caller
    picks the smallest density whose fraction is zero.
    """
    if list(densities) != sorted(densities):
        raise InitError("densities must be sorted ascending")
    rows = []
    for rho in densities:
        fracs = []
        for _ in range(seeds):
            net = initialize(method, arch_id, rho, rng, **overrides)
            fracs.append(net.isolated_node_fraction())
        rows.append((rho, float(np.mean(fracs))))
    return rows


def imp_c_step(net: MaskedNetwork, prune_ratio) -> int:
    """Remove the prune_ratio fraction of smallest-|weight| active prunable
    weights, ranked globally.  Weights are zeroed, not reset; returns the
    number of edges removed.  Magnitude ties prune the lower global index.
    """
    if not 0.0 < prune_ratio < 1.0:
        raise ConfigError(f"prune ratio must be in (0,1), got {prune_ratio}")
    entries = []  # (|w|, global_idx, layer_idx, flat)
    gidx = 0
    for idx, layer in net.prunable_layers():
        w = layer.weight.data.ravel()
        m = layer.mask.ravel()
        active = np.flatnonzero(m)
        for flat in active:
            entries.append((abs(w[flat]), gidx + flat, idx, int(flat)))
        gidx += w.size
    n_remove = int(np.floor(prune_ratio * len(entries)))
    entries.sort(key=lambda e: (e[0], e[1]))
    for _mag, _g, idx, flat in entries[:n_remove]:
        layer = net.layers[idx]
        layer.mask.ravel()[flat] = 0
        layer.weight.data.ravel()[flat] = 0.0
    return n_remove
