"""Edge-addition policies: score-biased random growth, deterministic
top-score growth, uniform random growth, and gradient-magnitude growth.

Every policy adds exactly M previously-absent edges inside prunable
layers, initializes the new weights to zero, and returns a GrowthEvent
recording the edges for reproducibility.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .model import MaskedNetwork, MaskedLinear
from .pathscore import score_pass, candidate_scores
from .tensor import Tensor, Tape


class GrowthError(ValueError):
    pass


@dataclass
class GrowthEvent:
    method: str
    density_before: float
    density_after: float
    edges: list = field(default_factory=list)  # (layer_idx, flat_weight_idx)
    seed: int | None = None
    fallback_uniform: bool = False
    scoring_seconds: float = 0.0
    scoring_flops: float = 0.0

    def to_dict(self):
        d = asdict(self)
        d["edges"] = [[int(a), int(b)] for a, b in self.edges]
        return d


def growth_amount(rho_current, gamma, n_prunable, cap=None):
    """Density increment and edge count for one growth step.

    Delta-rho is a fixed fraction gamma of the current density, clamped so
    the post-growth density never exceeds ``cap``.
    """
    if gamma <= 0:
        raise GrowthError(f"growth ratio must be positive, got {gamma}")
    if rho_current <= 0:
        raise GrowthError("cannot grow a network with zero density")
    if rho_current >= 1:
        return 0.0, 0
    drho = gamma * rho_current
    if cap is not None and rho_current + drho > cap:
        drho = max(cap - rho_current, 0.0)
    m = int(np.floor(n_prunable * drho))
    return drho, m


def _apply_edges(net: MaskedNetwork, pairs):
    """Set mask bits and zero the weights for the chosen (layer, flat) pairs."""
    for layer_idx, flat in pairs:
        layer = net.layers[layer_idx]
        mask = layer.mask.ravel()
        if mask[flat]:
            raise GrowthError(f"edge ({layer_idx}, {flat}) already present")
        mask[flat] = 1
        layer.weight.data.ravel()[flat] = 0.0


def sample_without_replacement(weights, m, rng):
    """Draw m distinct indices, each draw proportional to the remaining
    weights (iterative draw-and-renormalize; exact sequential scheme)."""
    w = np.asarray(weights, dtype=float).copy()
    if m > np.count_nonzero(w):
        raise GrowthError("not enough positive-weight candidates to sample")
    chosen = np.empty(m, dtype=np.int64)
    for t in range(m):
        csum = np.cumsum(w)
        u = rng.random() * csum[-1]
        idx = int(np.searchsorted(csum, u, side="right"))
        idx = min(idx, len(w) - 1)
        while w[idx] == 0.0:  # guard against float round-off at boundaries
            idx -= 1
        chosen[t] = idx
        w[idx] = 0.0
    return chosen


def grow_score_biased(net: MaskedNetwork, m, rng, seed=None) -> GrowthEvent:
    """Sample m missing edges with probability proportional to their
    path-magnitude score, without replacement, over the global table.

    Falls back to uniform random growth when every candidate scores zero.
    """
    rho_before = net.density()
    t0 = time.perf_counter()
    scores = score_pass(net)
    table = candidate_scores(net, scores)
    scoring_seconds = time.perf_counter() - t0
    pairs, values = table.flat()
    if m > len(pairs):
        raise GrowthError(f"requested {m} edges but only {len(pairs)} missing")
    fallback = False
    if values.sum() <= 0.0:
        fallback = True
        chosen = rng.choice(len(pairs), size=m, replace=False)
    else:
        if np.count_nonzero(values) < m:
            # not enough positively-scored candidates; top up uniformly
            fallback = True
            pos = np.flatnonzero(values)
            zero = np.flatnonzero(values == 0)
            extra = rng.choice(zero, size=m - len(pos), replace=False)
            chosen = np.concatenate([pos, extra])
        else:
            chosen = sample_without_replacement(values, m, rng)
    picked = [pairs[i] for i in chosen]
    _apply_edges(net, picked)
    return GrowthEvent("pwmpr", rho_before, net.density(), picked, seed=seed,
                      fallback_uniform=fallback, scoring_seconds=scoring_seconds)


def grow_score_deterministic(net: MaskedNetwork, m) -> GrowthEvent:
    """Add the m top-scored missing edges; ties break by (layer, flat index)."""
    rho_before = net.density()
    scores = score_pass(net)
    table = candidate_scores(net, scores)
    pairs, values = table.flat()
    if m > len(pairs):
        raise GrowthError(f"requested {m} edges but only {len(pairs)} missing")
    # pairs are generated in (layer, flat) order; stable sort keeps that
    # order among equal scores
    order = np.argsort(-values, kind="stable")[:m]
    picked = [pairs[i] for i in order]
    _apply_edges(net, picked)
    return GrowthEvent("pwmp", rho_before, net.density(), picked)


def grow_random(net: MaskedNetwork, m, rng, seed=None) -> GrowthEvent:
    """Uniform sample without replacement over missing prunable edges."""
    rho_before = net.density()
    pairs = []
    for idx, layer in net.prunable_layers():
        for flat in np.flatnonzero(layer.mask.ravel() == 0):
            pairs.append((idx, int(flat)))
    if m > len(pairs):
        m = len(pairs)
    chosen = rng.choice(len(pairs), size=m, replace=False)
    picked = [pairs[i] for i in chosen]
    _apply_edges(net, picked)
    return GrowthEvent("rg", rho_before, net.density(), picked, seed=seed)


def dense_weight_grads(net: MaskedNetwork, batch_x, batch_y):
    """Gradient of the batch loss w.r.t. every weight entry, present or
    missing, treating missing connections as zero-weight connections.

    Materialized layer by layer from retained activations and
    pre-activation gradients.
    """
    tape = Tape()
    x = Tensor(batch_x)
    logits = net.forward(tape, x, retain=True)
    loss = tape.softmax_cross_entropy(logits, batch_y)
    tape.backward(loss)
    grads = {}
    for idx, layer in net.prunable_layers():
        xin = net._last_inputs[idx]
        # pre-activation tensor is the masked matmul/conv output before bias;
        # bias add passes gradients through unchanged, so read the biased
        # output's gradient
        gout = net._last_preacts[idx].grad
        if isinstance(layer, MaskedLinear):
            grads[idx] = xin.data.T @ gout
        else:
            from .tensor import im2col
            cols, ho, wo = im2col(xin.data, layer.kernel, layer.kernel,
                                  layer.stride, layer.pad)
            gmat = gout.reshape(gout.shape[0], layer.out_channels, ho * wo)
            grads[idx] = np.einsum("bol,bkl->ok", gmat, cols).reshape(
                layer.weight.shape)
    return grads


def grow_gradient(net: MaskedNetwork, m, batch_x, batch_y) -> GrowthEvent:
    """Add the m missing edges with the largest gradient magnitude."""
    rho_before = net.density()
    grads = dense_weight_grads(net, batch_x, batch_y)
    pairs = []
    vals = []
    for idx, layer in net.prunable_layers():
        miss = np.flatnonzero(layer.mask.ravel() == 0)
        pairs.extend((idx, int(f)) for f in miss)
        vals.append(np.abs(grads[idx].ravel()[miss]))
    values = np.concatenate(vals) if vals else np.array([])
    if m > len(pairs):
        raise GrowthError(f"requested {m} edges but only {len(pairs)} missing")
    order = np.argsort(-values, kind="stable")[:m]
    picked = [pairs[i] for i in order]
    _apply_edges(net, picked)
    return GrowthEvent("gg", rho_before, net.density(), picked)
