"""Self-check suites comparing the fast implementations against
brute-force references: path enumeration, conv unrolling, trace-gain
surrogacy, sampling statistics, finite-difference gradients, and
stopping-rule recovery.  Each suite returns (name, passed, detail)."""

from __future__ import annotations

import numpy as np
from scipy import stats

from .growth import sample_without_replacement
from .model import make_mlp, MaskedConv2d, MaskedNetwork, Reroute
from .oracle import (enum_all_phi_psi, enum_total_pwmp, enum_centrality,
                     enum_candidate_score, enum_delta_trace,
                     conv_scores_by_unrolling)
from .pathscore import score_pass, candidate_scores, path_centrality
from .stopping import DensityTrace, fit_logistic, saturating_curve, plateau_density
from .tensor import Tensor, Tape

REL_TOL = 1e-9


def random_masked_mlp(rng, max_hidden_layers=3, max_width=6, min_density=0.3,
                      prunable_last=True):
    """Random tiny masked MLP: weights U(-1,1), per-layer mask density
    drawn from U(min_density, 1)."""
    n_weight_layers = int(rng.integers(2, max_hidden_layers + 2))
    widths = [int(rng.integers(2, max_width + 1))
              for _ in range(n_weight_layers + 1)]
    net = make_mlp(widths, rng, prunable_last=prunable_last)
    for _idx, layer in net.weighted_layers():
        layer.weight.data = rng.uniform(-1, 1, layer.weight.shape)
        dens = rng.uniform(min_density, 1.0)
        layer.mask = (rng.random(layer.mask.shape) < dens).astype(np.uint8)
        layer.weight.data *= layer.mask
        # nonzero biases keep dead neurons off the exact ReLU kink, where
        # central differences are meaningless
        layer.bias.data = rng.uniform(0.2, 0.6, layer.bias.shape)
    return net


def _rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.max(np.abs(a - b) / (1.0 + np.abs(b))) if a.size else 0.0


def suite_path_enumeration(n_nets=100, seed=12345, perturb=0.0):
    """phi, psi, candidate scores, total product, and centrality vs
    exhaustive enumeration on random tiny masked MLPs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_nets):
        net = random_masked_mlp(rng)
        scores = score_pass(net)
        phi_ref, psi_ref = enum_all_phi_psi(net)
        for g, (p_ref, s_ref) in enumerate(zip(phi_ref, psi_ref)):
            worst = max(worst, _rel_err(scores.group_phi[g] + perturb, p_ref))
            worst = max(worst, _rel_err(scores.group_psi[g], s_ref))
        worst = max(worst, _rel_err(scores.total, enum_total_pwmp(net)))
        cents = path_centrality(net, scores)
        cents_ref = enum_centrality(net)
        for c, c_ref in zip(cents, cents_ref):
            worst = max(worst, _rel_err(c, c_ref))
        table = candidate_scores(net, scores)
        wl = [idx for idx, _l in net.weighted_layers()]
        for pos, idx in enumerate(wl):
            layer = net.layers[idx]
            miss = np.argwhere(layer.mask == 0)
            # sample a few missing edges per layer to keep enumeration cheap
            for i, j in miss[:4]:
                ref = enum_candidate_score(net, pos, int(i), int(j))
                worst = max(worst, _rel_err(table.scores[idx][i, j], ref))
    passed = worst < REL_TOL
    return ("path-enumeration", passed, f"max rel err {worst:.3e} over {n_nets} nets")


def suite_conv_equivalence(seed=7):
    """Masked 3x3 conv on a 4x4 input vs its unrolled masked-linear twin."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _trial in range(5):
        layer = MaskedConv2d(2, 3, 3, rng, stride=1, pad=1)
        layer.weight.data = rng.uniform(-1, 1, layer.weight.shape)
        layer.mask = (rng.random(layer.mask.shape) < 0.6).astype(np.uint8)
        layer.weight.data *= layer.mask
        net = MaskedNetwork([layer], "conv-test", (2, 4, 4))
        scores = score_pass(net)
        phi_ref, psi_ref, s_ref = conv_scores_by_unrolling(layer, (2, 4, 4))
        worst = max(worst, _rel_err(scores.phi_out[0], phi_ref))
        worst = max(worst, _rel_err(scores.psi_in[0], psi_ref))
        table = candidate_scores(net, scores)
        worst = max(worst, _rel_err(table.scores[0], s_ref))
    passed = worst < REL_TOL
    return ("conv-unroll-equivalence", passed, f"max rel err {worst:.3e}")


def suite_delta_trace(n_nets=20, seed=99):
    """Trace-gain by enumeration vs the squared-weight scoring pass, and the
    magnitude score vs its own enumeration (the surrogate relationship)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_nets):
        net = random_masked_mlp(rng, max_hidden_layers=2, max_width=5)
        sq = score_pass(net, weight_transform="square")
        ab = score_pass(net)
        wl = [idx for idx, _l in net.weighted_layers()]
        for pos, idx in enumerate(wl):
            layer = net.layers[idx]
            miss = np.argwhere(layer.mask == 0)
            for i, j in miss[:3]:
                dt_ref = enum_delta_trace(net, pos, int(i), int(j))
                dt_fast = sq.phi_in[idx][i] * sq.psi_out[idx][j]
                worst = max(worst, _rel_err(dt_fast, dt_ref))
                s_ref = enum_candidate_score(net, pos, int(i), int(j), power=1)
                s_fast = ab.phi_in[idx][i] * ab.psi_out[idx][j]
                worst = max(worst, _rel_err(s_fast, s_ref))
    passed = worst < REL_TOL
    return ("trace-gain-surrogate", passed, f"max rel err {worst:.3e}")


def suite_sampling(n_draws=100_000, seed=2024, p_threshold=0.001):
    """Single-draw frequencies vs normalized scores (chi-square), plus
    uniformity of the random-growth draw."""
    rng = np.random.default_rng(seed)
    weights = np.array([2.0, 1.0, 1.0, 5.0, 0.5, 3.0, 1.5, 0.25, 4.0, 1.25])
    counts = np.zeros(len(weights))
    for _ in range(n_draws):
        idx = sample_without_replacement(weights, 1, rng)[0]
        counts[idx] += 1
    expected = weights / weights.sum() * n_draws
    _chi, p_biased = stats.chisquare(counts, expected)
    uni = rng.integers(0, len(weights), size=n_draws)
    ucounts = np.bincount(uni, minlength=len(weights))
    _chi, p_uniform = stats.chisquare(ucounts)
    passed = p_biased > p_threshold and p_uniform > p_threshold
    return ("sampling-chi-square", passed,
            f"biased p={p_biased:.4f}, uniform p={p_uniform:.4f}")


def _min_preact_margin(net, xb):
    """Smallest |pre-activation| feeding a ReLU for the given batch."""
    tape = Tape()
    net.forward(tape, Tensor(xb), retain=True)
    hidden = [idx for idx, _l in net.weighted_layers()[:-1]]
    return min(float(np.abs(net._last_preacts[idx].data).min())
               for idx in hidden)


def gradient_check(net, rng, step=1e-3):
    """Max relative error between tape gradients and central differences.

    The probe batch is resampled until every ReLU pre-activation sits a
    safe margin from the kink, where central differences are undefined.
    """
    for _attempt in range(50):
        xb = rng.normal(size=(4, net.input_shape[0]))
        if _min_preact_margin(net, xb) > 20 * step:
            break
    yb = rng.integers(0, net.layer_shapes[-1][0], size=4)

    def loss_value():
        tape = Tape()
        logits = net.forward(tape, Tensor(xb))
        return float(tape.softmax_cross_entropy(logits, yb).data)

    tape = Tape()
    logits = net.forward(tape, Tensor(xb))
    loss = tape.softmax_cross_entropy(logits, yb)
    for _i, _n, t in net.parameters():
        t.zero_grad()
    tape.backward(loss)

    worst = 0.0
    for idx, name, tensor in net.parameters():
        grad = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        flat = tensor.data.ravel()
        mask = None
        if name == "weight":
            mask = net.layers[idx].mask.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            up = loss_value()
            flat[k] = orig - step
            down = loss_value()
            flat[k] = orig
            fd = (up - down) / (2 * step)
            if mask is not None and mask[k] == 0:
                fd = 0.0  # masked weights carry no gradient by contract
            err = abs(grad.ravel()[k] - fd) / (1.0 + abs(fd))
            worst = max(worst, err)
    return worst


def suite_gradient_check(n_seeds=50, seed=31337, tol=1e-4):
    """Autodiff vs central finite differences on random masked MLPs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_seeds):
        net = random_masked_mlp(rng, max_hidden_layers=2, max_width=8)
        worst = max(worst, gradient_check(net, rng))
    passed = worst < tol
    return ("gradient-finite-difference", passed,
            f"max rel err {worst:.3e} over {n_seeds} nets")


def suite_fit_recovery(seed=5):
    """Generate-and-recover for the stopping rule on a noiseless trace."""
    p0_true, a_true, beta_true = 0.5, 0.4, 10.0
    rho = np.linspace(0.05, 0.5, 10)
    trace = DensityTrace()
    for r in rho:
        trace.append(r, saturating_curve(r, p0_true, a_true, beta_true))
    fit = fit_logistic(trace)
    if fit is None:
        return ("fit-recovery", False, "fit did not converge")
    beta_err = abs(fit.beta - beta_true) / beta_true
    rho_ref = plateau_density(p0_true, a_true, beta_true)
    rho_err = abs(fit.rho_hat - rho_ref)
    passed = beta_err < 0.05 and rho_err < 1e-3
    return ("fit-recovery", passed,
            f"beta err {beta_err:.2e}, rho_hat err {rho_err:.2e}")


ALL_SUITES = [suite_path_enumeration, suite_conv_equivalence,
              suite_delta_trace, suite_sampling, suite_gradient_check,
              suite_fit_recovery]


def run_all(perturb=0.0):
    results = []
    for suite in ALL_SUITES:
        if suite is suite_path_enumeration and perturb:
            results.append(suite(perturb=perturb))
        else:
            results.append(suite())
    return results
