"""SGD training, validation, FLOPs accounting, and rough-train policies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import MaskedNetwork, ConfigError
from .tensor import Tensor, Tape, TensorError


class DivergenceError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass
class RoughTrainPolicy:
    """Short per-iteration training between growth events.

    ``fixed`` mode runs exactly ``epochs`` epochs; ``adaptive`` stops after
    ``patience`` consecutive epochs without validation-loss improvement,
    bounded by ``max_epochs``.
    """
    mode: str = "adaptive"
    epochs: int = 5
    patience: int = 3
    max_epochs: int = 20

    def __post_init__(self):
        if self.mode not in ("fixed", "adaptive"):
            raise ConfigError(f"unknown rough-train mode {self.mode!r}")


@dataclass
class CostLedger:
    """Cumulative training FLOPs, normalized by dense extensive training."""
    dense_extensive_flops: float
    cumulative_flops: float = 0.0

    def add(self, flops):
        if flops < 0:
            raise ValueError("FLOPs increments must be non-negative")
        self.cumulative_flops += flops

    def relative(self):
        return self.cumulative_flops / self.dense_extensive_flops


def forward_flops_per_example(net: MaskedNetwork, dense=False):
    """Multiply+add count of one forward pass; nonlinearities excluded."""
    total = 0
    for _idx, layer in net.weighted_layers():
        nnz = layer.mask.size if dense else int(layer.mask.sum())
        spatial = getattr(layer, "out_spatial", None) or 1
        total += 2 * nnz * spatial
    return total


def flops_estimate(net: MaskedNetwork, n_examples, phase="train", dense=False):
    """Total FLOPs for processing n_examples.

    Training steps are counted as 3x a forward pass (backward taken as 2x
    forward), a declared accounting convention.
    """
    per = forward_flops_per_example(net, dense=dense)
    mult = 3 if phase == "train" else 1
    return per * mult * n_examples


@dataclass
class SGD:
    lr: float = 0.1
    momentum: float = 0.9
    _buffers: dict = field(default_factory=dict)

    def step(self, params, lr=None):
        lr = self.lr if lr is None else lr
        for *key, tensor in params:
            key = tuple(key)
            g = tensor.grad
            if g is None:
                continue
            if self.momentum:
                buf = self._buffers.get(key)
                if buf is None:
                    buf = np.zeros_like(tensor.data)
                    self._buffers[key] = buf
                buf *= self.momentum
                buf += g
                g = buf
            tensor.data -= lr * g


def evaluate(net: MaskedNetwork, x, y, batch_size=256):
    """Mean cross-entropy loss and accuracy on (x, y)."""
    losses = []
    correct = 0
    for start in range(0, len(x), batch_size):
        xb = x[start:start + batch_size]
        yb = y[start:start + batch_size]
        tape = Tape()
        logits = net.forward(tape, Tensor(xb))
        loss = tape.softmax_cross_entropy(logits, yb)
        losses.append(float(loss.data) * len(xb))
        correct += int((logits.data.argmax(axis=1) == yb).sum())
    return sum(losses) / len(x), correct / len(x)


def train_epochs(net: MaskedNetwork, data, optimizer: SGD, n_epochs, rng,
                 batch_size=128, ledger: CostLedger | None = None,
                 lr_schedule=None, metrics=None, rho=None, step_offset=0):
    """Run n_epochs of minibatch SGD; returns per-epoch (val_loss, val_acc).

    Deterministic: batch order comes from ``rng`` only and gradient
    reduction order is fixed.
    """
    xtr, ytr = data.train
    xval, yval = data.val
    history = []
    step = step_offset
    for epoch in range(n_epochs):
        order = rng.permutation(len(xtr))
        epoch_loss = 0.0
        for start in range(0, len(xtr), batch_size):
            sel = order[start:start + batch_size]
            xb, yb = xtr[sel], ytr[sel]
            tape = Tape()
            try:
                logits = net.forward(tape, Tensor(xb), train=True)
                loss = tape.softmax_cross_entropy(logits, yb)
            except TensorError as exc:
                raise DivergenceError(f"non-finite loss at step {step}") from exc
            for _i, _n, t in net.parameters():
                t.zero_grad()
            tape.backward(loss)
            lr = lr_schedule(step) if lr_schedule else None
            optimizer.step(net.parameters(), lr=lr)
            epoch_loss += float(loss.data) * len(xb)
            step += 1
        if ledger is not None:
            ledger.add(flops_estimate(net, len(xtr), phase="train"))
            ledger.add(flops_estimate(net, len(xval), phase="eval"))
        val_loss, val_acc = evaluate(net, xval, yval)
        history.append((val_loss, val_acc))
        if metrics is not None:
            metrics.append({
                "step": step,
                "rho": rho if rho is not None else net.density(),
                "train_loss": epoch_loss / len(xtr),
                "val_loss": val_loss,
                "val_acc": val_acc,
                "cum_flops": ledger.cumulative_flops if ledger else 0.0,
            })
    return history, step


def rough_train(net: MaskedNetwork, data, policy: RoughTrainPolicy,
                optimizer: SGD, rng, batch_size=128,
                ledger: CostLedger | None = None, metrics=None,
                step_offset=0):
    """Train per the rough-training policy; returns (val_acc, epochs_used, step)."""
    if policy.mode == "fixed":
        hist, step = train_epochs(net, data, optimizer, policy.epochs, rng,
                                  batch_size, ledger, metrics=metrics,
                                  step_offset=step_offset)
        return hist[-1][1], policy.epochs, step
    best = np.inf
    stale = 0
    epochs = 0
    step = step_offset
    last_acc = 0.0
    while epochs < policy.max_epochs:
        hist, step = train_epochs(net, data, optimizer, 1, rng, batch_size,
                                  ledger, metrics=metrics, step_offset=step)
        val_loss, last_acc = hist[-1]
        epochs += 1
        if val_loss < best - 1e-12:
            best = val_loss
            stale = 0
        else:
            stale += 1
            if stale >= policy.patience:
                break
    return last_acc, epochs, step
