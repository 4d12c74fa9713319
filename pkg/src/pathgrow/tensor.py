"""Minimal dense tensor arithmetic with reverse-mode gradients.

The engine is a flat tape: every op appends a record (output, inputs,
backward closure) and `Tape.backward` replays the records in reverse,
accumulating gradients additively.  It supports exactly the layer set
needed for masked MLPs and small residual CNNs; it is not a general
computation-graph library.

Masked ops zero the weight gradient wherever the mask bit is 0, so a
gradient step can never resurrect a pruned weight.
"""

from __future__ import annotations

import numpy as np


class TensorError(RuntimeError):
    """Shape mismatch, non-finite values, or tape misuse."""


class Tensor:
    """A numpy array plus an accumulated gradient."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad=False, dtype=np.float64):
        self.data = np.asarray(data, dtype=dtype)
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self):
        self.grad = None

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype)
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _check_finite(arr, what):
    if not np.isfinite(arr).all():
        raise TensorError(f"non-finite values produced by {what}")


def im2col(x, kh, kw, stride, pad):
    """Unroll (B,C,H,W) into (B, C*kh*kw, Hout*Wout) patch columns."""
    b, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    hout = (h + 2 * pad - kh) // stride + 1
    wout = (w + 2 * pad - kw) // stride + 1
    cols = np.empty((b, c, kh, kw, hout, wout), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = x[:, :, i:i + stride * hout:stride, j:j + stride * wout:stride]
    return cols.reshape(b, c * kh * kw, hout * wout), hout, wout


def col2im(cols, x_shape, kh, kw, stride, pad):
    """Adjoint of im2col: scatter-add patch columns back onto the input."""
    b, c, h, w = x_shape
    hout = (h + 2 * pad - kh) // stride + 1
    wout = (w + 2 * pad - kw) // stride + 1
    cols = cols.reshape(b, c, kh, kw, hout, wout)
    xp = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i:i + stride * hout:stride, j:j + stride * wout:stride] += cols[:, :, i, j]
    if pad:
        xp = xp[:, :, pad:-pad, pad:-pad]
    return xp


def conv_out_shape(h, w, kh, kw, stride, pad):
    return (h + 2 * pad - kh) // stride + 1, (w + 2 * pad - kw) // stride + 1


class Tape:
    """Ordered record of executed ops; backward replays them in reverse."""

    def __init__(self):
        self._records = []

    def _push(self, out, inputs, backward_fn):
        out.requires_grad = True
        self._records.append((out, inputs, backward_fn))

    # ---- ops ----------------------------------------------------------

    def matmul_masked(self, x: Tensor, w: Tensor, mask) -> Tensor:
        if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[0]:
            raise TensorError(
                f"matmul shape mismatch: {x.data.shape} x {w.data.shape}")
        if mask.shape != w.data.shape:
            raise TensorError("mask shape must equal weight shape")
        weff = w.data * mask
        out = Tensor(x.data @ weff)
        _check_finite(out.data, "matmul_masked")

        def backward(g):
            if x.requires_grad:
                x.accumulate(g @ weff.T)
            if w.requires_grad:
                w.accumulate((x.data.T @ g) * mask)

        self._push(out, (x, w), backward)
        return out

    def conv2d_masked(self, x: Tensor, w: Tensor, mask, stride=1, pad=0) -> Tensor:
        if x.data.ndim != 4 or w.data.ndim != 4:
            raise TensorError("conv2d expects (B,C,H,W) input and (O,C,kh,kw) weight")
        cout, cin, kh, kw = w.data.shape
        if x.data.shape[1] != cin:
            raise TensorError(
                f"conv2d channel mismatch: input {x.data.shape[1]}, weight {cin}")
        weff = (w.data * mask).reshape(cout, cin * kh * kw)
        cols, hout, wout = im2col(x.data, kh, kw, stride, pad)
        out = Tensor(np.einsum("ok,bkl->bol", weff, cols).reshape(
            x.data.shape[0], cout, hout, wout))
        _check_finite(out.data, "conv2d_masked")

        def backward(g):
            gmat = g.reshape(g.shape[0], cout, hout * wout)
            if w.requires_grad:
                dw = np.einsum("bol,bkl->ok", gmat, cols).reshape(w.data.shape)
                w.accumulate(dw * mask)
            if x.requires_grad:
                dcols = np.einsum("ok,bol->bkl", weff, gmat)
                x.accumulate(col2im(dcols, x.data.shape, kh, kw, stride, pad))

        self._push(out, (x, w), backward)
        return out

    def add_bias(self, x: Tensor, b: Tensor) -> Tensor:
        if x.data.ndim == 2:
            out = Tensor(x.data + b.data)
        else:  # (B,C,H,W) with per-channel bias
            out = Tensor(x.data + b.data[None, :, None, None])

        def backward(g):
            if x.requires_grad:
                x.accumulate(g)
            if b.requires_grad:
                axes = 0 if g.ndim == 2 else (0, 2, 3)
                b.accumulate(g.sum(axis=axes))

        self._push(out, (x, b), backward)
        return out

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        if a.data.shape != b.data.shape:
            raise TensorError("residual add requires equal shapes")
        out = Tensor(a.data + b.data)

        def backward(g):
            if a.requires_grad:
                a.accumulate(g)
            if b.requires_grad:
                b.accumulate(g)

        self._push(out, (a, b), backward)
        return out

    def relu(self, x: Tensor) -> Tensor:
        keep = x.data > 0
        out = Tensor(np.where(keep, x.data, 0.0))

        def backward(g):
            if x.requires_grad:
                x.accumulate(g * keep)

        self._push(out, (x,), backward)
        return out

    def affine_channels(self, x: Tensor, gamma: Tensor, beta: Tensor,
                        mean, var, eps=1e-5) -> Tensor:
        """Per-channel affine with frozen normalization stats (batch-norm lite)."""
        scale = 1.0 / np.sqrt(var + eps)
        if x.data.ndim == 4:
            xh = (x.data - mean[None, :, None, None]) * scale[None, :, None, None]
            out = Tensor(xh * gamma.data[None, :, None, None]
                         + beta.data[None, :, None, None])
        else:
            xh = (x.data - mean) * scale
            out = Tensor(xh * gamma.data + beta.data)

        def backward(g):
            if x.requires_grad:
                if g.ndim == 4:
                    x.accumulate(g * (gamma.data * scale)[None, :, None, None])
                else:
                    x.accumulate(g * gamma.data * scale)
            axes = 0 if g.ndim == 2 else (0, 2, 3)
            if gamma.requires_grad:
                gamma.accumulate((g * xh).sum(axis=axes))
            if beta.requires_grad:
                beta.accumulate(g.sum(axis=axes))

        self._push(out, (x, gamma, beta), backward)
        return out

    def avg_pool2d(self, x: Tensor, k=2) -> Tensor:
        b, c, h, w = x.data.shape
        if h % k or w % k:
            raise TensorError(f"avg_pool2d needs divisible spatial dims, got {h}x{w}")
        pooled = x.data.reshape(b, c, h // k, k, w // k, k).mean(axis=(3, 5))
        out = Tensor(pooled)

        def backward(g):
            if x.requires_grad:
                gx = np.repeat(np.repeat(g, k, axis=2), k, axis=3) / (k * k)
                x.accumulate(gx)

        self._push(out, (x,), backward)
        return out

    def max_pool2d(self, x: Tensor, k=2) -> Tensor:
        b, c, h, w = x.data.shape
        if h % k or w % k:
            raise TensorError(f"max_pool2d needs divisible spatial dims, got {h}x{w}")
        windows = x.data.reshape(b, c, h // k, k, w // k, k)
        flat = windows.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h // k, w // k, k * k)
        arg = flat.argmax(axis=-1)
        out = Tensor(np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0])

        def backward(g):
            if x.requires_grad:
                gflat = np.zeros_like(flat)
                np.put_along_axis(gflat, arg[..., None], g[..., None], axis=-1)
                gx = gflat.reshape(b, c, h // k, w // k, k, k).transpose(
                    0, 1, 2, 4, 3, 5).reshape(b, c, h, w)
                x.accumulate(gx)

        self._push(out, (x,), backward)
        return out

    def global_avg_pool(self, x: Tensor) -> Tensor:
        b, c, h, w = x.data.shape
        out = Tensor(x.data.mean(axis=(2, 3)))

        def backward(g):
            if x.requires_grad:
                x.accumulate(np.broadcast_to(
                    g[:, :, None, None] / (h * w), x.data.shape).copy())

        self._push(out, (x,), backward)
        return out

    def flatten(self, x: Tensor) -> Tensor:
        b = x.data.shape[0]
        out = Tensor(x.data.reshape(b, -1))

        def backward(g):
            if x.requires_grad:
                x.accumulate(g.reshape(x.data.shape))

        self._push(out, (x,), backward)
        return out

    def sum(self, x: Tensor) -> Tensor:
        out = Tensor(x.data.sum())

        def backward(g):
            if x.requires_grad:
                x.accumulate(np.broadcast_to(g, x.data.shape).copy())

        self._push(out, (x,), backward)
        return out

    def softmax_cross_entropy(self, logits: Tensor, labels) -> Tensor:
        """Mean softmax cross-entropy over the batch; labels are int indices."""
        z = logits.data
        zmax = z.max(axis=1, keepdims=True)
        ez = np.exp(z - zmax)
        logsumexp = np.log(ez.sum(axis=1)) + zmax[:, 0]
        n = z.shape[0]
        loss_val = (logsumexp - z[np.arange(n), labels]).mean()
        _check_finite(np.asarray(loss_val), "softmax_cross_entropy")
        out = Tensor(loss_val)

        def backward(g):
            if logits.requires_grad:
                p = ez / ez.sum(axis=1, keepdims=True)
                p[np.arange(n), labels] -= 1.0
                logits.accumulate(p * (g / n))

        self._push(out, (logits,), backward)
        return out

    # ---- backward -----------------------------------------------------

    def backward(self, loss: Tensor):
        if not self._records:
            raise TensorError("backward called before any forward op was recorded")
        if loss.data.ndim != 0:
            raise TensorError("backward expects a scalar loss")
        loss.grad = np.ones_like(loss.data)
        for out, _inputs, backward_fn in reversed(self._records):
            if out.grad is not None:
                backward_fn(out.grad)
