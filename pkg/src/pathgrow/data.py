"""Dataset ingestion: IDX and CIFAR binary formats plus synthetic
Gaussian-blob generators, with deterministic train/validation splits."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np


class DataFormatError(ValueError):
    pass


@dataclass
class Dataset:
    """Feature array (N, ...) with integer labels and a deterministic split."""
    x: np.ndarray
    y: np.ndarray
    n_classes: int
    train: tuple = None
    val: tuple = None

    def split(self, val_fraction=0.1, seed=0):
        """Disjoint, exhaustive train/val split; deterministic given seed."""
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(self.x))
        n_val = int(round(len(self.x) * val_fraction))
        val_idx = order[:n_val]
        train_idx = order[n_val:]
        self.train = (self.x[train_idx], self.y[train_idx])
        self.val = (self.x[val_idx], self.y[val_idx])
        return self


def _read_idx_array(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise DataFormatError(f"{path}: truncated header at offset {len(raw)}")
    zero1, zero2, dtype_code, ndim = struct.unpack(">BBBB", raw[:4])
    if zero1 != 0 or zero2 != 0:
        raise DataFormatError(f"{path}: bad magic at offset 0")
    dtypes = {0x08: np.uint8, 0x09: np.int8, 0x0B: np.int16,
              0x0C: np.int32, 0x0D: np.float32, 0x0E: np.float64}
    if dtype_code not in dtypes:
        raise DataFormatError(f"{path}: unknown dtype code 0x{dtype_code:02x}")
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise DataFormatError(f"{path}: truncated dims at offset {len(raw)}")
    dims = struct.unpack(f">{ndim}I", raw[4:header_len])
    count = int(np.prod(dims))
    dt = np.dtype(dtypes[dtype_code]).newbyteorder(">")
    expected = header_len + count * dt.itemsize
    if len(raw) != expected:
        raise DataFormatError(
            f"{path}: expected {expected} bytes, got {len(raw)} (offset {len(raw)})")
    arr = np.frombuffer(raw, dtype=dt, offset=header_len).reshape(dims)
    return arr.astype(arr.dtype.newbyteorder("="))


def load_idx(images_path, labels_path, flatten=True) -> Dataset:
    """Parse an IDX image/label pair; pixel values scaled to [0, 1]."""
    images = _read_idx_array(images_path)
    labels = _read_idx_array(labels_path)
    if labels.ndim != 1:
        raise DataFormatError(f"{labels_path}: labels must be 1-D")
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(
            f"image count {images.shape[0]} != label count {labels.shape[0]}")
    x = images.astype(np.float64)
    if images.dtype == np.uint8:
        x /= 255.0
    if flatten:
        x = x.reshape(len(x), -1)
    y = labels.astype(np.int64)
    return Dataset(x=x, y=y, n_classes=int(y.max()) + 1 if len(y) else 0)


def write_idx(images, labels, images_path, labels_path):
    """Write uint8 images/labels in IDX byte layout (fixture generator)."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">BBBB", 0, 0, 0x08, images.ndim))
        fh.write(struct.pack(f">{images.ndim}I", *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">BBBB", 0, 0, 0x08, 1))
        fh.write(struct.pack(">I", len(labels)))
        fh.write(labels.tobytes())


CIFAR_RECORD = 1 + 3072


def load_cifar_binary(directory, files=None, subsample=None, seed=0,
                      normalize=True) -> Dataset:
    """Parse CIFAR-10 binary batches (1 label byte + 3072 pixel bytes)."""
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"no such dataset directory: {directory}")
    if files is None:
        files = sorted(f for f in os.listdir(directory) if f.endswith(".bin"))
    if not files:
        raise DataFormatError(f"{directory}: no .bin batch files found")
    labels = []
    images = []
    for name in files:
        with open(os.path.join(directory, name), "rb") as fh:
            raw = fh.read()
        if len(raw) % CIFAR_RECORD:
            raise DataFormatError(
                f"{name}: length {len(raw)} not a multiple of {CIFAR_RECORD}")
        arr = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        labels.append(arr[:, 0].astype(np.int64))
        images.append(arr[:, 1:].reshape(-1, 3, 32, 32))
    y = np.concatenate(labels)
    x = np.concatenate(images).astype(np.float64) / 255.0
    if subsample is not None:
        rng = np.random.default_rng(seed)
        keep = rng.choice(len(x), size=int(round(len(x) * subsample)),
                          replace=False)
        keep.sort()
        x, y = x[keep], y[keep]
    if normalize:
        mean = x.mean(axis=(0, 2, 3), keepdims=True)
        std = x.std(axis=(0, 2, 3), keepdims=True) + 1e-8
        x = (x - mean) / std
    return Dataset(x=x, y=y, n_classes=int(y.max()) + 1)


def synth_classification(n, dims, classes, separation, rng,
                         image_shape=None) -> Dataset:
    """Gaussian-blob multiclass data with controllable difficulty.

    Class means are unit-norm random directions scaled by ``separation``;
    examples are mean + standard normal noise.  ``image_shape`` reshapes
    the features (e.g. (1, 28, 28)) for conv architectures.
    """
    means = rng.normal(size=(classes, dims))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    means *= separation
    y = rng.integers(0, classes, size=n)
    x = means[y] + rng.normal(size=(n, dims))
    if image_shape is not None:
        x = x.reshape((n,) + tuple(image_shape))
    return Dataset(x=x, y=y.astype(np.int64), n_classes=classes)


def synth_structured_images(n, classes, rng, side=28, noise=1.0,
                            patch=6, flatten=True) -> Dataset:
    """Synthetic image classes: each class lights up a few fixed patches.

    Harder than pure blobs because the signal is localized and overlapping,
    so accuracy improves with model capacity.
    """
    templates = np.zeros((classes, side, side))
    for c in range(classes):
        for _ in range(3):
            r = int(rng.integers(0, side - patch))
            col = int(rng.integers(0, side - patch))
            templates[c, r:r + patch, col:col + patch] += rng.uniform(0.5, 1.5)
    y = rng.integers(0, classes, size=n)
    x = templates[y] + noise * rng.normal(size=(n, side, side))
    if flatten:
        x = x.reshape(n, -1)
    return Dataset(x=x, y=y.astype(np.int64), n_classes=classes)
