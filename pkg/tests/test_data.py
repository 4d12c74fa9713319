"""Dataset loaders: IDX and CIFAR binary parsing, synthetic generators."""

import struct

import numpy as np
import pytest

from pathgrow.data import (Dataset, load_idx, write_idx, load_cifar_binary,
                           synth_classification, synth_structured_images,
                           DataFormatError, CIFAR_RECORD)


def test_idx_round_trip(tmp_path, rng):
    images = rng.integers(0, 256, size=(10, 5, 5), dtype=np.uint8)
    labels = rng.integers(0, 3, size=10, dtype=np.uint8)
    ip, lp = tmp_path / "imgs.idx", tmp_path / "lbls.idx"
    write_idx(images, labels, ip, lp)
    ds = load_idx(ip, lp)
    assert ds.x.shape == (10, 25)
    assert np.allclose(ds.x, images.reshape(10, 25) / 255.0)
    assert np.array_equal(ds.y, labels)
    assert ds.n_classes == labels.max() + 1


def test_idx_bad_magic(tmp_path):
    p = tmp_path / "bad.idx"
    p.write_bytes(b"\x01\x00\x08\x01" + struct.pack(">I", 0))
    with pytest.raises(DataFormatError, match="magic"):
        load_idx(p, p)


def test_idx_unknown_dtype(tmp_path):
    p = tmp_path / "bad.idx"
    p.write_bytes(b"\x00\x00\x42\x01" + struct.pack(">I", 0))
    with pytest.raises(DataFormatError, match="dtype"):
        load_idx(p, p)


def test_idx_truncated_payload(tmp_path):
    p = tmp_path / "bad.idx"
    p.write_bytes(b"\x00\x00\x08\x01" + struct.pack(">I", 10) + b"\x00" * 4)
    with pytest.raises(DataFormatError, match="offset"):
        load_idx(p, p)


def test_idx_count_mismatch(tmp_path, rng):
    images = rng.integers(0, 256, size=(4, 2, 2), dtype=np.uint8)
    labels = np.zeros(5, dtype=np.uint8)
    ip, lp = tmp_path / "i.idx", tmp_path / "l.idx"
    write_idx(images, labels, ip, lp)
    with pytest.raises(DataFormatError, match="count"):
        load_idx(ip, lp)


def test_cifar_binary_round_trip(tmp_path, rng):
    records = rng.integers(0, 256, size=(6, CIFAR_RECORD), dtype=np.uint8)
    records[:, 0] = np.arange(6) % 10
    (tmp_path / "data_batch_1.bin").write_bytes(records.tobytes())
    ds = load_cifar_binary(tmp_path, normalize=False)
    assert ds.x.shape == (6, 3, 32, 32)
    assert np.array_equal(ds.y, records[:, 0])
    assert np.allclose(ds.x[0].ravel() * 255.0, records[0, 1:])


def test_cifar_binary_bad_length(tmp_path):
    (tmp_path / "data_batch_1.bin").write_bytes(b"\x00" * (CIFAR_RECORD + 1))
    with pytest.raises(DataFormatError, match="multiple"):
        load_cifar_binary(tmp_path)


def test_cifar_missing_directory(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_cifar_binary(tmp_path / "nope")


def test_cifar_empty_directory(tmp_path):
    with pytest.raises(DataFormatError, match="batch"):
        load_cifar_binary(tmp_path)


def test_cifar_subsample(tmp_path, rng):
    records = rng.integers(0, 256, size=(10, CIFAR_RECORD), dtype=np.uint8)
    (tmp_path / "b.bin").write_bytes(records.tobytes())
    ds = load_cifar_binary(tmp_path, subsample=0.5, normalize=False)
    assert len(ds.x) == 5


def test_split_is_disjoint_exhaustive_deterministic(rng):
    ds = synth_classification(100, 4, 3, 2.0, rng)
    ds.split(val_fraction=0.1, seed=5)
    assert len(ds.val[0]) == 10
    assert len(ds.train[0]) == 90
    ds2 = Dataset(x=ds.x, y=ds.y, n_classes=3).split(val_fraction=0.1, seed=5)
    assert np.array_equal(ds.val[0], ds2.val[0])
    # disjoint and exhaustive: row multiset is preserved
    joined = np.vstack([ds.train[0], ds.val[0]])
    assert np.array_equal(np.sort(joined, axis=0), np.sort(ds.x, axis=0))


def test_synth_classification_separation_controls_difficulty(rng):
    near = synth_classification(500, 8, 2, 0.1, np.random.default_rng(0))
    far = synth_classification(500, 8, 2, 10.0, np.random.default_rng(0))
    # class-mean distance should scale with separation
    def spread(ds):
        return np.linalg.norm(ds.x[ds.y == 0].mean(0) - ds.x[ds.y == 1].mean(0))
    assert spread(far) > spread(near) + 5


def test_synth_structured_images_shapes(rng):
    ds = synth_structured_images(50, 4, rng)
    assert ds.x.shape == (50, 784)
    assert ds.n_classes == 4
    ds = synth_structured_images(50, 4, rng, flatten=False)
    assert ds.x.shape == (50, 28, 28)


def test_synth_structured_images_learnable_signal(rng):
    ds = synth_structured_images(400, 2, rng, noise=0.1)
    mean0 = ds.x[ds.y == 0].mean(axis=0)
    mean1 = ds.x[ds.y == 1].mean(axis=0)
    assert np.abs(mean0 - mean1).max() > 0.3
