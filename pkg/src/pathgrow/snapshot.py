"""Mask + weights container format.

Byte layout (all integers little-endian):

    offset  size  field
    0       4     magic ``PGSN``
    4       2     format version (currently 1)
    6       2     arch id length La
    8       La    arch id, UTF-8
    8+La    4     number of entries N

Then N entries, each:

    2     name length Ln
    Ln    entry name, UTF-8 (e.g. ``layer3.weight``)
    1     dtype code: 0 = float64, 1 = float32
    1     number of dimensions D
    4*D   dimension sizes (u32)
    1     has_mask flag
    ceil(prod(dims)/8)   packed mask bits (numpy bit order), if has_mask
    prod(dims)*itemsize  raw little-endian float data

External tools can parse the container with nothing but this table.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"PGSN"
VERSION = 1
_DTYPES = {0: np.float64, 1: np.float32}
_CODES = {np.dtype(np.float64): 0, np.dtype(np.float32): 1}


class SnapshotError(ValueError):
    pass


def save_snapshot(net, path):
    """Write every parameter tensor (masks included for masked weights)."""
    entries = []
    for idx, name, tensor in net.parameters():
        layer = net.layers[idx]
        mask = layer.mask if name == "weight" and hasattr(layer, "mask") else None
        entries.append((f"layer{idx}.{name}", tensor.data, mask))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        aid = net.arch_id.encode()
        fh.write(struct.pack("<H", len(aid)))
        fh.write(aid)
        fh.write(struct.pack("<I", len(entries)))
        for name, data, mask in entries:
            nb = name.encode()
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", _CODES[data.dtype]))
            fh.write(struct.pack("<B", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(struct.pack("<B", 1 if mask is not None else 0))
            if mask is not None:
                fh.write(np.packbits(mask.ravel().astype(np.uint8)).tobytes())
            fh.write(data.astype(data.dtype.newbyteorder("<")).tobytes())


def read_snapshot(path):
    """Parse a container into (arch_id, {name: (data, mask_or_None)})."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise SnapshotError("bad magic; not a snapshot container")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    (la,) = struct.unpack_from("<H", raw, 6)
    off = 8
    arch_id = raw[off:off + la].decode()
    off += la
    (n,) = struct.unpack_from("<I", raw, off)
    off += 4
    entries = {}
    for _ in range(n):
        (ln,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off:off + ln].decode()
        off += ln
        code, ndim = struct.unpack_from("<BB", raw, off)
        off += 2
        dims = struct.unpack_from(f"<{ndim}I", raw, off)
        off += 4 * ndim
        (has_mask,) = struct.unpack_from("<B", raw, off)
        off += 1
        count = int(np.prod(dims)) if ndim else 1
        mask = None
        if has_mask:
            nbytes = (count + 7) // 8
            bits = np.frombuffer(raw, dtype=np.uint8, count=nbytes, offset=off)
            mask = np.unpackbits(bits)[:count].reshape(dims)
            off += nbytes
        dt = np.dtype(_DTYPES[code]).newbyteorder("<")
        data = np.frombuffer(raw, dtype=dt, count=count, offset=off)
        data = data.reshape(dims).astype(dt.newbyteorder("="))
        off += count * dt.itemsize
        entries[name] = (data, mask)
    if off != len(raw):
        raise SnapshotError(f"trailing bytes after offset {off}")
    return arch_id, entries


def load_into(net, path):
    """Restore parameters and masks from a snapshot of the same arch."""
    arch_id, entries = read_snapshot(path)
    if arch_id != net.arch_id:
        raise SnapshotError(f"snapshot arch {arch_id!r} != network {net.arch_id!r}")
    for idx, name, tensor in net.parameters():
        key = f"layer{idx}.{name}"
        if key not in entries:
            raise SnapshotError(f"missing entry {key}")
        data, mask = entries[key]
        if tuple(data.shape) != tuple(tensor.data.shape):
            raise SnapshotError(f"{key}: shape mismatch")
        tensor.data = data.astype(tensor.data.dtype)
        if mask is not None:
            net.layers[idx].mask[:] = mask.astype(np.uint8)
    return net
