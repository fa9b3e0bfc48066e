"""Binary weight/checkpoint container.

Layout (all integers little-endian):

    magic   4 bytes  b"UCMW"
    version u32      1
    count   u32      number of tensors
    per tensor:
        name_len u32, name UTF-8 bytes
        dtype    u8   (0 = float32)
        rank     u8
        dims     u32 * rank
        payload  raw little-endian float32, 4 * prod(dims) bytes

Tensor names are unique; write -> read -> write is byte-identical.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"UCMW"
VERSION = 1
DTYPE_F32 = 0


class WeightFileError(RuntimeError):
    pass


def write_tensors(path, table):
    """Write an ordered {name: np.ndarray} table (arrays cast to float32)."""
    names = list(table.keys())
    if len(set(names)) != len(names):
        raise WeightFileError("duplicate tensor names")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            arr = np.ascontiguousarray(table[name], dtype="<f4")
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<BB", DTYPE_F32, arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
            fh.write(arr.tobytes())


def read_tensors(path):
    """Read back a {name: np.ndarray} table, validating the layout."""
    with open(path, "rb") as fh:
        raw = fh.read()
    off = 0

    def take(n, what):
        nonlocal off
        if off + n > len(raw):
            raise WeightFileError(f"truncated file while reading {what}")
        chunk = raw[off:off + n]
        off += n
        return chunk

    if take(4, "magic") != MAGIC:
        raise WeightFileError(f"{path} is not a weight file (bad magic)")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != VERSION:
        raise WeightFileError(f"unsupported version {version}")
    (count,) = struct.unpack("<I", take(4, "count"))
    table = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        name = take(name_len, "name").decode("utf-8")
        dtype_code, rank = struct.unpack("<BB", take(2, "dtype/rank"))
        if dtype_code != DTYPE_F32:
            raise WeightFileError(f"tensor {name}: unknown dtype code {dtype_code}")
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims")) if rank else ()
        n = int(np.prod(dims)) if dims else 1
        payload = take(4 * n, f"payload of {name}")
        if name in table:
            raise WeightFileError(f"duplicate tensor name {name}")
        table[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    if off != len(raw):
        raise WeightFileError(f"{len(raw) - off} trailing bytes after last tensor")
    return table


def model_tensors(model):
    """Parameters then buffers, in registration order."""
    out = {}
    for name, p in model.named_parameters():
        out[name] = p.data
    for name, b in model.named_buffers():
        out[name] = b
    return out


def save_weights(model, path):
    write_tensors(path, model_tensors(model))


def load_weights(model, path):
    """Load a weight file into a built model; shapes must match exactly."""
    table = read_tensors(path)
    _apply_table(model, table, source=path)


def _apply_table(model, table, source="checkpoint"):
    for name, p in model.named_parameters():
        if name not in table:
            raise WeightFileError(f"{source}: missing tensor {name}")
        if table[name].shape != p.data.shape:
            raise WeightFileError(
                f"{source}: tensor {name} has shape {table[name].shape}, "
                f"model expects {p.data.shape}")
        p.data = table[name].astype(p.data.dtype, copy=True)
    for name, b in model.named_buffers():
        if name not in table:
            raise WeightFileError(f"{source}: missing buffer {name}")
        if table[name].shape != b.shape:
            raise WeightFileError(
                f"{source}: buffer {name} has shape {table[name].shape}, "
                f"model expects {b.shape}")
        model.set_buffer(name, table[name].astype(np.float32, copy=True))


def save_checkpoint(model, optimizer, path, extra=None):
    """Weights + running stats + optimizer moments + scalar metadata."""
    table = model_tensors(model)
    table.update(optimizer.state_tensors())
    for key, val in (extra or {}).items():
        table[f"meta.{key}"] = np.asarray([val], dtype=np.float32)
    write_tensors(path, table)


def load_checkpoint(model, optimizer, path):
    table = read_tensors(path)
    _apply_table(model, table, source=path)
    if optimizer is not None:
        optimizer.load_state_tensors(table)
    return {key[len("meta."):]: float(val[0])
            for key, val in table.items() if key.startswith("meta.")}
