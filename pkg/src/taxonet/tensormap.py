"""Named-tensor-map file format.

One binary container holds a JSON metadata block plus a sorted sequence of
named float32 tensors (raw little-endian).  Model weight sources and training
checkpoints both use it.  Layout:

    magic   8 bytes  b"TAXTMAP1" (name + format version)
    meta    u32 length, then UTF-8 JSON object
    count   u32 number of tensors
    tensor  u32 name length, UTF-8 name,
            u32 ndim, ndim x u64 dims,
            prod(dims) x f32 raw data (little-endian, C order)

Tensors are written in sorted name order and no trailing bytes are allowed,
so identical contents always produce identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from .exceptions import FormatError

MAGIC = b"TAXTMAP1"


def write_tensor_map(path, tensors: Mapping[str, np.ndarray], meta: dict) -> None:
    path = Path(path)
    chunks = [MAGIC]
    meta_blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    chunks.append(struct.pack("<I", len(meta_blob)))
    chunks.append(meta_blob)
    chunks.append(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        data = np.ascontiguousarray(tensors[name], dtype="<f4")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}Q", *data.shape))
        chunks.append(data.tobytes())
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(path)


def read_tensor_map(path) -> tuple[dict[str, np.ndarray], dict]:
    """Parse a tensor-map file; raises FormatError on any corruption."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read tensor map {path}: {exc}") from exc

    view = memoryview(blob)
    offset = 0

    def take(n: int, what: str) -> memoryview:
        nonlocal offset
        if offset + n > len(view):
            raise FormatError(f"{path}: truncated while reading {what}")
        chunk = view[offset:offset + n]
        offset += n
        return chunk

    if bytes(take(8, "magic")) != MAGIC:
        raise FormatError(f"{path}: not a tensor map or unsupported version")
    (meta_len,) = struct.unpack("<I", take(4, "meta length"))
    try:
        meta = json.loads(bytes(take(meta_len, "metadata")).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt metadata block: {exc}") from exc
    (count,) = struct.unpack("<I", take(4, "tensor count"))

    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4, "tensor name length"))
        name = bytes(take(name_len, "tensor name")).decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4, f"rank of {name!r}"))
        dims = struct.unpack(f"<{ndim}Q", take(8 * ndim, f"shape of {name!r}"))
        size = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        raw = take(4 * size, f"data of {name!r}")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    if offset != len(view):
        raise FormatError(f"{path}: {len(view) - offset} trailing bytes after last tensor")
    return tensors, meta
