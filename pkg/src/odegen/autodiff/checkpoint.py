"""Binary checkpoint container.

Layout (all integers little-endian):

    magic   8 bytes   b"ODGTNSR1"
    version u32       currently 1
    count   u32       number of tensors
    then per tensor:
        name_len u32
        name     utf-8 bytes
        rank     u32
        extents  u64 * rank
        payload  float64 little-endian, C order

The float payload round-trips bit-exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from ..exceptions import ContractError

MAGIC = b"ODGTNSR1"
VERSION = 1


def save_checkpoint(path, tensors: Mapping[str, "np.ndarray | object"]) -> None:
    """Write named arrays (or Tensors) to ``path`` in the container format."""
    items = []
    for name, t in tensors.items():
        arr = np.ascontiguousarray(getattr(t, "data", t), dtype=np.float64)
        items.append((name, arr))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(items)))
        for name, arr in items:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.astype("<f8", copy=False).tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    """Read a container written by :func:`save_checkpoint`."""
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC:
        raise ContractError(f"not a checkpoint file: bad magic in {path}")
    version, count = struct.unpack_from("<II", blob, 8)
    if version != VERSION:
        raise ContractError(f"unsupported checkpoint version {version}")
    off = 16
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off : off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<I", blob, off)
        off += 4
        shape = struct.unpack_from(f"<{rank}Q", blob, off)
        off += 8 * rank
        n = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(shape)
        off += 8 * n
        out[name] = arr.astype(np.float64).copy()
    return out
