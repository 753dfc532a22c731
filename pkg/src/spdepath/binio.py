"""Binary dumps of increment tables and trajectories.

Layout: 8-byte magic, two little-endian int64 dimensions ``(rows, cols)``,
then ``rows * cols`` little-endian float64 values in row-major order.
"""
from __future__ import annotations

import struct

import numpy as np

INCREMENT_MAGIC = b"SPDEWINC"
TRAJECTORY_MAGIC = b"SPDETRAJ"
_HEADER = struct.Struct("<8sqq")


def dump_array(path, array, magic: bytes) -> None:
    a = np.asarray(array, dtype="<f8")
    if a.ndim != 2:
        raise ValueError("only 2-d arrays can be dumped")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, a.shape[0], a.shape[1]))
        fh.write(np.ascontiguousarray(a).tobytes())


def load_array(path, magic: bytes | None = None) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        found, rows, cols = _HEADER.unpack(head)
        if magic is not None and found != magic:
            raise ValueError(f"{path}: bad magic {found!r}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols).astype(float)


def dump_increments(path, table) -> None:
    """Rows are noise modes, columns are time steps."""
    dump_array(path, table.increments, INCREMENT_MAGIC)


def dump_trajectory(path, trajectory) -> None:
    """Rows are spatial unknowns (modes or nodes), columns are grid times."""
    dump_array(path, np.asarray(trajectory).T, TRAJECTORY_MAGIC)
