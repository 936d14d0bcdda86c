"""Minimal binary little-endian PLY point cloud I/O (double precision)."""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .jsonutil import atomic_write_bytes

_HEADER = (
    "ply\n"
    "format binary_little_endian 1.0\n"
    "element vertex {count}\n"
    "property double x\n"
    "property double y\n"
    "property double z\n"
    "end_header\n"
)


def write_ply(path: str | Path, points: np.ndarray) -> None:
    pts = np.ascontiguousarray(np.asarray(points, dtype="<f8"))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got {pts.shape}")
    header = _HEADER.format(count=pts.shape[0]).encode("ascii")
    atomic_write_bytes(path, header + pts.tobytes())


def read_ply(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    end = data.index(b"end_header\n") + len(b"end_header\n")
    header = data[:end].decode("ascii")
    count = 0
    for line in header.splitlines():
        if line.startswith("element vertex"):
            count = int(line.split()[-1])
    if "format binary_little_endian" not in header:
        raise ValueError(f"{path}: unsupported PLY format")
    body = data[end:end + count * 24]
    if len(body) != count * 24:
        raise ValueError(f"{path}: truncated vertex data")
    flat = struct.unpack(f"<{count * 3}d", body)
    return np.asarray(flat, dtype=np.float64).reshape(count, 3)
