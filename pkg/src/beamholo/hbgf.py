"""HBGF binary grid files.

Layout: magic ``HBGF``, four little-endian u32 (rows, cols, channels,
dtype tag), then the row-major payload. ``channels`` is 1 for real grids and
2 for complex grids stored as interleaved (re, im). Dtype tag 0 is float32,
1 is float64.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import GridFormatError

MAGIC = b"HBGF"
_HEADER = struct.Struct("<4sIIII")
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def encode(grid, dtype: str = "f64") -> bytes:
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise GridFormatError(f"HBGF stores 2D grids, got shape {grid.shape}")
    tag = {"f32": 0, "f64": 1}[dtype]
    rows, cols = grid.shape
    if np.iscomplexobj(grid):
        payload = np.stack([grid.real, grid.imag], axis=-1)
        channels = 2
    else:
        payload = grid
        channels = 1
    payload = np.ascontiguousarray(payload, dtype=_DTYPES[tag])
    return _HEADER.pack(MAGIC, rows, cols, channels, tag) + payload.tobytes()


def decode(buf: bytes) -> np.ndarray:
    if len(buf) < _HEADER.size:
        raise GridFormatError("truncated HBGF header")
    magic, rows, cols, channels, tag = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise GridFormatError(f"bad magic {magic!r}")
    if channels not in (1, 2) or tag not in _DTYPES:
        raise GridFormatError(f"unsupported channels={channels} dtype tag={tag}")
    dt = _DTYPES[tag]
    expected = rows * cols * channels * dt.itemsize
    body = buf[_HEADER.size :]
    if len(body) != expected:
        raise GridFormatError(f"payload has {len(body)} bytes, expected {expected}")
    arr = np.frombuffer(body, dtype=dt).reshape(rows, cols, channels)
    if channels == 1:
        return arr[..., 0].astype(dt.newbyteorder("="))
    return (arr[..., 0] + 1j * arr[..., 1]).astype(np.complex64 if tag == 0 else np.complex128)


def write(path, grid, dtype: str = "f64") -> Path:
    path = Path(path)
    path.write_bytes(encode(grid, dtype))
    return path


def read(path) -> np.ndarray:
    return decode(Path(path).read_bytes())
