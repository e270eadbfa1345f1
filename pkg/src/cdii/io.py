"""Grid field files and PGM snapshots.

A grid field file is a 25-byte ASCII header ``gridfield2 <nx> <ny> <nc>\\n``
(fields right-aligned to widths 5, 5, 1) followed by little-endian float64
values, node-major in ``(i, j)`` order with components interleaved.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

MAGIC = "gridfield2"
HEADER_LEN = 25


class FormatError(ValueError):
    pass


def _header(nx: int, ny: int, nc: int) -> bytes:
    if not (0 < nx <= 99999 and 0 < ny <= 99999 and 0 < nc <= 9):
        raise FormatError(f"dimensions out of range: {nx}, {ny}, {nc}")
    return f"{MAGIC} {nx:5d} {ny:5d} {nc:1d}\n".encode("ascii")


def encode_field(field: np.ndarray) -> bytes:
    arr = np.asarray(field, dtype=float)
    if arr.ndim == 2:
        nodes = arr[:, :, None]
    elif arr.ndim == 3:
        nodes = np.moveaxis(arr, 0, -1)
    else:
        raise FormatError(f"expected a scalar (nx, ny) or vector (nc, nx, ny) field, got {arr.shape}")
    if not np.all(np.isfinite(nodes)):
        raise FormatError("refusing to write non-finite values")
    nx, ny, nc = nodes.shape
    return _header(nx, ny, nc) + np.ascontiguousarray(nodes, dtype="<f8").tobytes()


def decode_field(raw: bytes) -> np.ndarray:
    head = raw[:HEADER_LEN]
    try:
        text = head.decode("ascii")
    except UnicodeDecodeError as exc:
        raise FormatError("header is not ASCII") from exc
    parts = text.split()
    if len(head) < HEADER_LEN or not text.endswith("\n") or len(parts) != 4 or parts[0] != MAGIC:
        raise FormatError(f"malformed header {head!r}")
    try:
        nx, ny, nc = (int(p) for p in parts[1:])
    except ValueError as exc:
        raise FormatError(f"malformed header {head!r}") from exc
    expected = nx * ny * nc * 8
    payload = raw[HEADER_LEN:]
    if len(payload) != expected:
        raise FormatError(f"payload has {len(payload)} bytes, expected {expected}")
    nodes = np.frombuffer(payload, dtype="<f8").reshape(nx, ny, nc).astype(float)
    return nodes[:, :, 0].copy() if nc == 1 else np.ascontiguousarray(np.moveaxis(nodes, -1, 0))


def write_field(path, field: np.ndarray) -> None:
    Path(path).write_bytes(encode_field(field))


def read_field(path) -> np.ndarray:
    return decode_field(Path(path).read_bytes())


def write_pgm(path, field: np.ndarray, vmin: float | None = None, vmax: float | None = None) -> None:
    """16-bit binary PGM of a scalar field, y axis pointing up.

    Values map linearly from ``[vmin, vmax]`` (data range by default) to
    ``[0, 65535]``; a constant field becomes mid-gray.
    """
    arr = np.asarray(field, dtype=float)
    lo = np.nanmin(arr) if vmin is None else vmin
    hi = np.nanmax(arr) if vmax is None else vmax
    if hi > lo:
        gray = np.rint((np.clip(arr, lo, hi) - lo) / (hi - lo) * 65535)
    else:
        gray = np.full(arr.shape, 32768.0)
    img = gray.T[::-1].astype(">u2")
    h, w = img.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n65535\n".encode("ascii") + img.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read back a 16-bit PGM written by :func:`write_pgm` (image orientation)."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise FormatError("not a binary PGM")
    w, h = (int(t) for t in parts[1].split())
    return np.frombuffer(parts[3], dtype=">u2").reshape(h, w)


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
