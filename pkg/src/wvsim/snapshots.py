"""Binary snapshot files and deterministic CSV output.

Snapshot layout (all little-endian):

    magic   6 bytes  b"WVSIM1"
    flags   u8       bit 0 set -> real-only payload
    ndim    u8       1 or 2
    n       u64 * ndim
    bounds  f64 * 2*ndim   (x_min, x_max) per axis
    time    f64
    payload row-major f64; complex data interleaved (re, im)

CSV files are written with shortest round-trip float repr so identical
data always produces identical bytes.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ConfigError
from .grid import SpatialGrid, WavefunctionGrid

MAGIC = b"WVSIM1"
FLAG_REAL_ONLY = 0x01


def _pack_header(grid: SpatialGrid, time_label: float, real_only: bool) -> bytes:
    parts = [MAGIC, struct.pack("<BB", FLAG_REAL_ONLY if real_only else 0, grid.ndim)]
    for n in grid.n_points:
        parts.append(struct.pack("<Q", n))
    for lo, hi in zip(grid.x_min, grid.x_max):
        parts.append(struct.pack("<dd", lo, hi))
    parts.append(struct.pack("<d", time_label))
    return b"".join(parts)


def write_wavefunction(path, psi: WavefunctionGrid):
    payload = np.ascontiguousarray(psi.amplitudes, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_pack_header(psi.grid, psi.time_label, real_only=False))
        fh.write(payload.tobytes())


def write_real_field(path, grid: SpatialGrid, values: np.ndarray, time_label: float = 0.0):
    payload = np.ascontiguousarray(values, dtype="<f8")
    if payload.shape != grid.shape:
        raise ConfigError("field shape does not match grid")
    with open(path, "wb") as fh:
        fh.write(_pack_header(grid, time_label, real_only=True))
        fh.write(payload.tobytes())


def read_snapshot(path):
    """Read a snapshot; returns (grid, values, time_label, real_only)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:6] != MAGIC:
        raise ConfigError(f"{path}: not a WVSIM1 snapshot")
    flags, ndim = struct.unpack_from("<BB", raw, 6)
    off = 8
    n_points = []
    for _ in range(ndim):
        (n,) = struct.unpack_from("<Q", raw, off)
        n_points.append(int(n))
        off += 8
    mins, maxs = [], []
    for _ in range(ndim):
        lo, hi = struct.unpack_from("<dd", raw, off)
        mins.append(lo)
        maxs.append(hi)
        off += 16
    (time_label,) = struct.unpack_from("<d", raw, off)
    off += 8
    grid = SpatialGrid(tuple(n_points), tuple(mins), tuple(maxs))
    count = int(np.prod(n_points))
    real_only = bool(flags & FLAG_REAL_ONLY)
    dtype = "<f8" if real_only else "<c16"
    values = np.frombuffer(raw, dtype=dtype, count=count, offset=off).reshape(grid.shape).copy()
    return grid, values, float(time_label), real_only


def read_wavefunction(path) -> WavefunctionGrid:
    grid, values, t, real_only = read_snapshot(path)
    if real_only:
        values = values.astype(np.complex128)
    return WavefunctionGrid(grid, values, t)


def format_number(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, columns: dict[str, np.ndarray]):
    """Write named columns of equal length as a deterministic CSV file."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    if arrays and any(len(a) != len(arrays[0]) for a in arrays):
        raise ConfigError("CSV columns must have equal length")
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        for row in range(len(arrays[0]) if arrays else 0):
            fh.write(",".join(format_number(a[row]) for a in arrays) + "\n")
