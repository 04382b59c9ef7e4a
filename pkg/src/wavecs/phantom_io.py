"""Parametric phantoms, binary dataset formats and evaluation metrics.

All array files share the same layout: a fixed-size header starting with a
4-byte magic, then a little-endian row-major payload.  Volumes (WCSV) and
series (WCSS) store float32 on disk; coefficient files (WCSC) store float64;
pattern files (WCSH) store one byte per pattern entry.
"""

from __future__ import annotations

import csv
import os
import struct
import tempfile
import warnings
from dataclasses import dataclass, field

import numpy as np

from .curvelet import CurveletCoeffs, CurveletPlan, make_plan
from .errors import InvalidInputError, WavecsError
from .hadamard import SensingOperator, build_patterns

__all__ = [
    "BallPhantomSpec",
    "make_ball_phantom",
    "clock_phantom",
    "mse",
    "WcsIOError",
    "BadMagicError",
    "TruncatedFileError",
    "HeaderError",
    "write_volume",
    "read_volume",
    "write_series",
    "read_series",
    "write_coeffs",
    "read_coeffs",
    "write_patterns",
    "read_patterns",
    "read_array",
    "write_metrics_csv",
    "emit_image",
]

_MAX_ELEMENTS = 1 << 33  # dimension-overflow guard for untrusted headers


class WcsIOError(WavecsError, IOError):
    """Base class for dataset file errors."""


class BadMagicError(WcsIOError):
    """The file does not start with the expected magic bytes."""


class TruncatedFileError(WcsIOError):
    """The file ended before the declared payload was complete."""


class HeaderError(WcsIOError):
    """Header fields are inconsistent with the payload or out of range."""


# ---------------------------------------------------------------------------
# Phantoms and metrics


@dataclass(frozen=True)
class BallPhantomSpec:
    """A collection of balls on a voxel grid (centers in voxel units)."""

    grid: tuple[int, int, int]
    balls: tuple[tuple[tuple[float, float, float], float, float], ...]
    seed: int = 0

    def __post_init__(self):
        if len(self.grid) != 3 or min(self.grid) < 1:
            raise InvalidInputError("grid must be three positive dimensions")
        for i, (center, radius, amplitude) in enumerate(self.balls):
            if radius < 0 or amplitude <= 0:
                raise InvalidInputError(f"ball {i}: radius must be >= 0 and amplitude > 0")
            r = max(radius, 0.5)
            for c, n in zip(center, self.grid):
                if c - r < -0.5 or c + r > n - 0.5:
                    raise InvalidInputError(f"ball {i} does not fit inside the grid")


def make_ball_phantom(spec: BallPhantomSpec) -> np.ndarray:
    """Voxelize the union of balls; overlaps take the maximum amplitude.

    A radius below half a voxel is grown to cover the center voxel, so a
    zero-radius ball still produces a single-voxel source.
    """
    vol = np.zeros(spec.grid)
    grids = np.ogrid[0 : spec.grid[0], 0 : spec.grid[1], 0 : spec.grid[2]]
    for center, radius, amplitude in spec.balls:
        r = max(radius, 0.5)
        dist2 = sum((g - c) ** 2 for g, c in zip(grids, center))
        inside = dist2 <= r * r
        vol[inside] = np.maximum(vol[inside], amplitude)
    return vol


def clock_phantom(n: int = 64, seed: int = 0) -> BallPhantomSpec:
    """Twelve balls on a circle plus two radial hands, in a plane above the sensor.

    Deterministic desk-scale stand-in for a ball-collection source; scales
    with the grid size.
    """
    c = (n - 1) / 2.0
    depth = 0.22 * n
    ring_r = 0.32 * n
    balls = []
    for i in range(12):
        ang = 2.0 * np.pi * i / 12.0
        balls.append(
            (
                (c + ring_r * np.cos(ang), c + ring_r * np.sin(ang), depth),
                0.045 * n if i % 3 == 0 else 0.035 * n,
                1.0,
            )
        )
    # Hands: short toward 10 o'clock, long toward 2 o'clock.
    for direction, length in ((2.0 * np.pi * 10 / 12, 0.16 * n), (2.0 * np.pi * 2 / 12, 0.24 * n)):
        steps = max(int(length / (0.02 * n)), 2)
        for s in range(1, steps + 1):
            rr = length * s / steps
            balls.append(
                (
                    (c + rr * np.cos(direction), c + rr * np.sin(direction), depth),
                    0.025 * n,
                    1.0,
                )
            )
    return BallPhantomSpec(grid=(n, n, n), balls=tuple(balls), seed=seed)


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared difference."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


# ---------------------------------------------------------------------------
# Binary array formats

_VOLUME_HEADER = struct.Struct("<4sIIIddd")
_COEFFS_FIXED = struct.Struct("<4sIIIIII")
_PATTERN_HEADER = struct.Struct("<4sIII")


def _atomic_write(path: str, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".wcs-tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise TruncatedFileError(f"file ended while reading {what}")
    return data


def _check_dims(dims: tuple[int, ...]) -> int:
    total = 1
    for d in dims:
        if d < 1:
            raise HeaderError(f"non-positive dimension {d} in header")
        total *= d
    if total > _MAX_ELEMENTS:
        raise HeaderError(f"header dimensions {dims} overflow the element limit")
    return total


def _write_gridded(path: str, magic: bytes, array: np.ndarray, meta: tuple[float, float, float]) -> None:
    header = _VOLUME_HEADER.pack(magic, *array.shape, *meta)
    _atomic_write(path, header + np.ascontiguousarray(array, dtype="<f4").tobytes())


def _read_gridded(path: str, magic: bytes) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as fh:
        raw = _read_exact(fh, _VOLUME_HEADER.size, "header")
        got_magic, d0, d1, d2, dx, dt, c0 = _VOLUME_HEADER.unpack(raw)
        if got_magic != magic:
            raise BadMagicError(f"expected magic {magic!r}, found {got_magic!r}")
        total = _check_dims((d0, d1, d2))
        payload = _read_exact(fh, 4 * total, "payload")
        if fh.read(1):
            raise HeaderError("trailing bytes after payload")
    array = np.frombuffer(payload, dtype="<f4").reshape(d0, d1, d2).astype(np.float64)
    return array, {"dx": dx, "dt": dt, "c0": c0}


def write_volume(path: str, volume: np.ndarray, dx: float, dt: float, c0: float) -> None:
    """WCSV: header (magic, n1, n2, n3, dx, dt, c0) + float32 payload."""
    volume = np.asarray(volume)
    if volume.ndim != 3:
        raise InvalidInputError(f"expected a 3D volume, got shape {volume.shape}")
    _write_gridded(path, b"WCSV", volume, (dx, dt, c0))


def read_volume(path: str) -> tuple[np.ndarray, dict]:
    return _read_gridded(path, b"WCSV")


def write_series(path: str, series: np.ndarray, dx: float, dt: float, c0: float) -> None:
    """WCSS: header (magic, nt, n1, n2, dx, dt, c0) + float32 payload."""
    series = np.asarray(series)
    if series.ndim != 3:
        raise InvalidInputError(f"expected a series g[t, x1, x2], got shape {series.shape}")
    _write_gridded(path, b"WCSS", series, (dx, dt, c0))


def read_series(path: str) -> tuple[np.ndarray, dict]:
    return _read_gridded(path, b"WCSS")


def write_coeffs(path: str, coeffs: CurveletCoeffs) -> None:
    """WCSC: plan geometry (dims, scales, angle table, lf cutoffs) + float64 grids."""
    plan = coeffs.plan
    lf1, lf2 = plan.lf if plan.lf else (0, 0)
    fixed = _COEFFS_FIXED.pack(b"WCSC", plan.n1, plan.n2, plan.scales, lf1, lf2, len(plan.angles_per_scale))
    table = np.asarray(plan.angles_per_scale, dtype="<u4").tobytes()
    payload = plan.pack(coeffs).astype("<f8").tobytes()
    _atomic_write(path, fixed + table + payload)


def read_coeffs(path: str) -> CurveletCoeffs:
    """Rebuild the plan from the header and unpack the coefficient vector."""
    with open(path, "rb") as fh:
        raw = _read_exact(fh, _COEFFS_FIXED.size, "header")
        magic, n1, n2, scales, lf1, lf2, table_len = _COEFFS_FIXED.unpack(raw)
        if magic != b"WCSC":
            raise BadMagicError(f"expected magic b'WCSC', found {magic!r}")
        if table_len != scales or scales < 2:
            raise HeaderError(f"angle table length {table_len} inconsistent with {scales} scales")
        table = np.frombuffer(_read_exact(fh, 4 * table_len, "angle table"), dtype="<u4")
        body = fh.read()
    if table[0] != 1:
        raise HeaderError("coarse scale must have a single angle slot")
    try:
        plan = make_plan(n1, n2, scales, int(table[1]), lf1 or None, lf2 or None)
    except WavecsError as exc:
        raise HeaderError(f"header does not describe a constructible plan: {exc}") from exc
    if list(plan.angles_per_scale) != [int(v) for v in table]:
        raise HeaderError("angle table does not match the plan for these dimensions")
    expected = 8 * plan.total_coeffs
    if len(body) < expected:
        raise TruncatedFileError("file ended while reading coefficients")
    if len(body) > expected:
        raise HeaderError("trailing bytes after coefficient payload")
    return plan.unpack(np.frombuffer(body, dtype="<f8"))


def write_patterns(path: str, op: SensingOperator, seed: int) -> None:
    """WCSH: 16-byte header (magic, log2n, m, seed) + m*n pattern bytes."""
    header = _PATTERN_HEADER.pack(b"WCSH", op.log2n, op.m, seed)
    _atomic_write(path, header + build_patterns(op).tobytes())


def read_patterns(path: str) -> tuple[np.ndarray, int, int, int]:
    with open(path, "rb") as fh:
        raw = _read_exact(fh, _PATTERN_HEADER.size, "header")
        magic, log2n, m, seed = _PATTERN_HEADER.unpack(raw)
        if magic != b"WCSH":
            raise BadMagicError(f"expected magic b'WCSH', found {magic!r}")
        if log2n < 1 or log2n > 30:
            raise HeaderError(f"log2n {log2n} out of range")
        n = 1 << log2n
        _check_dims((m, n))
        payload = _read_exact(fh, m * n, "patterns")
        if fh.read(1):
            raise HeaderError("trailing bytes after patterns")
    patterns = np.frombuffer(payload, dtype=np.uint8).reshape(m, n)
    if not np.isin(patterns, (0, 1)).all():
        raise HeaderError("pattern payload contains bytes other than 0/1")
    return patterns, log2n, m, seed


_READERS = {b"WCSV": read_volume, b"WCSS": read_series, b"WCSC": read_coeffs, b"WCSH": read_patterns}


def read_array(path: str):
    """Dispatch on the file's magic to the matching reader."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    reader = _READERS.get(magic)
    if reader is None:
        raise BadMagicError(f"unknown magic {magic!r}")
    return reader(path)


def write_metrics_csv(path: str, rows: list[dict], fieldnames: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def emit_image(field: np.ndarray, path: str) -> None:
    """8-bit grayscale PGM with min-max normalization; NaNs map to 0."""
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise InvalidInputError(f"expected a 2D field, got shape {field.shape}")
    data = field.copy()
    bad = ~np.isfinite(data)
    if bad.any():
        warnings.warn(f"{bad.sum()} non-finite pixels set to 0 in {path}", RuntimeWarning, stacklevel=2)
        data[bad] = 0.0
    lo, hi = data.min(), data.max()
    if hi > lo:
        pixels = np.round(255.0 * (data - lo) / (hi - lo)).astype(np.uint8)
    else:
        pixels = np.full(data.shape, 128, dtype=np.uint8)
    header = f"P5\n{field.shape[1]} {field.shape[0]}\n255\n".encode("ascii")
    _atomic_write(path, header + pixels.tobytes())
