"""File formats: FSEQ frame stacks, CSV frame directories, waveform CSV/JSON and map exports."""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .signal_core import FrameSequence

__all__ = [
    "FSEQ_MAGIC",
    "read_fseq",
    "write_fseq",
    "read_csv_frames",
    "read_frames",
    "write_waveform",
    "read_waveform",
    "write_grid_csv",
    "write_pgm",
]

FSEQ_MAGIC = b"FSEQ"
FSEQ_VERSION = 1
_HEADER = struct.Struct("<4sIIIId")


def write_fseq(path, frames: FrameSequence) -> None:
    data = np.ascontiguousarray(frames.frames, dtype="<f4")
    n, rows, cols = data.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FSEQ_MAGIC, FSEQ_VERSION, n, rows, cols, float(frames.fps)))
        fh.write(data.tobytes())


def read_fseq(path) -> FrameSequence:
    """Read an FSEQ v1 file; truncation is reported with the failing byte offset."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated header at byte offset {len(raw)} (need {_HEADER.size})")
    magic, version, n, rows, cols, fps = _HEADER.unpack_from(raw)
    if magic != FSEQ_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r} at byte offset 0")
    if version != FSEQ_VERSION:
        raise DataError(f"{path}: unsupported FSEQ version {version} at byte offset 4")
    expected = _HEADER.size + 4 * n * rows * cols
    if len(raw) < expected:
        raise DataError(
            f"{path}: truncated payload at byte offset {len(raw)}; expected {expected} bytes"
        )
    if len(raw) > expected:
        raise DataError(f"{path}: {len(raw) - expected} trailing bytes after offset {expected}")
    data = np.frombuffer(raw, dtype="<f4", count=n * rows * cols, offset=_HEADER.size)
    return FrameSequence(data.reshape(n, rows, cols).astype(float), fps)


def read_csv_frames(directory, fps: float) -> FrameSequence:
    """One CSV grid per frame, ordered by filename."""
    files = sorted(Path(directory).glob("*.csv"))
    if not files:
        raise DataError(f"{directory}: no CSV frames found")
    frames = []
    for f in files:
        try:
            frames.append(np.loadtxt(f, delimiter=",", ndmin=2))
        except ValueError as exc:
            raise DataError(f"{f}: {exc}") from exc
    shapes = {fr.shape for fr in frames}
    if len(shapes) != 1:
        raise DataError(f"{directory}: frames have differing shapes {sorted(shapes)}")
    return FrameSequence(np.stack(frames), fps)


def read_frames(path, fps: float | None = None) -> FrameSequence:
    path = Path(path)
    if path.is_dir():
        if fps is None:
            raise DataError(f"{path}: CSV frame directories need an explicit fps")
        return read_csv_frames(path, fps)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    return read_fseq(path)


def write_waveform(path, samples, fps: float, sidecar: dict | None = None) -> None:
    """Write ``t_seconds,value`` CSV and, if given, a JSON sidecar next to it."""
    path = Path(path)
    samples = np.asarray(samples, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_seconds", "value"])
        for i, v in enumerate(samples):
            w.writerow([repr(i / fps), repr(float(v))])
    if sidecar is not None:
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def read_waveform(path) -> tuple[np.ndarray, float]:
    """Read a ``t_seconds,value`` CSV; returns ``(samples, fps)``."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if data.shape[0] < 2 or data.shape[1] != 2:
        raise DataError(f"{path}: expected two columns and at least two rows")
    dt = np.diff(data[:, 0])
    if np.any(dt <= 0):
        raise DataError(f"{path}: time column is not increasing")
    return data[:, 1].copy(), float(1.0 / np.median(dt))


def write_grid_csv(path, grid) -> None:
    np.savetxt(path, np.asarray(grid, dtype=float), delimiter=",", fmt="%.17g")


def write_pgm(path, grid) -> None:
    """8-bit binary PGM heatmap, min mapped to 0 and max to 255."""
    g = np.asarray(grid, dtype=float)
    lo, hi = g.min(), g.max()
    scaled = np.zeros_like(g) if hi <= lo else (g - lo) / (hi - lo) * 255.0
    pixels = np.rint(scaled).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{g.shape[1]} {g.shape[0]}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
