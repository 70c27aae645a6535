"""Frame ingestion, blockwise downsampling, absorbance and detrending.

The functions here turn a stack of single-channel intensity frames into the
set of detrended per-region absorbance signals that the priors and the
fusion step consume.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg, sparse

from .errors import DataError, InvalidConfigError

__all__ = [
    "FrameSequence",
    "RegionGrid",
    "RegionSignal",
    "DetrendConfig",
    "downsample_blockwise",
    "to_absorbance",
    "detrend",
    "detrend_series",
    "detrend_regions",
    "region_absorbance",
    "extract_region_signals",
    "thread_count",
]

logger = logging.getLogger(__name__)

# Regions are processed in fixed-size chunks so that the arithmetic seen by
# each region never depends on how many worker threads are available.
_CHUNK = 64


def thread_count(threads: int | None = None) -> int:
    """Resolve the worker count, honouring ``PULSEFUSION_THREADS``."""
    if threads is None:
        env = os.environ.get("PULSEFUSION_THREADS", "").strip()
        threads = int(env) if env else 1
    return max(1, int(threads))


@dataclass
class FrameSequence:
    """Ordered stack of single-channel frames, shape ``(time, rows, cols)``.

    ``kind`` is ``"intensity"`` for raw camera values (must be non-negative)
    or ``"absorbance"`` once converted. ``clamped`` counts samples raised to
    the clamp floor during absorbance conversion.
    """

    frames: np.ndarray
    fps: float
    exposure_note: str = ""
    kind: str = "intensity"
    clamped: int = 0

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 3:
            raise DataError(f"frames must be 3-D (time, rows, cols), got shape {frames.shape}")
        if frames.shape[0] < 2:
            raise DataError("at least 2 frames are required")
        if frames.shape[1] < 1 or frames.shape[2] < 1:
            raise DataError(f"empty frame dimensions {frames.shape[1:]}")
        if not np.isfinite(self.fps) or self.fps <= 0:
            raise InvalidConfigError(f"fps must be positive, got {self.fps}")
        if not np.all(np.isfinite(frames)):
            raise DataError("frames contain non-finite values")
        if self.kind == "intensity" and np.any(frames < 0):
            raise DataError("intensity frames must be non-negative")
        self.frames = frames
        self.fps = float(self.fps)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.frames.shape[1], self.frames.shape[2]


@dataclass(frozen=True)
class RegionGrid:
    """Blockwise tiling of a frame; regions are indexed row-major."""

    block_rows: int = 6
    block_cols: int = 6

    def __post_init__(self):
        if self.block_rows < 1 or self.block_cols < 1:
            raise InvalidConfigError("block dimensions must be positive")

    def grid_shape(self, frame_shape: tuple[int, int]) -> tuple[int, int]:
        """Number of complete blocks along each axis (partial blocks dropped)."""
        rows, cols = frame_shape
        if self.block_rows > rows or self.block_cols > cols:
            raise InvalidConfigError(
                f"block {self.block_rows}x{self.block_cols} exceeds frame {rows}x{cols}"
            )
        return rows // self.block_rows, cols // self.block_cols

    def region_index(self, row: int, col: int, grid_cols: int) -> int:
        return row * grid_cols + col

    def region_position(self, index: int, grid_cols: int) -> tuple[int, int]:
        return divmod(index, grid_cols)


@dataclass
class RegionSignal:
    region_id: int
    samples: np.ndarray
    fps: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if not np.all(np.isfinite(self.samples)):
            raise DataError(f"region {self.region_id}: non-finite samples")


@dataclass(frozen=True)
class DetrendConfig:
    """Smoothness-prior detrending; ``lam`` weights the second-difference penalty."""

    lam: float = 300.0
    clamp_fraction: float = 1e-6

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidConfigError(f"detrend lambda must be > 0, got {self.lam}")
        if not self.clamp_fraction > 0:
            raise InvalidConfigError("clamp_fraction must be > 0")


def downsample_blockwise(frames: FrameSequence, block: RegionGrid) -> FrameSequence:
    """Average non-overlapping ``block`` tiles of every frame.

    Trailing rows/columns that do not fill a whole block are dropped.
    """
    n_r, n_c = block.grid_shape(frames.frame_shape)
    br, bc = block.block_rows, block.block_cols
    data = np.asarray(frames.frames, dtype=float)[:, : n_r * br, : n_c * bc]
    data = data.reshape(frames.n_frames, n_r, br, n_c, bc).mean(axis=(2, 4))
    return FrameSequence(data, frames.fps, frames.exposure_note, frames.kind, frames.clamped)


def to_absorbance(intensity: FrameSequence, clamp_fraction: float = 1e-6) -> FrameSequence:
    """Convert intensities to absorbance, ``-ln(intensity)``.

    Non-positive samples are clamped to ``clamp_fraction * max(intensity)``
    and counted in the result's ``clamped`` attribute.
    """
    if intensity.kind != "intensity":
        raise DataError("input is already absorbance")
    data = np.asarray(intensity.frames, dtype=float)
    per_frame_max = data.reshape(data.shape[0], -1).max(axis=1)
    if np.any(per_frame_max <= 0):
        bad = int(np.flatnonzero(per_frame_max <= 0)[0])
        raise DataError(f"frame {bad} is all zero; absorbance undefined")
    floor = clamp_fraction * data.max()
    low = data <= 0
    n_low = int(low.sum())
    if n_low:
        logger.warning("clamped %d non-positive intensity samples to %.3g", n_low, floor)
        data = np.where(low, floor, data)
    return FrameSequence(-np.log(data), intensity.fps, intensity.exposure_note,
                         "absorbance", intensity.clamped + n_low)


@lru_cache(maxsize=32)
def _smoothness_system(n: int, lam: float) -> np.ndarray:
    """Upper banded form of ``I + lam**2 * D2.T @ D2`` for ``solveh_banded``."""
    d2 = sparse.diags([1.0, -2.0, 1.0], [0, 1, 2], shape=(n - 2, n))
    k = (d2.T @ d2).todia()
    ab = np.zeros((3, n))
    ab[2] = 1.0 + lam**2 * k.diagonal(0)
    ab[1, 1:] = lam**2 * k.diagonal(1)
    ab[0, 2:] = lam**2 * k.diagonal(2)
    ab.setflags(write=False)
    return ab


def _detrend_columns(x: np.ndarray, lam: float) -> np.ndarray:
    """Detrend every column of ``x`` (time along axis 0)."""
    n = x.shape[0]
    # Constants lie in the null space of D2, so removing the mean first is
    # exact and keeps the solve well scaled.
    centred = x - x.mean(axis=0)
    trend = linalg.solveh_banded(_smoothness_system(n, float(lam)), centred, check_finite=False)
    # The exact trend of a zero-mean series has zero mean; re-centring only
    # removes solver round-off, which grows with lam**2.
    return centred - (trend - trend.mean(axis=0))


def detrend_series(x, lam: float = 300.0) -> np.ndarray:
    """Return ``x`` minus its smoothness-prior trend.

    The trend solves ``(I + lam**2 D2'D2) trend = x`` with ``D2`` the
    second-difference operator. Polynomials of degree <= 1 are pure trend.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DataError("detrend expects a 1-D series")
    if x.size < 3:
        raise DataError(f"detrend needs at least 3 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DataError("detrend input contains non-finite values")
    if not lam > 0:
        raise InvalidConfigError(f"detrend lambda must be > 0, got {lam}")
    return _detrend_columns(x[:, None], lam)[:, 0]


def detrend(signal, cfg: DetrendConfig = DetrendConfig(), fps: float = 60.0,
            region_id: int = 0) -> RegionSignal:
    """Detrend a raw absorbance series into a :class:`RegionSignal`."""
    if isinstance(signal, RegionSignal):
        fps, region_id, signal = signal.fps, signal.region_id, signal.samples
    return RegionSignal(region_id, detrend_series(signal, cfg.lam), fps)


def region_absorbance(frames: FrameSequence, grid: RegionGrid,
                      clamp_fraction: float = 1e-6) -> FrameSequence:
    """Blockwise mean intensity converted to absorbance, at region resolution."""
    return to_absorbance(downsample_blockwise(frames, grid), clamp_fraction)


def detrend_regions(absorbance: np.ndarray, lam: float, threads: int | None = None) -> np.ndarray:
    """Detrend a ``(time, n_regions)`` matrix column by column.

    Columns are split into fixed chunks; the thread count only changes how
    chunks are scheduled, never the per-column arithmetic.
    """
    x = np.asarray(absorbance, dtype=float)
    if x.shape[0] < 3:
        raise DataError(f"detrend needs at least 3 samples, got {x.shape[0]}")
    bad = ~np.all(np.isfinite(x), axis=0)
    if np.any(bad):
        raise DataError(f"region {int(np.flatnonzero(bad)[0])}: non-finite absorbance")
    chunks = [slice(i, min(i + _CHUNK, x.shape[1])) for i in range(0, x.shape[1], _CHUNK)]
    out = np.empty_like(x)

    def work(sl):
        out[:, sl] = _detrend_columns(x[:, sl], lam)

    n_workers = min(thread_count(threads), len(chunks))
    if n_workers <= 1:
        for sl in chunks:
            work(sl)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(work, chunks))
    return out


def extract_region_signals(frames: FrameSequence, grid: RegionGrid = RegionGrid(),
                           cfg: DetrendConfig = DetrendConfig(),
                           threads: int | None = None) -> list[RegionSignal]:
    """One detrended absorbance signal per grid region, in region-index order."""
    absorb = region_absorbance(frames, grid, cfg.clamp_fraction)
    n_t = absorb.n_frames
    matrix = detrend_regions(absorb.frames.reshape(n_t, -1), cfg.lam, threads)
    return [RegionSignal(i, matrix[:, i], frames.fps) for i in range(matrix.shape[1])]
