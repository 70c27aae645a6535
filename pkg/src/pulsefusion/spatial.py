"""Gradient-based spatial prior and the neighbourhood-infimum combination."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import minimum_filter

from .errors import DataError, InvalidConfigError
from .spectral import PRIOR_FLOOR

__all__ = ["SpatialConfig", "PriorMap", "scene_gradient", "spatial_prior", "combine_priors"]


@dataclass(frozen=True)
class SpatialConfig:
    alpha_l: float = 1.0
    neighborhood_radius: int = 1

    def __post_init__(self):
        if not self.alpha_l > 0:
            raise InvalidConfigError("alpha_l must be > 0")
        if self.neighborhood_radius < 0 or int(self.neighborhood_radius) != self.neighborhood_radius:
            raise InvalidConfigError("neighborhood_radius must be a non-negative integer")


@dataclass
class PriorMap:
    """Per-region prior maps on the ``(rows, cols)`` region grid."""

    w_harm: np.ndarray
    w_nmag: np.ndarray
    w_spat: np.ndarray
    w_combined: np.ndarray
    neighborhood_radius: int
    flags: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.w_combined.shape

    @property
    def product(self) -> np.ndarray:
        return self.w_harm * self.w_nmag * self.w_spat


def scene_gradient(scene) -> np.ndarray:
    """Gradient magnitude of the temporal-mean frame.

    ``scene`` is either a :class:`~pulsefusion.signal_core.FrameSequence` or a
    ``(time, rows, cols)`` array already at region resolution. Central
    differences inside, one-sided differences at the borders; an axis of
    length one contributes no gradient.
    """
    frames = getattr(scene, "frames", scene)
    frames = np.asarray(frames, dtype=float)
    if frames.ndim == 2:
        frames = frames[None]
    if frames.ndim != 3 or frames.shape[0] < 1:
        raise DataError("scene_gradient needs a (time, rows, cols) stack with at least one frame")
    mean = frames.mean(axis=0)
    gy = np.gradient(mean, axis=0) if mean.shape[0] > 1 else np.zeros_like(mean)
    gx = np.gradient(mean, axis=1) if mean.shape[1] > 1 else np.zeros_like(mean)
    return np.hypot(gx, gy)


def spatial_prior(grad_map, cfg: SpatialConfig = SpatialConfig()) -> np.ndarray:
    g = np.asarray(grad_map, dtype=float)
    if not np.all(np.isfinite(g)):
        raise DataError("gradient map contains non-finite values")
    return np.maximum(np.exp(-(g**2) / cfg.alpha_l), PRIOR_FLOOR)


def combine_priors(w_harm, w_nmag, w_spat, cfg: SpatialConfig = SpatialConfig()) -> PriorMap:
    """Per-region product of the priors followed by a Chebyshev-neighbourhood minimum.

    Neighbourhoods are truncated at the grid border.
    """
    w_harm, w_nmag, w_spat = (np.atleast_2d(np.asarray(w, dtype=float)) for w in (w_harm, w_nmag, w_spat))
    if not (w_harm.shape == w_nmag.shape == w_spat.shape):
        raise DataError(f"prior map shapes differ: {w_harm.shape}, {w_nmag.shape}, {w_spat.shape}")
    product = w_harm * w_nmag * w_spat
    r = int(cfg.neighborhood_radius)
    if r == 0:
        combined = product.copy()
    else:
        # Edge replication only repeats cells already inside the truncated
        # neighbourhood, so the minimum is unchanged by it.
        combined = minimum_filter(product, size=2 * r + 1, mode="nearest")
    flags = {"single_region": product.size == 1}
    return PriorMap(w_harm, w_nmag, w_spat, combined, r, flags)
