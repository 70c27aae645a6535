"""Weighted-histogram posterior and the Bayesian least-squares fused waveform.

The posterior over the unknown pulse waveform is supported on the observed
region signals, each carrying its combined prior weight. Its mean, the
least-squares estimate, is therefore a weighted average of region signals.
:func:`fuse` computes that average directly; :func:`histogram_posterior`
and :func:`posterior_mean` evaluate the posterior explicitly and serve as
an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InvalidConfigError, NoPulsatileRegionError
from .signal_core import RegionSignal, detrend_regions, region_absorbance
from .spatial import PriorMap, combine_priors, scene_gradient, spatial_prior
from .spectral import SpectralSummary, harmonic_prior, noise_prior, summarize

__all__ = [
    "FusionConfig",
    "FusedWaveform",
    "posterior_weights",
    "fuse",
    "histogram_posterior",
    "posterior_mean",
    "PreparedScene",
    "prepare_scene",
    "compute_priors",
    "fuse_scene",
    "extract_pulse",
    "pairwise_sum",
]


@dataclass(frozen=True)
class FusionConfig:
    """Fusion settings.

    window_s
        Analysis window length in seconds; ``None`` fuses the whole
        recording with a single set of weights.
    min_harmonic
        Regions whose harmonic energy ``h`` falls below this value are
        treated as non-pulsatile and receive zero weight.
    negligible_ratio
        Regions with weight below ``negligible_ratio * max(W)`` are not
        counted in ``n_regions_used`` (they still contribute).
    """

    window_s: float | None = None
    min_harmonic: float = 0.3
    negligible_ratio: float = 1e-4

    def __post_init__(self):
        if self.window_s is not None and not self.window_s > 0:
            raise InvalidConfigError("window_s must be > 0 or None")
        if not 0 <= self.min_harmonic <= 1:
            raise InvalidConfigError("min_harmonic must lie in [0, 1]")
        if not 0 <= self.negligible_ratio < 1:
            raise InvalidConfigError("negligible_ratio must lie in [0, 1)")


@dataclass
class FusedWaveform:
    samples: np.ndarray
    fps: float
    total_weight: float
    n_regions_used: int
    weights: np.ndarray | None = None
    priors: list = field(default_factory=list)
    summaries: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.fps


def posterior_weights(priors) -> np.ndarray:
    """Normalize combined priors ``W`` into posterior weights summing to one.

    ``priors`` may be a :class:`PriorMap` or any array of non-negative
    weights; the result is flat, in region-index order.
    """
    w = np.asarray(priors.w_combined if isinstance(priors, PriorMap) else priors, dtype=float).ravel()
    if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DataError("prior weights must be finite and non-negative")
    total = pairwise_sum(w)
    if not total > 0:
        raise NoPulsatileRegionError("all region priors are zero; no pulsatile region found")
    return w / total


def pairwise_sum(rows):
    """Sum along the first axis by a fixed pairwise tree in index order."""
    rows = list(rows)
    if not rows:
        raise ValueError("nothing to sum")
    while len(rows) > 1:
        paired = [rows[i] + rows[i + 1] for i in range(0, len(rows) - 1, 2)]
        if len(rows) % 2:
            paired.append(rows[-1])
        rows = paired
    return rows[0]


def _as_matrix(signals) -> np.ndarray:
    if isinstance(signals, np.ndarray):
        x = np.asarray(signals, dtype=float)
        return x[None] if x.ndim == 1 else x
    rows = [np.asarray(s.samples if isinstance(s, RegionSignal) else s, dtype=float) for s in signals]
    if not rows:
        raise DataError("no signals to fuse")
    lengths = {r.size for r in rows}
    if len(lengths) != 1:
        raise DataError(f"signals have unequal lengths {sorted(lengths)}")
    return np.vstack(rows)


def fuse(signals, weights, fps: float | None = None) -> FusedWaveform:
    """Posterior-mean waveform: the weighted sum of region signals.

    ``signals`` is a sequence of :class:`RegionSignal` (or a
    ``(n_regions, n_t)`` array) and ``weights`` the normalized posterior
    weights in the same order.
    """
    x = _as_matrix(signals)
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != x.shape[0]:
        raise DataError(f"{x.shape[0]} signals but {w.size} weights")
    if fps is None:
        first = signals[0] if not isinstance(signals, np.ndarray) else None
        fps = first.fps if isinstance(first, RegionSignal) else 1.0
    z = pairwise_sum(w[:, None] * x)
    return FusedWaveform(z, float(fps), float(pairwise_sum(w)), int(np.count_nonzero(w)), weights=w)


def histogram_posterior(signals, priors) -> tuple[np.ndarray, np.ndarray]:
    """Discrete posterior over observed states.

    Identical signals share one histogram bin. Returns ``(states, probs)``
    with ``probs`` summing to one.
    """
    x = _as_matrix(signals)
    w = np.asarray(priors, dtype=float).ravel()
    if w.size != x.shape[0]:
        raise DataError(f"{x.shape[0]} signals but {w.size} weights")
    states, inverse = np.unique(x, axis=0, return_inverse=True)
    mass = np.zeros(states.shape[0])
    for k, wi in zip(np.ravel(inverse), w):
        mass[k] += wi
    y = math.fsum(mass)
    if not y > 0:
        raise NoPulsatileRegionError("posterior normalizer is zero")
    return states, mass / y


def posterior_mean(states, probs) -> np.ndarray:
    """Expectation of the state under a discrete posterior, summed exactly per sample."""
    states = np.asarray(states, dtype=float)
    probs = np.asarray(probs, dtype=float)
    return np.array([math.fsum(p * s for p, s in zip(probs, states[:, t]))
                     for t in range(states.shape[1])])


@dataclass
class PreparedScene:
    """Detrended region signals of one recording, ready for prior evaluation.

    Spectral summaries do not depend on the prior sharpness parameters, so
    they are cached here and reused across hyperparameter settings.
    """

    absorbance: np.ndarray
    signals: np.ndarray
    fps: float
    clamped: int = 0
    _summaries: dict = field(default_factory=dict, repr=False)

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.absorbance.shape[1], self.absorbance.shape[2]

    def summaries(self, sl: slice, spectral) -> list[SpectralSummary]:
        key = (sl.start, sl.stop, spectral.delta_f, spectral.hr_min, spectral.hr_max,
               spectral.taper, spectral.fundamental_band_noise)
        if key not in self._summaries:
            block = self.signals[sl]
            self._summaries[key] = [summarize(RegionSignal(i, block[:, i], self.fps), spectral)
                                    for i in range(block.shape[1])]
        return self._summaries[key]


def prepare_scene(frames, config=None, threads: int | None = None) -> PreparedScene:
    """Absorbance at region resolution and its detrended ``(n_t, n_regions)`` signals."""
    from .config import PipelineConfig

    config = PipelineConfig() if config is None else config
    absorb = region_absorbance(frames, config.grid, config.detrend.clamp_fraction)
    n_t = absorb.n_frames
    matrix = detrend_regions(absorb.frames.reshape(n_t, -1), config.detrend.lam, threads)
    return PreparedScene(absorb.frames, matrix, frames.fps, absorb.clamped)


def compute_priors(summaries: list[SpectralSummary], absorb_mean: np.ndarray, config) -> PriorMap:
    """Spectral and spatial priors on the grid of ``absorb_mean``.

    ``absorb_mean`` is the ``(rows, cols)`` scene the spatial prior is taken
    from; ``summaries`` follow region-index order.
    """
    grid = np.asarray(absorb_mean).shape
    h = np.array([s.h for s in summaries]).reshape(grid)
    q = np.array([s.q for s in summaries]).reshape(grid)
    w_spat = spatial_prior(scene_gradient(absorb_mean), config.spatial)
    priors = combine_priors(harmonic_prior(h, config.spectral), noise_prior(q, config.spectral),
                            w_spat, config.spatial)
    priors.flags["degenerate_regions"] = int(sum(s.degenerate for s in summaries))
    return priors


def _window_slices(n_t: int, fps: float, window_s: float | None) -> list[slice]:
    if window_s is None:
        return [slice(0, n_t)]
    length = int(round(window_s * fps))
    if length < 8:
        raise InvalidConfigError(f"window of {window_s}s holds fewer than 8 samples")
    starts = list(range(0, n_t, length))
    # A trailing partial window is absorbed into its predecessor.
    if len(starts) > 1 and n_t - starts[-1] < length:
        starts.pop()
    return [slice(s, starts[i + 1] if i + 1 < len(starts) else n_t) for i, s in enumerate(starts)]


def fuse_scene(scene: PreparedScene, config=None) -> FusedWaveform:
    """Priors, posterior weights and fused waveform for a prepared scene."""
    from .config import PipelineConfig

    config = PipelineConfig() if config is None else config
    n_t, n_regions = scene.signals.shape
    out = np.zeros(n_t)
    weights, priors_list, summaries_list, windows = [], [], [], []
    total_weight, used = 0.0, 0
    for sl in _window_slices(n_t, scene.fps, config.fusion.window_s):
        summaries = scene.summaries(sl, config.spectral)
        priors = compute_priors(summaries, scene.absorbance[sl].mean(axis=0), config)
        priors_list.append(priors)
        summaries_list.append(summaries)
        h = np.array([s.h for s in summaries])
        gated = np.where(h >= config.fusion.min_harmonic, priors.w_combined.ravel(), 0.0)
        info = {"start": sl.start, "stop": sl.stop, "failed": False, "max_h": float(h.max())}
        windows.append(info)
        try:
            w = posterior_weights(gated)
        except NoPulsatileRegionError:
            info["failed"] = True
            weights.append(np.zeros(n_regions))
            continue
        out[sl] = fuse(scene.signals[sl].T, w, scene.fps).samples
        n_used = int(np.count_nonzero(gated >= config.fusion.negligible_ratio * gated.max()))
        info.update(total_weight=float(pairwise_sum(gated)), n_regions_used=n_used)
        total_weight += info["total_weight"]
        used = max(used, n_used)
        weights.append(w)

    if all(win["failed"] for win in windows):
        best = max(win["max_h"] for win in windows)
        raise NoPulsatileRegionError(
            f"no region reached harmonic energy {config.fusion.min_harmonic} (best {best:.3g})"
        )
    diagnostics = {
        "windows": windows,
        "grid_shape": list(scene.grid_shape),
        "clamped_samples": scene.clamped,
        "excluded_regions": int(sum(np.count_nonzero(w == 0) for w in weights)),
    }
    return FusedWaveform(out, scene.fps, total_weight, used,
                         weights=np.vstack(weights) if len(weights) > 1 else weights[0],
                         priors=priors_list, summaries=summaries_list, diagnostics=diagnostics)


def extract_pulse(frames, config=None, threads: int | None = None) -> FusedWaveform:
    """Run the full pipeline on intensity frames and return the fused waveform.

    Raises :class:`NoPulsatileRegionError` when no region passes the
    pulsatility gate in any window.
    """
    return fuse_scene(prepare_scene(frames, config, threads), config)
