"""Fidelity metrics, Bland-Altman agreement and hyperparameter grid search."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .cardiac import CardiacConfig, estimate_hr
from .errors import DataError, NoEstimateError, NoPulsatileRegionError, PulseFusionError
from .spectral import SpectralConfig, SpectralSummary, harmonic_mask, spectral_power
from .signal_core import RegionSignal

__all__ = [
    "MetricsReport",
    "BlandAltman",
    "GridSearchResult",
    "distribution_entropy",
    "spectral_entropy",
    "lag_correlation",
    "bland_altman",
    "in_band_mass",
    "harmonic_ratio",
    "tuning_objective",
    "grid_search",
    "DEFAULT_GRID",
]

# In-band mass is capped here so the score m / (1 - m) stays finite.
_MASS_CEILING = 1.0 - 1e-9

DEFAULT_GRID = {
    "alpha_h": [0.1, 0.25, 0.5, 1.0],
    "alpha_q": [0.001, 0.01, 0.1],
    "alpha_l": [0.1, 1.0, 10.0],
    "radius": [0, 1, 2],
}


@dataclass
class MetricsReport:
    spectral_entropy: float
    normalized_entropy: float
    pearson_rho: float | None = None
    best_lag_s: float | None = None
    hr_pred: float | None = None
    hr_true: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class BlandAltman:
    mean_error: float
    sd_error: float
    limits: tuple[float, float]
    pairs: list[tuple[float, float]]
    r_squared: float

    def to_dict(self) -> dict:
        return {"mean_error": self.mean_error, "sd_error": self.sd_error,
                "limits": list(self.limits), "r_squared": self.r_squared,
                "pairs": [list(p) for p in self.pairs]}


@dataclass
class GridSearchResult:
    best_params: dict
    objective: float
    table: list[dict] = field(default_factory=list)


def distribution_entropy(z) -> float:
    """Shannon entropy in nats of a normalized distribution; zero bins add nothing."""
    z = np.asarray(z, dtype=float)
    nz = z[z > 0]
    return float(max(-np.sum(nz * np.log(nz)), 0.0))


def _as_series(waveform, fps):
    if hasattr(waveform, "samples"):
        return np.asarray(waveform.samples, dtype=float), float(waveform.fps)
    if fps is None:
        raise DataError("fps is required for a bare array")
    return np.asarray(waveform, dtype=float), float(fps)


def _summary(waveform, fps, spectral: SpectralConfig) -> SpectralSummary:
    x, fps = _as_series(waveform, fps)
    summary = spectral_power(RegionSignal(-1, x, fps), spectral)
    if summary.degenerate:
        raise DataError("waveform has zero variance")
    return summary


def spectral_entropy(waveform, fps: float | None = None,
                     spectral: SpectralConfig = SpectralConfig(), normalized: bool = False) -> float:
    """Entropy of the normalized 0-DC power distribution of ``waveform``.

    With ``normalized`` the result is divided by ``ln(n_bins)``.
    """
    gamma = _summary(waveform, fps, spectral).gamma
    h = distribution_entropy(gamma)
    return h / math.log(gamma.size) if normalized and gamma.size > 1 else h


def lag_correlation(pred, truth, fps: float, max_lag_s: float = 0.5,
                    min_overlap_s: float = 2.0) -> tuple[float, float]:
    """Largest ``|corr(pred[t], truth[t + lag])|`` over forward lags up to ``max_lag_s``.

    Returns ``(rho, lag_seconds)``; the earliest lag wins ties.
    """
    p = np.asarray(getattr(pred, "samples", pred), dtype=float)
    y = np.asarray(getattr(truth, "samples", truth), dtype=float)
    max_lag = int(round(max_lag_s * fps))
    overlap = min(p.size, y.size - max_lag)
    if overlap < min_overlap_s * fps or overlap < 2:
        raise DataError(
            f"overlap of {max(overlap, 0) / fps:.2f}s after a {max_lag_s}s lag is below {min_overlap_s}s"
        )
    best, best_lag = -1.0, 0
    for lag in range(max_lag + 1):
        n = min(p.size, y.size - lag)
        a = p[:n] - p[:n].mean()
        b = y[lag:lag + n] - y[lag:lag + n].mean()
        denom = math.sqrt(np.dot(a, a) * np.dot(b, b))
        rho = abs(np.dot(a, b)) / denom if denom > 0 else 0.0
        if rho > best:
            best, best_lag = rho, lag
    return float(min(best, 1.0)), best_lag / fps


def bland_altman(pairs) -> BlandAltman:
    """Agreement of ``(true, predicted)`` pairs; errors are ``predicted - true``."""
    pairs = [(float(t), float(p)) for t, p in pairs]
    if len(pairs) < 2:
        raise DataError("Bland-Altman analysis needs at least 2 pairs")
    truth, pred = np.array(pairs).T
    err = pred - truth
    mu = float(err.mean())
    sd = float(err.std(ddof=1))
    if truth.std() > 0 and pred.std() > 0:
        r2 = float(np.corrcoef(truth, pred)[0, 1] ** 2)
    else:
        r2 = float("nan")
    return BlandAltman(mu, sd, (mu - 1.96 * sd, mu + 1.96 * sd), pairs, r2)


def in_band_mass(waveform, fps: float | None = None,
                 spectral: SpectralConfig = SpectralConfig()) -> float:
    """Normalized spectral mass of the fundamental and first-harmonic bands."""
    summary = _summary(waveform, fps, spectral)
    return float(summary.gamma[harmonic_mask(summary, spectral.delta_f)].sum())


def tuning_objective(waveform, fps: float | None = None,
                     spectral: SpectralConfig = SpectralConfig(),
                     cardiac: CardiacConfig = CardiacConfig()) -> float:
    """Harmonic-to-rest power ratio ``m / (1 - m)``; ``-inf`` if heart rate is unrealistic."""
    x, fps = _as_series(waveform, fps)
    try:
        hr = estimate_hr(x, cardiac, fps=fps)
    except (NoEstimateError, DataError):
        return -math.inf
    if not cardiac.hr_min * 60 <= hr.bpm <= cardiac.hr_max * 60:
        return -math.inf
    return harmonic_ratio(in_band_mass(x, fps, spectral))


def harmonic_ratio(m: float) -> float:
    """``m / (1 - m)`` with ``m`` capped just below one."""
    if not 0.0 <= m <= 1.0 + 1e-12:
        raise ValueError(f"in-band mass {m} outside [0, 1]")
    m = min(m, _MASS_CEILING)
    return m / (1.0 - m)


def _grid_points(grid: dict) -> list[dict]:
    keys = ["alpha_h", "alpha_q", "alpha_l", "radius"]
    unknown = set(grid) - set(keys)
    if unknown:
        raise ValueError(f"unknown grid keys {sorted(unknown)}")
    values = [list(grid.get(k, [None])) for k in keys]
    if any(len(v) == 0 for v in values):
        raise ValueError("grid has an empty axis")
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def _apply(config, point: dict):
    overrides = {}
    for key, section in (("alpha_h", "spectral.alpha_h"), ("alpha_q", "spectral.alpha_q"),
                         ("alpha_l", "spatial.alpha_l"), ("radius", "spatial.neighborhood_radius")):
        if point.get(key) is not None:
            overrides[section] = point[key]
    return config.replace(**overrides)


def grid_search(scenes, grid: dict | None = None, config=None) -> GridSearchResult:
    """Score every grid point by the mean tuning objective over ``scenes``.

    ``scenes`` are frame sequences or prepared scenes. A recording whose
    fused waveform fails or has an unrealistic heart rate is excluded from a
    point's mean; a point with every recording excluded is excluded. Ties go
    to the first point in iteration order.
    """
    from .config import PipelineConfig
    from .fusion import PreparedScene, fuse_scene, prepare_scene

    config = PipelineConfig() if config is None else config
    points = _grid_points(DEFAULT_GRID if grid is None else grid)
    current = {"alpha_h": config.spectral.alpha_h, "alpha_q": config.spectral.alpha_q,
               "alpha_l": config.spatial.alpha_l, "radius": config.spatial.neighborhood_radius}
    points = [{k: current[k] if v is None else v for k, v in p.items()} for p in points]
    if not isinstance(scenes, (list, tuple)):
        scenes = [scenes]
    if not scenes:
        raise ValueError("grid search needs at least one scene")
    prepared = [s if isinstance(s, PreparedScene) else prepare_scene(s, config) for s in scenes]

    table = []
    best_idx, best_score = None, -math.inf
    for idx, point in enumerate(points):
        cfg = _apply(config, point)
        scores = []
        for scene in prepared:
            try:
                fused = fuse_scene(scene, cfg)
            except (NoPulsatileRegionError, PulseFusionError):
                scores.append(-math.inf)
                continue
            scores.append(tuning_objective(fused, spectral=cfg.spectral, cardiac=cfg.cardiac))
        valid = [s for s in scores if s != -math.inf]
        score = float(np.mean(valid)) if valid else -math.inf
        table.append({**point, "objective": score, "n_valid": len(valid), "excluded": not valid})
        if valid and score > best_score:
            best_idx, best_score = idx, score
    if best_idx is None:
        raise NoPulsatileRegionError("every grid point was excluded")
    return GridSearchResult(points[best_idx], best_score, table)
