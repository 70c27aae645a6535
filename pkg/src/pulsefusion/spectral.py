"""Normalized 0-DC power spectra and the harmonic / noise-magnitude priors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from .errors import DataError, InvalidConfigError
from .signal_core import RegionSignal

__all__ = [
    "SpectralConfig",
    "SpectralSummary",
    "power_spectrum",
    "spectral_power",
    "band_mask",
    "harmonic_mask",
    "harmonic_energy",
    "harmonic_prior",
    "noise_peak",
    "noise_prior",
    "summarize",
]

# Below this RMS a detrended signal is treated as carrying no information.
_DEGENERATE_RMS = 1e-12
_NEGLIGIBLE_MASS = 1e-12
PRIOR_FLOOR = np.finfo(float).tiny


@dataclass(frozen=True)
class SpectralConfig:
    """Band half-width and heart-rate bounds in Hz, plus prior sharpness.

    ``fundamental_band_noise`` switches :func:`noise_peak` to ``1 - fundamental band
    mass`` instead of the largest off-band bin.
    """

    delta_f: float = 0.2
    hr_min: float = 0.67
    hr_max: float = 3.33
    alpha_h: float = 0.5
    alpha_q: float = 0.01
    taper: str = "hann"
    fundamental_band_noise: bool = False

    def __post_init__(self):
        if not self.delta_f > 0:
            raise InvalidConfigError("delta_f must be > 0")
        if not 0 < self.hr_min < self.hr_max:
            raise InvalidConfigError("need 0 < hr_min < hr_max")
        if not (self.alpha_h > 0 and self.alpha_q > 0):
            raise InvalidConfigError("alpha_h and alpha_q must be > 0")


@dataclass
class SpectralSummary:
    region_id: int
    gamma: np.ndarray
    freqs: np.ndarray
    f_star: float
    h: float = 0.0
    q: float = 1.0
    degenerate: bool = False

    @property
    def bin_width(self) -> float:
        return float(self.freqs[1] - self.freqs[0]) if self.freqs.size > 1 else 0.0


def _taper(n: int, taper: str) -> np.ndarray:
    if taper in ("none", "boxcar", "rect"):
        return np.ones(n)
    return get_window(taper, n, fftbins=False)


def power_spectrum(x, fps: float, taper: str = "hann") -> tuple[np.ndarray, np.ndarray]:
    """One-sided power of the mean-subtracted, tapered series.

    Returns ``(freqs, power)`` including the DC bin, scaled so that
    ``power.sum()`` equals the time-domain energy of the tapered series.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    y = (x - x.mean(axis=-1, keepdims=True)) * _taper(n, taper)
    spec = np.fft.rfft(y, axis=-1)
    power = np.abs(spec) ** 2 / n
    power[..., 1:] *= 2.0
    if n % 2 == 0:
        power[..., -1] /= 2.0
    freqs = np.arange(n // 2 + 1) * (fps / n)
    return freqs, power


def spectral_power(signal: RegionSignal, cfg: SpectralConfig = SpectralConfig()) -> SpectralSummary:
    """Normalized 0-DC power distribution and its in-range peak frequency.

    A zero-variance signal yields a flagged summary with ``h = 0`` and
    ``q = 1``.
    """
    x = np.asarray(signal.samples, dtype=float)
    if x.size < 8:
        raise DataError(f"region {signal.region_id}: spectrum needs >= 8 samples, got {x.size}")
    freqs, power = power_spectrum(x, signal.fps, cfg.taper)
    freqs, power = freqs[1:], power[1:]
    total = power.sum()
    rms = np.sqrt(np.mean((x - x.mean()) ** 2))
    if rms <= _DEGENERATE_RMS or not total > 0:
        return SpectralSummary(signal.region_id, np.zeros_like(power), freqs, 0.0,
                               h=0.0, q=1.0, degenerate=True)
    gamma = power / total
    return SpectralSummary(signal.region_id, gamma, freqs, _peak_frequency(gamma, freqs, cfg))


def _peak_frequency(gamma: np.ndarray, freqs: np.ndarray, cfg: SpectralConfig) -> float:
    in_range = band_mask(freqs, cfg.hr_min, cfg.hr_max, closed=True)
    # In-range power at round-off level does not count as mass.
    if np.any(in_range) and gamma[in_range].max() > _NEGLIGIBLE_MASS * gamma.max():
        idx = np.flatnonzero(in_range)[np.argmax(gamma[in_range])]
    else:
        idx = int(np.argmax(gamma))
    return float(freqs[idx])


def band_mask(freqs: np.ndarray, low: float, high: float, closed: bool = False) -> np.ndarray:
    """Bins whose centre lies in ``[low, high)`` (``[low, high]`` if closed).

    Edges carry a tolerance of a billionth of a bin so that centres which
    land on an edge in exact arithmetic are classified consistently.
    """
    df = freqs[1] - freqs[0] if freqs.size > 1 else 1.0
    eps = 1e-9 * df
    if closed:
        return (freqs >= low - eps) & (freqs <= high + eps)
    return (freqs >= low - eps) & (freqs < high - eps)


def harmonic_mask(summary: SpectralSummary, delta_f: float) -> np.ndarray:
    """Union of the fundamental and first-harmonic bands around ``f_star``."""
    f = summary.f_star
    return (band_mask(summary.freqs, f - delta_f, f + delta_f)
            | band_mask(summary.freqs, 2 * f - delta_f, 2 * f + delta_f))


def _in_hr_range(f: float, cfg: SpectralConfig, df: float) -> bool:
    eps = 1e-9 * max(df, 1e-12)
    return cfg.hr_min - eps <= f <= cfg.hr_max + eps


def harmonic_energy(summary: SpectralSummary, cfg: SpectralConfig = SpectralConfig()) -> float:
    """Spectral mass in the fundamental and first-harmonic bands.

    Zero for degenerate signals or when the peak lies outside the heart-rate
    range. Overlapping bands are counted once.
    """
    if summary.degenerate or not _in_hr_range(summary.f_star, cfg, summary.bin_width):
        return 0.0
    h = float(summary.gamma[harmonic_mask(summary, cfg.delta_f)].sum())
    return min(max(h, 0.0), 1.0)


def noise_peak(summary: SpectralSummary, cfg: SpectralConfig = SpectralConfig()) -> float:
    """Largest single-bin power outside the harmonic bands.

    With ``cfg.fundamental_band_noise`` this is instead one minus the mass of the
    fundamental band alone.
    """
    if summary.degenerate:
        return 1.0
    if cfg.fundamental_band_noise:
        f = summary.f_star
        fund = summary.gamma[band_mask(summary.freqs, f - cfg.delta_f, f + cfg.delta_f)].sum()
        return float(min(max(1.0 - fund, 0.0), 1.0))
    off = ~harmonic_mask(summary, cfg.delta_f)
    if not np.any(off):
        return 0.0
    return float(min(max(summary.gamma[off].max(), 0.0), 1.0))


def harmonic_prior(h, cfg: SpectralConfig = SpectralConfig()):
    """``exp(-(1 - h)**2 / alpha_h)``; equals 1 when all mass is harmonic.

    Floored at the smallest normal float so that underflow never turns a
    prior into an exact zero.
    """
    return np.maximum(np.exp(-((1.0 - np.asarray(h, dtype=float)) ** 2) / cfg.alpha_h), PRIOR_FLOOR)


def noise_prior(q, cfg: SpectralConfig = SpectralConfig()):
    """``exp(-q**2 / alpha_q)``, floored like :func:`harmonic_prior`."""
    return np.maximum(np.exp(-(np.asarray(q, dtype=float) ** 2) / cfg.alpha_q), PRIOR_FLOOR)


def summarize(signal: RegionSignal, cfg: SpectralConfig = SpectralConfig()) -> SpectralSummary:
    """Spectrum plus ``h`` and ``q`` filled in."""
    s = spectral_power(signal, cfg)
    if not s.degenerate:
        s.h = harmonic_energy(s, cfg)
        s.q = noise_peak(s, cfg)
    return s
