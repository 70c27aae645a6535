"""Heart rate from a waveform by cubic-spline resampling and autocorrelation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import find_peaks

from .errors import DataError, InvalidConfigError, NoEstimateError

__all__ = ["CardiacConfig", "HeartRateEstimate", "resample_cubic", "autocorrelation", "estimate_hr"]


@dataclass(frozen=True)
class CardiacConfig:
    resample_fs: float = 200.0
    hr_min: float = 0.67
    hr_max: float = 3.33
    min_confidence: float = 0.3
    peak_rule: str = "global"

    def __post_init__(self):
        if not self.resample_fs > 0:
            raise InvalidConfigError("resample_fs must be > 0")
        if not 0 < self.hr_min < self.hr_max:
            raise InvalidConfigError("need 0 < hr_min < hr_max")
        if self.peak_rule not in ("global", "first"):
            raise InvalidConfigError(f"unknown peak rule {self.peak_rule!r}")


@dataclass
class HeartRateEstimate:
    bpm: float
    delta_t_samples: float
    resample_fs: float
    confidence: float

    def to_dict(self) -> dict:
        return {"bpm": self.bpm, "confidence": self.confidence,
                "delta_t_samples": self.delta_t_samples, "resample_fs": self.resample_fs}


def resample_cubic(samples, fps: float, target_fs: float) -> np.ndarray:
    """Evaluate a natural cubic spline through ``samples`` on a ``target_fs`` grid.

    The output grid starts at the first sample time and covers the original
    span.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 4:
        raise DataError("cubic resampling needs at least 4 samples")
    if not (fps > 0 and target_fs > 0):
        raise InvalidConfigError("sampling rates must be positive")
    t = np.arange(x.size) / fps
    n_out = int(np.floor(t[-1] * target_fs + 1e-9)) + 1
    return CubicSpline(t, x, bc_type="natural")(np.arange(n_out) / target_fs)


def autocorrelation(x) -> np.ndarray:
    """Biased autocorrelation of the mean-subtracted series, 1 at lag 0."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    n = x.size
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(x, nfft)
    r = np.fft.irfft(spec * np.conj(spec), nfft)[:n]
    if not r[0] > 0:
        raise NoEstimateError("waveform has zero variance")
    return r / r[0]


def _refine(r: np.ndarray, k: int) -> tuple[float, float]:
    """Parabolic vertex through ``r[k-1], r[k], r[k+1]``."""
    a, b, c = r[k - 1], r[k], r[k + 1]
    denom = a - 2 * b + c
    if denom >= 0:
        return float(k), float(b)
    delta = 0.5 * (a - c) / denom
    return k + delta, float(b - 0.25 * (a - c) * delta)


def estimate_hr(waveform, cfg: CardiacConfig = CardiacConfig(), fps: float | None = None) -> HeartRateEstimate:
    """Heart rate in beats per minute from the dominant autocorrelation lag.

    ``waveform`` is anything with ``samples`` and ``fps`` attributes, or a
    plain array together with ``fps``.
    """
    if hasattr(waveform, "samples"):
        samples, fps = waveform.samples, waveform.fps
    else:
        samples = waveform
    if fps is None:
        raise InvalidConfigError("fps is required for a bare array")
    samples = np.asarray(samples, dtype=float)
    if samples.size / fps < 2.0 / cfg.hr_min:
        raise DataError(
            f"waveform of {samples.size / fps:.2f}s is shorter than two periods at {cfg.hr_min} Hz"
        )
    fs = cfg.resample_fs
    r = autocorrelation(resample_cubic(samples, fps, fs))
    lo = int(np.ceil(fs / cfg.hr_max))
    hi = int(np.floor(fs / cfg.hr_min))
    hi = min(hi, r.size - 2)
    peaks, _ = find_peaks(r[: hi + 2])
    peaks = peaks[(peaks >= lo) & (peaks <= hi)]
    if peaks.size == 0:
        raise NoEstimateError("no autocorrelation peak in the physiological lag range")
    if cfg.peak_rule == "first":
        strong = peaks[r[peaks] >= cfg.min_confidence]
        k = int(strong[0]) if strong.size else int(peaks[np.argmax(r[peaks])])
    else:
        k = int(peaks[np.argmax(r[peaks])])
    lag, value = _refine(r, k)
    if value < cfg.min_confidence:
        raise NoEstimateError(f"autocorrelation peak {value:.3f} below confidence {cfg.min_confidence}")
    return HeartRateEstimate(60.0 * fs / lag, lag, fs, min(value, 1.0))
