"""Synthetic frame sequences with known pulse waveforms.

A scene is a rectangle of pixels with a baseline intensity, optional
darker or brighter ridges (sharp static edges), one or more pulsatile
patches, a global illumination drift and i.i.d. Gaussian sensor noise::

    I(t, p) = B(p) * (1 - a_p * w_p(t)) * drift(t) + noise

``w_p`` is a unit-amplitude two-harmonic pulse whose beat boundaries are
explicit, so irregular beats can be inserted and recovered exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, InvalidConfigError
from .io import write_fseq, write_grid_csv, write_waveform
from .signal_core import FrameSequence

__all__ = [
    "PulseParams",
    "Patch",
    "Ridge",
    "SceneSpec",
    "GroundTruth",
    "beat_boundaries",
    "pulse_waveform",
    "generate_scene",
    "cohort",
    "default_cohort_specs",
]

_HR_BOUNDS = (20.0, 240.0)


@dataclass(frozen=True)
class PulseParams:
    hr_bpm: float = 72.0
    dicrotic: float = 0.3
    phase: float = np.pi / 4
    arrhythmia: tuple = ()

    def __post_init__(self):
        if not _HR_BOUNDS[0] <= self.hr_bpm <= _HR_BOUNDS[1]:
            raise InvalidConfigError(f"hr_bpm {self.hr_bpm} outside {_HR_BOUNDS}")
        for beat, delay in self.arrhythmia:
            if beat < 0 or delay < 0:
                raise InvalidConfigError("arrhythmia beats and delays must be non-negative")


@dataclass(frozen=True)
class Patch:
    """Pulsatile rectangle ``(row0, col0, height, width)`` in pixels."""

    rect: tuple[int, int, int, int]
    pulse: PulseParams = field(default_factory=PulseParams)
    amplitude: float = 0.01

    def __post_init__(self):
        if self.amplitude < 0:
            raise InvalidConfigError("patch amplitude must be >= 0")


@dataclass(frozen=True)
class Ridge:
    """Static rectangle whose baseline intensity is scaled by ``factor``."""

    rect: tuple[int, int, int, int]
    factor: float = 0.5

    def __post_init__(self):
        if not self.factor > 0:
            raise InvalidConfigError("ridge factor must be > 0")


@dataclass(frozen=True)
class SceneSpec:
    rows: int = 72
    cols: int = 72
    fps: float = 60.0
    duration_s: float = 20.0
    patches: tuple = ()
    baseline_intensity: float = 100.0
    noise_sd: float = 0.0
    drift_amplitude: float = 0.0
    drift_freq: float = 0.05
    ridges: tuple = ()
    seed: int = 0
    name: str = "scene"

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidConfigError("scene dimensions must be positive")
        if not (self.fps > 0 and self.duration_s > 0 and self.baseline_intensity > 0):
            raise InvalidConfigError("fps, duration and baseline must be positive")
        if self.noise_sd < 0 or self.drift_amplitude < 0:
            raise InvalidConfigError("noise and drift must be non-negative")

    @property
    def n_frames(self) -> int:
        return int(round(self.fps * self.duration_s))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        d["patches"] = tuple(
            Patch(tuple(p["rect"]),
                  PulseParams(**{**p.get("pulse", {}),
                                 "arrhythmia": tuple(tuple(a) for a in p.get("pulse", {}).get("arrhythmia", ()))}),
                  p.get("amplitude", 0.01))
            for p in d.get("patches", ()))
        d["ridges"] = tuple(Ridge(tuple(r["rect"]), r.get("factor", 0.5)) for r in d.get("ridges", ()))
        return cls(**d)


@dataclass
class GroundTruth:
    fps: float
    waveforms: list
    masks: list
    beat_times: list
    peak_times: list


def beat_boundaries(pulse: PulseParams, duration_s: float) -> np.ndarray:
    """Beat onset times covering ``[0, duration_s]``; inserted delays lengthen single beats."""
    period = 60.0 / pulse.hr_bpm
    extra = {int(b): float(d) for b, d in pulse.arrhythmia}
    times = [0.0]
    k = 0
    while times[-1] <= duration_s:
        times.append(times[-1] + period + extra.get(k, 0.0))
        k += 1
    return np.array(times)


def _shape(phi, pulse: PulseParams):
    return np.sin(phi) + pulse.dicrotic * np.sin(2 * phi + pulse.phase)


def _cycle(pulse: PulseParams) -> tuple[float, float, float]:
    """Peak magnitude, phase of the foot (minimum) and phase of the maximum."""
    phi = np.linspace(0.0, 2 * np.pi, 20001)
    w = _shape(phi, pulse)
    return float(np.abs(w).max()), float(phi[np.argmin(w)]), float(phi[np.argmax(w)])


def pulse_waveform(pulse: PulseParams, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit-amplitude pulse at times ``t``; returns ``(w, beat_onsets, peak_times)``.

    Beats start at the pulse foot. A delayed beat holds the foot value for
    the extra time, so exactly one onset-to-onset and one peak-to-peak
    interval is lengthened.
    """
    t = np.asarray(t, dtype=float)
    period = 60.0 / pulse.hr_bpm
    bounds = beat_boundaries(pulse, float(t.max()) if t.size else 0.0)
    k = np.clip(np.searchsorted(bounds, t, side="right") - 1, 0, bounds.size - 2)
    frac = np.minimum((t - bounds[k]) / period, 1.0)
    scale, foot, top = _cycle(pulse)
    w = _shape(2 * np.pi * frac + foot, pulse) / scale
    peaks = bounds[:-1] + ((top - foot) % (2 * np.pi)) / (2 * np.pi) * period
    return w, bounds, peaks


def _rect_mask(rect, shape) -> np.ndarray:
    r0, c0, h, w = rect
    rows, cols = shape
    if h <= 0 or w <= 0 or r0 < 0 or c0 < 0 or r0 + h > rows or c0 + w > cols:
        raise DataError(f"mask {tuple(rect)} lies outside the {rows}x{cols} scene")
    m = np.zeros(shape, dtype=bool)
    m[r0:r0 + h, c0:c0 + w] = True
    return m


def generate_scene(spec: SceneSpec) -> tuple[FrameSequence, GroundTruth]:
    """Render the scene; bit-reproducible for a given spec and seed."""
    shape = (spec.rows, spec.cols)
    n = spec.n_frames
    t = np.arange(n) / spec.fps
    base = np.full(shape, float(spec.baseline_intensity))
    for ridge in spec.ridges:
        base[_rect_mask(ridge.rect, shape)] *= ridge.factor

    modulation = np.ones((n,) + shape)
    waves, masks, beats, peaks = [], [], [], []
    for patch in spec.patches:
        mask = _rect_mask(patch.rect, shape)
        w, b, pk = pulse_waveform(patch.pulse, t)
        modulation[:, mask] -= patch.amplitude * w[:, None]
        waves.append(w)
        masks.append(mask)
        beats.append(b)
        peaks.append(pk)

    drift = 1.0 + spec.drift_amplitude * np.sin(2 * np.pi * spec.drift_freq * t)
    frames = base[None] * modulation * drift[:, None, None]
    if spec.noise_sd > 0:
        rng = np.random.default_rng(spec.seed)
        frames += rng.standard_normal(frames.shape) * (spec.noise_sd * spec.baseline_intensity)
    np.maximum(frames, 0.0, out=frames)
    note = f"synthetic:{spec.name}:seed={spec.seed}"
    return FrameSequence(frames, spec.fps, note), GroundTruth(spec.fps, waves, masks, beats, peaks)


def cohort(specs, out_dir) -> Path:
    """Write FSEQ files, ground-truth CSVs, mask grids and ``manifest.json``."""
    specs = list(specs)
    if not specs:
        raise DataError("cohort needs at least one scene spec")
    names = [s.name for s in specs]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise DataError(f"duplicate scene names: {dupes}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for spec in specs:
        frames, truth = generate_scene(spec)
        fseq = out / f"{spec.name}.fseq"
        try:
            write_fseq(fseq, frames)
            truth_files, mask_files = [], []
            for k, (w, m) in enumerate(zip(truth.waveforms, truth.masks)):
                tf = out / f"{spec.name}_truth_{k}.csv"
                mf = out / f"{spec.name}_mask_{k}.csv"
                write_waveform(tf, w, spec.fps)
                write_grid_csv(mf, m.astype(int))
                truth_files.append(tf.name)
                mask_files.append(mf.name)
        except OSError as exc:
            raise DataError(f"{spec.name}: cannot write cohort files: {exc}") from exc
        entries.append({
            "name": spec.name,
            "fseq": fseq.name,
            "fps": spec.fps,
            "hr_bpm": [p.pulse.hr_bpm for p in spec.patches],
            "truth": truth_files,
            "masks": mask_files,
            "spec": spec.to_dict(),
        })
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"scenes": entries}, indent=2, sort_keys=True) + "\n")
    return manifest


def default_cohort_specs(n: int = 23, seed: int = 0, hr_range=(48.0, 100.0), amplitude: float = 0.01,
                         noise_sd: float = 0.02, drift: bool = True, edges: bool = True,
                         duration_s: float = 20.0, rows: int = 96, cols: int = 96,
                         patch_size: int = 36) -> list[SceneSpec]:
    """Scenes with one pulsatile patch each at a random position and heart rate."""
    rng = np.random.default_rng(seed)
    specs = []
    for i in range(n):
        hr = float(rng.uniform(*hr_range))
        r0 = int(rng.integers(0, rows - patch_size + 1))
        c0 = int(rng.integers(0, cols - patch_size + 1))
        ridges = ()
        if edges:
            rr = int(rng.integers(0, rows - 6 + 1))
            cc = int(rng.integers(0, cols - 6 + 1))
            ridges = (Ridge((0, cc, rows, 6), 0.4), Ridge((rr, 0, 6, cols), 1.8))
        specs.append(SceneSpec(
            rows=rows, cols=cols, fps=60.0, duration_s=duration_s,
            patches=(Patch((r0, c0, patch_size, patch_size),
                           PulseParams(hr_bpm=hr),
                           amplitude),),
            noise_sd=noise_sd, drift_amplitude=0.05 if drift else 0.0,
            ridges=ridges, seed=int(rng.integers(0, 2**31 - 1)), name=f"scene_{i:02d}",
        ))
    return specs
