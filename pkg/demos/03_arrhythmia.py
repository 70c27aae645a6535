"""
An irregular beat
=================

One beat is held back by 0.4 s. The spectrum only reports an average rate,
but the fused waveform keeps the beat-to-beat timing.
"""

import numpy as np

from pulsefusion import RegionSignal, estimate_hr, extract_pulse
from pulsefusion.cardiac import resample_cubic
from pulsefusion.spectral import summarize
from pulsefusion.synth import Patch, PulseParams, SceneSpec, generate_scene

pulse = PulseParams(hr_bpm=72, arrhythmia=((7, 0.4),))
spec = SceneSpec(rows=96, cols=96, duration_s=20, noise_sd=0.02, drift_amplitude=0.05,
                 patches=(Patch((24, 24, 36, 36), pulse),), seed=3)
frames, truth = generate_scene(spec)
fused = extract_pulse(frames)

# Resample to 200 Hz and take the maximum near each true systolic peak.
fs = 200.0
z = resample_cubic(fused.samples, fused.fps, fs)
peaks = []
for t in truth.peak_times[0]:
    lo, hi = int((t - 0.15) * fs), int((t + 0.15) * fs)
    if lo > 0 and hi < z.size:
        peaks.append((lo + np.argmax(z[lo:hi])) / fs)

print("beat  true interval  fused interval")
true_iv = np.diff(truth.peak_times[0][: len(peaks)])
for i, (a, b) in enumerate(zip(true_iv, np.diff(peaks))):
    mark = "  <- delayed beat" if a > 1.0 else ""
    print(f"{i:>4}  {a:12.3f}s  {b:13.3f}s{mark}")

f_star = summarize(RegionSignal(0, fused.samples, fused.fps)).f_star
print(f"\nspectral peak {60 * f_star:.1f} bpm, autocorrelation {estimate_hr(fused).bpm:.1f} bpm")
print("neither number says anything about the one long interval")
