"""
A small cohort and a grid search
================================

Heart-rate agreement over a handful of generated recordings, then a sweep
over the prior sharpness parameters scored by harmonic-to-rest power.
"""

from pulsefusion import bland_altman, estimate_hr, extract_pulse, grid_search
from pulsefusion.fusion import prepare_scene
from pulsefusion.synth import default_cohort_specs, generate_scene

specs = default_cohort_specs(n=6, seed=4)
pairs, prepared = [], []
for spec in specs:
    frames, _ = generate_scene(spec)
    prepared.append(prepare_scene(frames))
    true_hr = spec.patches[0].pulse.hr_bpm
    est = estimate_hr(extract_pulse(frames)).bpm
    pairs.append((true_hr, est))
    print(f"{spec.name}: true {true_hr:6.2f} bpm, estimated {est:6.2f} bpm")

ba = bland_altman(pairs)
print(f"\nmean error {ba.mean_error:+.3f} bpm, SD {ba.sd_error:.3f} bpm, "
      f"limits [{ba.limits[0]:+.3f}, {ba.limits[1]:+.3f}], r2 {ba.r_squared:.5f}")

# Prepared scenes keep detrended signals and spectra, so each grid point
# only recomputes priors and the weighted sum.
grid = {"alpha_h": [0.1, 0.5, 1.0], "alpha_q": [0.001, 0.01, 0.1], "radius": [0, 1]}
result = grid_search(prepared, grid)
print("\nbest parameters:", result.best_params, f"objective {result.objective:.2f}")
for row in sorted(result.table, key=lambda r: -r["objective"])[:5]:
    print({k: row[k] for k in ("alpha_h", "alpha_q", "radius")}, f"{row['objective']:.2f}")
