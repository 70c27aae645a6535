"""
Looking at the individual priors
================================

Each region gets three weights: harmonic strength, noise magnitude and a
spatial-gradient term. Their product is eroded by a neighbourhood minimum
so that only the inside of a pulsing area survives.
"""

import numpy as np

from pulsefusion import PipelineConfig, extract_pulse
from pulsefusion.io import write_pgm
from pulsefusion.synth import Patch, Ridge, SceneSpec, generate_scene

spec = SceneSpec(rows=72, cols=72, duration_s=15, patches=(Patch((12, 12, 36, 36)),),
                 noise_sd=0.02, ridges=(Ridge((0, 54, 72, 6), 0.4),), seed=2)
frames, _ = generate_scene(spec)


def show(name, grid):
    print(f"\n{name} (min {grid.min():.3g}, max {grid.max():.3g})")
    for row in np.rint(9 * grid / max(grid.max(), 1e-300)).astype(int):
        print(" ".join(str(v) for v in row))


for radius in (0, 1):
    cfg = PipelineConfig().replace(**{"spatial.neighborhood_radius": radius})
    fused = extract_pulse(frames, cfg)
    priors = fused.priors[0]
    if radius == 0:
        show("harmonic prior", priors.w_harm)
        show("noise prior", priors.w_nmag)
        show("spatial prior (the ridge shows up as a dark column)", priors.w_spat)
    show(f"combined W, neighbourhood radius {radius}", priors.w_combined)

# The same maps can be written as 8-bit heatmaps.
write_pgm("w_combined.pgm", priors.w_combined)
print("\nwrote w_combined.pgm")
