import numpy as np
import pytest

from pulsefusion import FrameSequence, RegionGrid, RoiSpec, extract_region_signals, fuse, mean_ppg
from pulsefusion.errors import DataError, InvalidConfigError
from pulsefusion.synth import Patch, SceneSpec, generate_scene


@pytest.fixture(scope="module")
def frames():
    spec = SceneSpec(rows=36, cols=48, duration_s=10, noise_sd=0.02, drift_amplitude=0.05, seed=5,
                     patches=(Patch((6, 6, 18, 18)),))
    return generate_scene(spec)[0]


def test_single_region_roi(frames):
    signals = extract_region_signals(frames)
    out = mean_ppg(frames, RoiSpec((2, 3, 1, 1)))
    np.testing.assert_allclose(out.samples, signals[2 * 8 + 3].samples, rtol=0, atol=1e-12)


def test_full_frame_equals_uniform_fusion(frames):
    signals = extract_region_signals(frames)
    uniform = fuse(signals, np.full(len(signals), 1.0 / len(signals)))
    np.testing.assert_allclose(mean_ppg(frames).samples, uniform.samples, atol=1e-9)


def test_sub_roi_equals_uniform_fusion(frames):
    signals = extract_region_signals(frames)
    idx = [r * 8 + c for r in range(1, 4) for c in range(2, 6)]
    uniform = fuse([signals[i] for i in idx], np.full(len(idx), 1.0 / len(idx)))
    out = mean_ppg(frames, RoiSpec.parse("1,2,3,4"))
    np.testing.assert_allclose(out.samples, uniform.samples, atol=1e-9)
    assert out.diagnostics["n_regions"] == 12


def test_intensity_mode_close_to_absorbance(frames):
    a = mean_ppg(frames, RoiSpec((1, 1, 3, 3))).samples
    b = mean_ppg(frames, RoiSpec((1, 1, 3, 3)), mode="intensity").samples
    # Mean and log commute to first order at 1% fluctuations.
    assert np.corrcoef(a, b)[0, 1] > 0.999


def test_roi_errors(frames):
    with pytest.raises(DataError):
        mean_ppg(frames, RoiSpec((0, 0, 0, 2)))
    with pytest.raises(DataError):
        mean_ppg(frames, RoiSpec((5, 0, 2, 2)))
    with pytest.raises(InvalidConfigError):
        RoiSpec.parse("1,2,3")
    with pytest.raises(InvalidConfigError):
        mean_ppg(frames, mode="median")
    assert RoiSpec.parse("full-frame").rect is None


def test_intensity_mode_rejects_dark_roi():
    data = np.ones((20, 6, 12))
    data[:, :, :6] = 0.0
    with pytest.raises(DataError):
        mean_ppg(FrameSequence(data, 10.0), RoiSpec((0, 0, 1, 1)), grid=RegionGrid(), mode="intensity")
