import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from oracles import band_sum, direct_dft_power
from pulsefusion import (RegionSignal, SpectralConfig, harmonic_energy, harmonic_prior, noise_peak,
                         noise_prior, spectral_power)
from pulsefusion.errors import DataError, InvalidConfigError
from pulsefusion.spectral import harmonic_mask, power_spectrum, summarize

BOXCAR = SpectralConfig(taper="boxcar")


def tone(f, n=600, fps=60.0, phase=0.0):
    return np.sin(2 * np.pi * f * np.arange(n) / fps + phase)


def sig(x, fps=60.0):
    return RegionSignal(0, np.asarray(x, dtype=float), fps)


class TestSpectralPower:
    def test_single_tone(self):
        s = spectral_power(sig(tone(1.2)))
        k = int(np.argmin(np.abs(s.freqs - 1.2)))
        assert s.gamma[max(k - 1, 0):k + 2].sum() >= 0.99
        assert abs(s.f_star - 1.2) <= s.bin_width

    def test_constant_is_degenerate(self):
        s = summarize(sig(np.full(100, 2.0)))
        assert s.degenerate and s.h == 0.0 and s.q == 1.0

    def test_two_equal_tones(self):
        s = spectral_power(sig(tone(1.0) + tone(2.0)), BOXCAR)
        for f in (1.0, 2.0):
            assert s.gamma[np.argmin(np.abs(s.freqs - f))] == pytest.approx(0.5, abs=1e-9)

    @given(hnp.arrays(float, st.integers(8, 200), elements=st.floats(-1e3, 1e3)))
    def test_matches_direct_dft(self, x):
        freqs, p = power_spectrum(x, 10.0, "boxcar")
        oracle = direct_dft_power(x)
        scale = max(oracle.max(), 1e-300)
        np.testing.assert_allclose(p, oracle / x.size, atol=1e-9 * scale / x.size + 1e-12)

    def test_too_short(self):
        with pytest.raises(DataError):
            spectral_power(sig(np.arange(7.0)))

    def test_out_of_range_interferer_not_fundamental(self):
        x = 3.0 * tone(5.0) + tone(1.5)
        s = spectral_power(sig(x))
        assert abs(s.f_star - 1.5) <= s.bin_width

    def test_global_fallback(self):
        # An exact-bin tone leaves only round-off power inside the range.
        s = spectral_power(sig(tone(10.0)), BOXCAR)
        assert s.f_star == pytest.approx(10.0)

    def test_in_range_mass_wins_over_stronger_outside(self):
        s = spectral_power(sig(tone(10.0) + 0.01 * tone(1.5)), BOXCAR)
        assert s.f_star == pytest.approx(1.5)


class TestHarmonicEnergy:
    def test_pure_tone(self):
        assert harmonic_energy(summarize(sig(tone(1.2)))) >= 0.99

    def test_out_of_range_peak(self):
        s = spectral_power(sig(tone(10.0)), BOXCAR)
        assert s.f_star == pytest.approx(10.0)
        assert harmonic_energy(s, SpectralConfig(hr_max=3.33)) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_dicrotic_pulse_against_band_sum(self, seed):
        rng = np.random.default_rng(seed)
        n, fps, f = 1200, 60.0, 1.15
        t = np.arange(n) / fps
        x = np.sin(2 * np.pi * f * t) + math.sqrt(0.3) * np.sin(4 * np.pi * f * t + 0.7)
        noise_sd = math.sqrt(np.mean(x**2) * 10 ** (-20 / 10))
        x = x + rng.normal(0, noise_sd, n)
        s = summarize(sig(x, fps))
        w = np.hanning(n)
        p = direct_dft_power((x - x.mean()) * w)[1:]
        freqs = np.arange(1, n // 2 + 1) * fps / n
        oracle = band_sum(p / p.sum(), freqs, s.f_star, 0.2)
        assert s.h == pytest.approx(oracle, abs=0.02)

    def test_overlap_counted_once(self):
        # With a wide band the fundamental and harmonic bands overlap.
        cfg = SpectralConfig(delta_f=1.0)
        s = summarize(sig(tone(1.0) + tone(1.6)), cfg)
        assert s.h <= 1.0 + 1e-12
        assert s.h == pytest.approx(1.0, abs=1e-6)


class TestNoisePeak:
    def test_pure_tone(self):
        assert noise_peak(summarize(sig(tone(1.2)))) <= 0.01

    def test_off_band_tone(self):
        s = summarize(sig(tone(1.2) + tone(4.0)), BOXCAR)
        assert s.q == pytest.approx(0.5, abs=1e-6)

    def test_degenerate(self):
        assert noise_peak(summarize(sig(np.zeros(64)))) == 1.0

    def test_fundamental_band_form(self):
        cfg = SpectralConfig(taper="boxcar", fundamental_band_noise=True)
        s = summarize(sig(tone(1.2) + tone(2.4)), cfg)
        # Half the mass is at the harmonic, outside the fundamental band.
        assert s.q == pytest.approx(0.5, abs=1e-6)


class TestPriors:
    def test_harmonic_values(self):
        assert harmonic_prior(1.0) == 1.0
        assert harmonic_prior(0.0, SpectralConfig(alpha_h=1.0)) == pytest.approx(math.exp(-1))

    def test_noise_values(self):
        assert noise_prior(0.0) == 1.0
        assert noise_prior(1.0, SpectralConfig(alpha_q=1.0)) == pytest.approx(math.exp(-1))

    @given(st.floats(0.01, 10))
    def test_harmonic_monotone_example(self, a):
        cfg = SpectralConfig(alpha_h=a)
        assert harmonic_prior(0.9, cfg) > harmonic_prior(0.5, cfg)

    def test_config_validation(self):
        for kw in ({"delta_f": 0}, {"hr_min": 2, "hr_max": 1}, {"alpha_h": 0}, {"alpha_q": -1}):
            with pytest.raises(InvalidConfigError):
                SpectralConfig(**kw)


class TestSpectralInvariants:
    @given(hnp.arrays(float, st.integers(8, 300), elements=st.floats(-100, 100)),
           st.floats(1e-3, 1e3))
    def test_amplitude_invariance(self, x, c):
        a = spectral_power(sig(x))
        b = spectral_power(sig(c * x))
        if a.degenerate or b.degenerate:
            return
        np.testing.assert_allclose(a.gamma, b.gamma, atol=1e-12)

    @given(hnp.arrays(float, st.integers(8, 300), elements=st.floats(-100, 100)),
           st.booleans())
    def test_mass_partition(self, x, boxcar):
        cfg = BOXCAR if boxcar else SpectralConfig()
        s = summarize(sig(x), cfg)
        if s.degenerate:
            return
        assert s.gamma.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(s.gamma >= 0)
        assert 0 <= s.h <= 1 and 0 <= s.q <= 1
        off = s.gamma[~harmonic_mask(s, cfg.delta_f)].sum()
        assert s.h + off <= 1 + 1e-9
