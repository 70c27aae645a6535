"""Pulse waveform extraction from single-channel frame sequences by prior-weighted fusion."""

from .baselines import RoiSpec, mean_ppg
from .cardiac import CardiacConfig, HeartRateEstimate, estimate_hr, resample_cubic
from .config import EvaluationConfig, PipelineConfig
from .errors import (DataError, InvalidConfigError, NoEstimateError, NoPulsatileRegionError,
                     PulseFusionError)
from .evaluation import (BlandAltman, GridSearchResult, MetricsReport, bland_altman, grid_search,
                         lag_correlation, spectral_entropy, tuning_objective)
from .fusion import (FusedWaveform, FusionConfig, extract_pulse, fuse, histogram_posterior,
                     posterior_mean, posterior_weights)
from .signal_core import (DetrendConfig, FrameSequence, RegionGrid, RegionSignal, detrend,
                          downsample_blockwise, extract_region_signals, to_absorbance)
from .spatial import PriorMap, SpatialConfig, combine_priors, scene_gradient, spatial_prior
from .spectral import (SpectralConfig, SpectralSummary, harmonic_energy, harmonic_prior,
                       noise_peak, noise_prior, spectral_power)
from .synth import Patch, PulseParams, Ridge, SceneSpec, cohort, generate_scene

__version__ = "0.1.0"
