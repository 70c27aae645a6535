"""Exception hierarchy shared by the extraction pipeline and the CLI."""


class PulseFusionError(Exception):
    """Base class for all library errors."""


class InvalidConfigError(PulseFusionError, ValueError):
    """A configuration value violates its documented bounds."""


class DataError(PulseFusionError, ValueError):
    """Input data is malformed, truncated or numerically unusable."""


class NoPulsatileRegionError(PulseFusionError):
    """No region carries enough pulsatile evidence to form a posterior."""


class NoEstimateError(PulseFusionError):
    """Heart rate could not be estimated from the waveform."""
