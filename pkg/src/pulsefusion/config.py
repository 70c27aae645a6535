"""Single serializable configuration document for the whole pipeline."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .cardiac import CardiacConfig
from .errors import InvalidConfigError
from .fusion import FusionConfig
from .signal_core import DetrendConfig, RegionGrid
from .spatial import SpatialConfig
from .spectral import SpectralConfig

__all__ = ["EvaluationConfig", "PipelineConfig"]


@dataclass(frozen=True)
class EvaluationConfig:
    max_lag_s: float = 0.5

    def __post_init__(self):
        if not self.max_lag_s >= 0:
            raise InvalidConfigError("max_lag_s must be >= 0")


_SECTIONS = {
    "grid": RegionGrid,
    "detrend": DetrendConfig,
    "spectral": SpectralConfig,
    "spatial": SpatialConfig,
    "fusion": FusionConfig,
    "cardiac": CardiacConfig,
    "evaluation": EvaluationConfig,
}


@dataclass(frozen=True)
class PipelineConfig:
    grid: RegionGrid = field(default_factory=RegionGrid)
    detrend: DetrendConfig = field(default_factory=DetrendConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    spatial: SpatialConfig = field(default_factory=SpatialConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    cardiac: CardiacConfig = field(default_factory=CardiacConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise InvalidConfigError(f"unknown config sections: {sorted(unknown)}")
        sections = {}
        for name, section in data.items():
            kind = _SECTIONS[name]
            if not isinstance(section, dict):
                raise InvalidConfigError(f"section {name!r} must be a mapping")
            allowed = {f.name for f in dataclasses.fields(kind)}
            bad = set(section) - allowed
            if bad:
                raise InvalidConfigError(f"unknown keys in {name!r}: {sorted(bad)}")
            try:
                sections[name] = kind(**section)
            except TypeError as exc:
                raise InvalidConfigError(f"section {name!r}: {exc}") from exc
        return cls(**sections)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidConfigError("config document must be a JSON object")
        return cls.from_dict(data)

    def replace(self, **overrides) -> "PipelineConfig":
        """Copy with dotted-key overrides, e.g. ``replace(**{"spectral.alpha_h": 0.1})``."""
        sections = {name: getattr(self, name) for name in _SECTIONS}
        for key, value in overrides.items():
            name, _, attr = key.partition(".")
            if name not in sections or not attr:
                raise InvalidConfigError(f"bad override key {key!r}")
            try:
                sections[name] = dataclasses.replace(sections[name], **{attr: value})
            except TypeError as exc:
                raise InvalidConfigError(f"bad override key {key!r}") from exc
        return PipelineConfig(**sections)
