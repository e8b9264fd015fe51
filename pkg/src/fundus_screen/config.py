"""Merged run configuration read from one flat ``key=value`` file.

Keys from every component config share one namespace; a key that belongs to
no component is an error, so typos never pass silently.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from . import kvconfig
from .augment import AugmentPolicy
from .errors import ConfigError
from .imaging import PreprocessConfig
from .nnet import ArchDescriptor, TrainConfig

SECTIONS = {
    "preprocess": PreprocessConfig,
    "augment": AugmentPolicy,
    "arch": ArchDescriptor,
    "train": TrainConfig,
}
TOP_LEVEL = {"threshold": float}


def _owner_map():
    owners = {}
    for section, cls in SECTIONS.items():
        for key in kvconfig.field_types(cls):
            owners[key] = section
    for key in TOP_LEVEL:
        owners[key] = None
    return owners


@dataclass
class RunConfig:
    preprocess: PreprocessConfig | None = None
    augment: AugmentPolicy = field(default_factory=AugmentPolicy)
    arch: ArchDescriptor = field(default_factory=ArchDescriptor)
    train: TrainConfig = field(default_factory=TrainConfig)
    threshold: float = 0.5

    @classmethod
    def from_pairs(cls, pairs):
        """Build from raw string pairs. The preprocess section stays ``None`` unless named."""
        owners = _owner_map()
        unknown = sorted(k for k in pairs if k not in owners)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        grouped = {s: {} for s in SECTIONS}
        top = {}
        for key, value in pairs.items():
            section = owners[key]
            (grouped[section] if section else top)[key] = value
        built = {s: kvconfig.from_pairs(SECTIONS[s], grouped[s]) for s in SECTIONS}
        if not grouped["preprocess"]:
            built["preprocess"] = None
        threshold = kvconfig.parse_value(top["threshold"], float, "threshold") \
            if "threshold" in top else 0.5
        return cls(threshold=threshold, **built)

    def to_text(self):
        parts = []
        if self.preprocess is not None:
            parts.append(kvconfig.dump(self.preprocess))
        parts += [kvconfig.dump(self.augment), kvconfig.dump(self.arch), kvconfig.dump(self.train),
                  f"threshold={kvconfig.format_value(float(self.threshold))}\n"]
        return "".join(parts)


def read_pairs(path):
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return kvconfig.parse_pairs(text)


def load_run_config(path=None, overrides=None):
    """Defaults < config file < ``overrides`` (already-stringified flag values)."""
    pairs = read_pairs(path)
    for key, value in (overrides or {}).items():
        if value is not None:
            pairs[key] = kvconfig.format_value(value)
    return RunConfig.from_pairs(pairs)
