"""Architecture descriptor and the named-tensor parameter container."""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .. import kvconfig
from ..errors import ConfigError, ShapeError
from ..imaging import PreprocessConfig

VARIANTS = ("plain", "multilevel")


def conv_out(size):
    # 3x3, stride 2, pad 1
    return (size + 2 - 3) // 2 + 1


@dataclass(frozen=True)
class ArchDescriptor:
    """MiniNet layout: a stride-2 stem, stride-2 stages, pooled taps, two FC layers.

    ``stage_channels[0]`` is the stem. The plain variant always taps the last
    stage only; the multilevel variant pools every stage in ``tap_stages``
    and concatenates them in index order.
    """

    variant: str = "multilevel"
    input_size: int = 64
    stage_channels: tuple[int, ...] = (8, 16, 32, 64)
    tap_stages: tuple[int, ...] = (1, 2, 3)
    head_hidden: int = 32
    classes: int = 2

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        chans = tuple(int(c) for c in self.stage_channels)
        if not chans or min(chans) < 1:
            raise ConfigError(f"stage_channels must be non-empty and positive, got {chans}")
        object.__setattr__(self, "stage_channels", chans)
        if self.variant == "plain":
            taps = (len(chans) - 1,)
        else:
            taps = tuple(sorted(set(int(t) for t in self.tap_stages)))
            if not taps:
                raise ConfigError("multilevel variant needs at least one tap stage")
            if taps[0] < 0 or taps[-1] >= len(chans):
                raise ConfigError(f"tap_stages {taps} out of range for {len(chans)} stages")
        object.__setattr__(self, "tap_stages", taps)
        if self.input_size < 1:
            raise ConfigError(f"input_size must be >= 1, got {self.input_size}")
        if self.head_hidden < 1:
            raise ConfigError(f"head_hidden must be >= 1, got {self.head_hidden}")
        if self.classes != 2:
            raise ConfigError("only binary classification (classes=2) is supported")

    @property
    def n_stages(self):
        return len(self.stage_channels)

    @property
    def feature_width(self):
        return sum(self.stage_channels[i] for i in self.tap_stages)

    def stage_sizes(self):
        sizes, s = [], self.input_size
        for _ in self.stage_channels:
            s = conv_out(s)
            sizes.append(s)
        return sizes

    def param_shapes(self):
        """Ordered ``name -> shape`` map; this order is also the file order."""
        shapes = {}
        cin = 3
        for i, cout in enumerate(self.stage_channels):
            shapes[f"stage{i}.w"] = (cout, cin, 3, 3)
            shapes[f"stage{i}.b"] = (cout,)
            cin = cout
        shapes["fc1.w"] = (self.feature_width, self.head_hidden)
        shapes["fc1.b"] = (self.head_hidden,)
        shapes["fc2.w"] = (self.head_hidden, self.classes)
        shapes["fc2.b"] = (self.classes,)
        return shapes

    def to_text(self):
        return kvconfig.dump(self)

    @classmethod
    def from_text(cls, text):
        return kvconfig.load(cls, text)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class ModelParams:
    arch: ArchDescriptor
    tensors: dict = field(default_factory=dict)
    preprocess: PreprocessConfig | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        expected = self.arch.param_shapes()
        if set(self.tensors) != set(expected):
            missing = sorted(set(expected) - set(self.tensors))
            extra = sorted(set(self.tensors) - set(expected))
            raise ShapeError("params", f"tensor names do not match arch "
                                       f"(missing {missing}, unexpected {extra})")
        for name, shape in expected.items():
            if tuple(self.tensors[name].shape) != shape:
                raise ShapeError(name, f"expected shape {shape}, got {self.tensors[name].shape}")
        # keep canonical order
        self.tensors = {name: self.tensors[name] for name in expected}

    def copy(self):
        return ModelParams(self.arch, {k: v.copy() for k, v in self.tensors.items()},
                           self.preprocess)

    def astype(self, dtype):
        return ModelParams(self.arch, {k: v.astype(dtype) for k, v in self.tensors.items()},
                           self.preprocess)

    def digest(self):
        from .serialize import model_to_bytes
        return hashlib.sha256(model_to_bytes(self)).hexdigest()


def zero_params(arch, preprocess=None):
    tensors = {n: np.zeros(s, dtype=np.float32) for n, s in arch.param_shapes().items()}
    return ModelParams(arch, tensors, preprocess)


def init_params(arch, seed, preprocess=None):
    """He-normal (fan-in) weights and zero biases drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in arch.param_shapes().items():
        if name.endswith(".b"):
            tensors[name] = np.zeros(shape, dtype=np.float32)
        else:
            fan_in = int(np.prod(shape[1:])) if name.startswith("stage") else shape[0]
            std = np.sqrt(2.0 / fan_in)
            tensors[name] = (rng.standard_normal(shape) * std).astype(np.float32)
    return ModelParams(arch, tensors, preprocess)
