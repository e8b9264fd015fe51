"""Seeded training augmentation and the fixed test-time view set.

Randomness comes from per-(seed, image, epoch) streams so a batch can be
augmented in any order, or in parallel, with identical results.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import kernels, kvconfig
from .errors import ParameterError
from .imaging import Image, to_bytes

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x):
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class RngStream:
    """xorshift64* generator. Cheap to derive, never share one between images."""

    __slots__ = ("state",)

    def __init__(self, state):
        state &= MASK64
        self.state = state or _GOLDEN

    def next_u64(self):
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & MASK64

    def uniform(self):
        """Float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform_in(self, lo, hi):
        return lo + (hi - lo) * self.uniform()

    def permutation(self, n):
        """Fisher-Yates shuffle of ``range(n)``."""
        out = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            out[i], out[j] = out[j], out[i]
        return out


def rng_for(master_seed, image_index, epoch):
    s = splitmix64(master_seed & MASK64)
    s = splitmix64(s ^ (image_index & MASK64))
    s = splitmix64(s ^ (epoch & MASK64))
    return RngStream(s)


@dataclass(frozen=True)
class TransformSpec:
    flip_h: bool = False
    flip_v: bool = False
    rotation_deg: float = 0.0
    brightness: float = 1.0
    contrast: float = 1.0
    zoom: float = 1.0

    def __post_init__(self):
        for name in ("brightness", "contrast", "zoom"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)}")

    @property
    def is_identity(self):
        return self == IDENTITY


IDENTITY = TransformSpec()

TTA_VIEWS = ("identity", "flip_h", "flip_v", "flip_hv", "rot_pos", "rot_neg")


@dataclass(frozen=True)
class AugmentPolicy:
    flip_h: bool = True
    flip_h_prob: float = 0.5
    flip_v: bool = True
    flip_v_prob: float = 0.5
    rotation: bool = True
    rotation_range: tuple[float, float] = (-45.0, 45.0)
    rotation_prob: float = 0.5
    brightness: bool = True
    brightness_range: tuple[float, float] = (0.8, 1.2)
    brightness_prob: float = 0.5
    contrast: bool = True
    contrast_range: tuple[float, float] = (0.8, 1.2)
    contrast_prob: float = 0.5
    zoom: bool = True
    zoom_range: tuple[float, float] = (0.9, 1.1)
    zoom_prob: float = 0.5
    tta: bool = True
    tta_views: tuple[str, ...] = TTA_VIEWS
    tta_rotation_deg: float = 15.0

    def __post_init__(self):
        for fam in ("flip_h", "flip_v", "rotation", "brightness", "contrast", "zoom"):
            p = getattr(self, f"{fam}_prob")
            if not 0.0 <= p <= 1.0:
                raise ParameterError(f"{fam}_prob must lie in [0, 1], got {p}")
        for fam in ("rotation", "brightness", "contrast", "zoom"):
            rng = tuple(getattr(self, f"{fam}_range"))
            if len(rng) != 2 or not rng[0] <= rng[1]:
                raise ParameterError(f"{fam}_range must be an ordered pair, got {rng}")
            object.__setattr__(self, f"{fam}_range", rng)
        for fam in ("brightness", "contrast", "zoom"):
            if not getattr(self, f"{fam}_range")[0] > 0:
                raise ParameterError(f"{fam}_range must be positive")
        bad = [v for v in self.tta_views if v not in TTA_VIEWS]
        if bad:
            raise ParameterError(f"unknown TTA views: {', '.join(bad)}")

    @classmethod
    def disabled(cls, **changes):
        """Policy with every random family and TTA switched off."""
        off = dict(flip_h=False, flip_v=False, rotation=False, brightness=False,
                   contrast=False, zoom=False, tta=False)
        off.update(changes)
        return cls(**off)

    def to_text(self):
        return kvconfig.dump(self)

    @classmethod
    def from_text(cls, text):
        return kvconfig.load(cls, text)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def sample_transform(rng, policy):
    # every enabled family consumes exactly two draws (gate, value) so later
    # families see the same stream regardless of earlier outcomes
    def gated(enabled, prob):
        if not enabled:
            return None
        gate = rng.uniform()
        value = rng.uniform()
        return value if gate < prob else None

    fh = gated(policy.flip_h, policy.flip_h_prob)
    fv = gated(policy.flip_v, policy.flip_v_prob)
    spec = {"flip_h": fh is not None, "flip_v": fv is not None}
    for fam, key in (("rotation", "rotation_deg"), ("brightness", "brightness"),
                     ("contrast", "contrast"), ("zoom", "zoom")):
        u = gated(getattr(policy, fam), getattr(policy, f"{fam}_prob"))
        if u is not None:
            lo, hi = getattr(policy, f"{fam}_range")
            spec[key] = lo + (hi - lo) * u
    return TransformSpec(**spec)


def rotation_matrix(width, height, degrees):
    """Output-to-source map for a rotation about the image center."""
    th = math.radians(degrees)
    c, s = math.cos(th), math.sin(th)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    return np.array([[c, s, cx - c * cx - s * cy],
                     [-s, c, cy + s * cx - c * cy]])


def zoom_matrix(width, height, zoom):
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    inv = 1.0 / zoom
    return np.array([[inv, 0.0, cx - inv * cx],
                     [0.0, inv, cy - inv * cy]])


def apply_transform(img, t):
    px = img.pixels
    if t.flip_h:
        px = px[:, ::-1]
    if t.flip_v:
        px = px[::-1]
    if t.rotation_deg == 0.0 and t.zoom == 1.0 and t.brightness == 1.0 and t.contrast == 1.0:
        return img if px is img.pixels else Image(px)

    f = px.astype(np.float64)
    h, w = f.shape[:2]
    if t.rotation_deg != 0.0:
        f = np.clip(kernels.warp_bilinear(f, rotation_matrix(w, h, t.rotation_deg)), 0.0, 255.0)
    if t.zoom != 1.0:
        f = np.clip(kernels.warp_bilinear(f, zoom_matrix(w, h, t.zoom)), 0.0, 255.0)
    if t.brightness != 1.0:
        f = np.clip(f * t.brightness, 0.0, 255.0)
    if t.contrast != 1.0:
        f = np.clip((f - 128.0) * t.contrast + 128.0, 0.0, 255.0)
    return Image(to_bytes(f))


def view_spec(name, policy):
    return {
        "identity": IDENTITY,
        "flip_h": TransformSpec(flip_h=True),
        "flip_v": TransformSpec(flip_v=True),
        "flip_hv": TransformSpec(flip_h=True, flip_v=True),
        "rot_pos": TransformSpec(rotation_deg=policy.tta_rotation_deg),
        "rot_neg": TransformSpec(rotation_deg=-policy.tta_rotation_deg),
    }[name]


def tta_set(policy):
    """Ordered, deterministic view list; always starts with the identity."""
    if not policy.tta:
        return [IDENTITY]
    views = [IDENTITY]
    for name in policy.tta_views:
        spec = view_spec(name, policy)
        if spec not in views:
            views.append(spec)
    return views
