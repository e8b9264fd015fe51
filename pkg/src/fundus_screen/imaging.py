"""Image container, PPM codec and the deterministic preprocessing chain.

The chain is center crop, optional bilinear resize, then per-channel local
mean subtraction: each channel minus its Gaussian blur, amplified and shifted
by an offset, re-quantized to bytes.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels, kvconfig
from .errors import DecodeError, DimensionError, ParameterError


@dataclass(frozen=True, eq=False)
class Image:
    """8-bit RGB raster; ``pixels`` is a read-only (height, width, 3) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8 or px.ndim != 3 or px.shape[2] != 3:
            raise DimensionError(f"expected (H, W, 3) uint8 pixels, got {px.dtype} {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise DimensionError(f"image must be at least 1x1, got {px.shape[1]}x{px.shape[0]}")
        px = np.ascontiguousarray(px)
        if px.flags.writeable:
            px = px.copy()
            px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_bytes(cls, width, height, data):
        if len(data) != width * height * 3:
            raise DimensionError(
                f"{width}x{height} RGB needs {width * height * 3} bytes, got {len(data)}")
        return cls(np.frombuffer(bytes(data), dtype=np.uint8).reshape(height, width, 3))

    @classmethod
    def filled(cls, width, height, rgb):
        return cls(np.broadcast_to(np.asarray(rgb, dtype=np.uint8), (height, width, 3)))

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def data(self):
        return self.pixels.tobytes()

    def pixel(self, x, y):
        return tuple(int(v) for v in self.pixels[y, x])

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f"Image({self.width}x{self.height})"


@dataclass(frozen=True)
class Channel:
    """Single float32 plane, used for per-channel filtering."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2 or arr.size == 0:
            raise DimensionError(f"channel must be a non-empty 2-D array, got shape {arr.shape}")
        object.__setattr__(self, "data", arr)

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]


@dataclass(frozen=True)
class PreprocessConfig:
    crop_size: int = 800
    resize_to: int = 448
    sigma: float = 10.0
    amplification: float = 4.0
    offset: float = 128.0

    def __post_init__(self):
        if self.crop_size < 1:
            raise ParameterError(f"crop_size must be >= 1, got {self.crop_size}")
        if self.resize_to < 0:
            raise ParameterError(f"resize_to must be >= 0, got {self.resize_to}")
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")
        if not self.amplification > 0:
            raise ParameterError(f"amplification must be > 0, got {self.amplification}")
        if not 0 <= self.offset <= 255:
            raise ParameterError(f"offset must lie in [0, 255], got {self.offset}")

    def to_text(self):
        return kvconfig.dump(self)

    @classmethod
    def from_text(cls, text):
        return kvconfig.load(cls, text)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


# ---------------------------------------------------------------- PPM codec

_WS = b" \t\r\n\v\f"


def _read_token(buf, pos):
    n = len(buf)
    while pos < n:
        ch = buf[pos:pos + 1]
        if ch == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch in _WS:
            pos += 1
        else:
            break
    start = pos
    while pos < n and buf[pos:pos + 1] not in _WS and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise DecodeError("malformed header: unexpected end of header", start)
    return buf[start:pos], start, pos


def decode_ppm(buf):
    """Decode a binary P6 stream with maxval 255."""
    buf = bytes(buf)
    if buf[:2] != b"P6":
        raise DecodeError("malformed header: missing P6 magic", 0)
    pos = 2
    values = []
    for field in ("width", "height", "maxval"):
        tok, start, pos = _read_token(buf, pos)
        if not tok.isdigit():
            raise DecodeError(f"malformed header: bad {field} {tok!r}", start)
        values.append((int(tok), start))
    (width, wpos), (height, hpos), (maxval, mpos) = values
    if width < 1:
        raise DecodeError("malformed header: width must be >= 1", wpos)
    if height < 1:
        raise DecodeError("malformed header: height must be >= 1", hpos)
    if maxval != 255:
        raise DecodeError(f"unsupported maxval {maxval}", mpos)
    if pos >= len(buf) or buf[pos:pos + 1] not in _WS:
        raise DecodeError("malformed header: missing whitespace before pixel data", pos)
    pos += 1
    need = width * height * 3
    if len(buf) - pos < need:
        raise DecodeError(
            f"truncated pixel data: need {need} bytes, have {len(buf) - pos}", len(buf))
    return Image.from_bytes(width, height, buf[pos:pos + need])


def encode_ppm(img):
    return f"P6\n{img.width} {img.height}\n255\n".encode("ascii") + img.data


_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def decode_image(buf):
    """Decode P6 directly, or PNG/other formats through Pillow when installed."""
    if buf[:2] == b"P6":
        return decode_ppm(buf)
    if buf[:8] == _PNG_MAGIC:
        try:
            import io
            from PIL import Image as PILImage
        except ImportError:
            raise DecodeError("PNG input requires Pillow (pip install fundus-screen[png])", 0) \
                from None
        with PILImage.open(io.BytesIO(buf)) as pil:
            return Image(np.asarray(pil.convert("RGB"), dtype=np.uint8))
    raise DecodeError("unrecognized image format", 0)


def read_image(path):
    return decode_image(Path(path).read_bytes())


def write_image(path, img):
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image as PILImage
        PILImage.fromarray(np.asarray(img.pixels)).save(path)
    else:
        path.write_bytes(encode_ppm(img))


# ---------------------------------------------------------------- geometry

def center_crop(img, crop_w, crop_h):
    if crop_w < 1 or crop_h < 1:
        raise DimensionError(f"crop must be at least 1x1, got {crop_w}x{crop_h}")
    if crop_w > img.width or crop_h > img.height:
        raise DimensionError(
            f"crop {crop_w}x{crop_h} larger than source {img.width}x{img.height}")
    x0, y0 = crop_offsets(img.width, img.height, crop_w, crop_h)
    return Image(img.pixels[y0:y0 + crop_h, x0:x0 + crop_w])


def crop_offsets(width, height, crop_w, crop_h):
    return (width - crop_w) // 2, (height - crop_h) // 2


def round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def to_bytes(values):
    """Quantize float pixels: round half away from zero, clamp to [0, 255]."""
    return np.clip(round_half_away(values), 0, 255).astype(np.uint8)


def resize_bilinear(img, out_w, out_h):
    if out_w < 1 or out_h < 1:
        raise DimensionError(f"resize target must be at least 1x1, got {out_w}x{out_h}")
    if (out_w, out_h) == (img.width, img.height):
        return img
    out = kernels.resize_bilinear(img.pixels.astype(np.float64), out_h, out_w)
    return Image(to_bytes(out))


# ---------------------------------------------------------------- blur / normalize

def gaussian_kernel(sigma):
    """Normalized 1-D Gaussian taps on ``[-ceil(3 sigma), ceil(3 sigma)]``."""
    if not sigma > 0 or not math.isfinite(sigma):
        raise ParameterError(f"sigma must be a positive finite number, got {sigma}")
    r = math.ceil(3 * sigma)
    i = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(i * i) / (2.0 * sigma * sigma))
    return k / k.sum()


def blur_plane(plane, sigma):
    """Separable reflect-101 Gaussian blur of a 2-D array, in float64."""
    k = gaussian_kernel(sigma)
    return kernels.blur_axis(kernels.blur_axis(plane, k, axis=1), k, axis=0)


def gaussian_blur(ch, sigma):
    return Channel(blur_plane(ch.data.astype(np.float64), sigma).astype(np.float32))


def split_channels(img):
    return [Channel(img.pixels[:, :, c]) for c in range(3)]


def merge_channels(channels):
    """Re-interleave three float planes into an Image (values quantized)."""
    return Image(to_bytes(np.stack([c.data for c in channels], axis=-1).astype(np.float64)))


def color_normalize(img, cfg):
    out = np.empty(img.pixels.shape, dtype=np.uint8)
    for c in range(3):
        orig = img.pixels[:, :, c].astype(np.float64)
        residual = orig - blur_plane(orig, cfg.sigma)
        out[:, :, c] = to_bytes(cfg.amplification * residual + cfg.offset)
    return Image(out)


def preprocess(img, cfg):
    """Crop, optionally resize, then color-normalize, in that order."""
    if cfg.crop_size > min(img.width, img.height):
        raise DimensionError(
            f"crop_size {cfg.crop_size} exceeds source {img.width}x{img.height}")
    out = center_crop(img, cfg.crop_size, cfg.crop_size)
    if cfg.resize_to > 0:
        out = resize_bilinear(out, cfg.resize_to, cfg.resize_to)
    return color_normalize(out, cfg)


def to_network_input(images):
    """Stack Images into a float64 (N, 3, H, W) batch scaled to [0, 1]."""
    arr = np.stack([im.pixels for im in images]).astype(np.float64) / 255.0
    return arr.transpose(0, 3, 1, 2)
