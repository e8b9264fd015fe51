"""Binary model files.

Layout (all integers little-endian)::

    b"MLNN"  u32 version
    u32 len + arch key=value text
    u32 len + preprocess key=value text (len 0 when absent)
    u32 tensor count
    per tensor: u16 len + UTF-8 name, u8 rank, u32 dims..., float32 payload
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ConfigError, FundusScreenError, ModelFormatError, ParameterError
from ..imaging import PreprocessConfig
from .params import ArchDescriptor, ModelParams

MAGIC = b"MLNN"
VERSION = 1


def model_to_bytes(params):
    out = [MAGIC, struct.pack("<I", VERSION)]
    for text in (params.arch.to_text(),
                 params.preprocess.to_text() if params.preprocess is not None else ""):
        blob = text.encode("utf-8")
        out.append(struct.pack("<I", len(blob)))
        out.append(blob)
    out.append(struct.pack("<I", len(params.tensors)))
    for name, arr in params.tensors.items():
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)))
        out.append(raw)
        out.append(struct.pack("<B", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise ModelFormatError(f"unexpected end of file at byte {len(self.buf)} "
                                   f"(needed {n} bytes at offset {self.pos})")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def model_from_bytes(buf):
    r = _Reader(bytes(buf))
    if r.take(4) != MAGIC:
        raise ModelFormatError("bad magic: not an MLNN model file")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise ModelFormatError(f"unsupported model format version {version} (expected {VERSION})")
    (alen,) = r.unpack("<I")
    arch_text = r.take(alen).decode("utf-8")
    (plen,) = r.unpack("<I")
    pre_text = r.take(plen).decode("utf-8")
    try:
        arch = ArchDescriptor.from_text(arch_text)
        preprocess = PreprocessConfig.from_text(pre_text) if plen else None
    except (ConfigError, ParameterError) as exc:
        raise ModelFormatError(f"bad config block: {exc}") from exc

    (count,) = r.unpack("<I")
    expected = arch.param_shapes()
    if count != len(expected):
        raise ModelFormatError(f"tensor count {count} inconsistent with arch ({len(expected)})")
    tensors = {}
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        (rank,) = r.unpack("<B")
        dims = r.unpack(f"<{rank}I")
        if name in tensors:
            raise ModelFormatError(f"duplicate tensor {name!r}")
        if expected.get(name) != tuple(dims):
            raise ModelFormatError(f"tensor {name!r} shape {tuple(dims)} inconsistent with arch")
        size = int(np.prod(dims)) if dims else 1
        payload = r.take(4 * size)
        tensors[name] = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(dims)
    if r.pos != len(r.buf):
        raise ModelFormatError(f"{len(r.buf) - r.pos} trailing bytes after last tensor")
    try:
        return ModelParams(arch, tensors, preprocess)
    except FundusScreenError as exc:
        raise ModelFormatError(str(exc)) from exc


def save_model(params, path):
    Path(path).write_bytes(model_to_bytes(params))


def load_model(path):
    return model_from_bytes(Path(path).read_bytes())
