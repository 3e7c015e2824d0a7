"""The ``.l0ne`` file format.

Layout, all integers little-endian::

    magic      4s   b"L0NE"
    version    u8   1
    precision  u8   16
    omega0     f32
    height     u32
    width      u32
    n_widths   u8   number of feature widths, input and output included
    widths     u16 * n_widths
    mask       ceil(n_params / 8) bytes, bit i of the flat order at
               byte i // 8, bit i % 8 (LSB first); padding bits are zero
    payload    float16 * popcount(mask), flat order

Only parameters whose float16 value is non-zero are stored.
"""

from __future__ import annotations

import struct

import numpy as np

from .bpp import HALF_BITS, cast_f16
from .imageio import make_coord_grid, quantize_8bit
from .model import TrainedModel
from .siren import SirenConfig, forward

__all__ = [
    "MAGIC",
    "VERSION",
    "CodecError",
    "BadMagicError",
    "TruncatedError",
    "encode",
    "decode",
    "decompress_to_image",
    "size_report",
]

MAGIC = b"L0NE"
VERSION = 1
_HEAD = struct.Struct("<4sBBfIIB")


class CodecError(ValueError):
    """Malformed or unsupported compressed model."""


class BadMagicError(CodecError):
    pass


class TruncatedError(CodecError):
    pass


def encode(model: TrainedModel, height: int, width: int) -> bytes:
    cfg = model.config
    widths = cfg.widths
    if len(widths) > 255 or max(widths) > 0xFFFF:
        raise ValueError(f"architecture {cfg} does not fit the header fields")
    if not (0 < height <= 0xFFFFFFFF and 0 < width <= 0xFFFFFFFF):
        raise ValueError(f"image dimensions {height}x{width} do not fit the header fields")
    half = cast_f16(model.effective)
    keep = half != 0
    head = _HEAD.pack(MAGIC, VERSION, HALF_BITS, cfg.omega0, height, width, len(widths))
    return b"".join([
        head,
        struct.pack(f"<{len(widths)}H", *widths),
        np.packbits(keep, bitorder="little").tobytes(),
        half[keep].astype("<f2").tobytes(),
    ])


def decode(data: bytes) -> tuple[TrainedModel, tuple[int, int]]:
    """Parse a compressed model; returns the model and its (height, width)."""
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError("not an .l0ne file (bad magic)")
    if len(data) < _HEAD.size:
        raise TruncatedError("header truncated")
    _, version, precision, omega0, height, width, n_widths = _HEAD.unpack_from(data)
    if version != VERSION:
        raise CodecError(f"unsupported version {version}")
    if precision != HALF_BITS:
        raise CodecError(f"unsupported precision tag {precision}")
    offset = _HEAD.size
    if len(data) < offset + 2 * n_widths:
        raise TruncatedError("layer table truncated")
    widths = struct.unpack_from(f"<{n_widths}H", data, offset)
    offset += 2 * n_widths
    hidden = widths[1:-1]
    if n_widths < 3 or len(set(hidden)) != 1:
        raise CodecError(f"layer widths {widths} do not describe a uniform-width network")
    try:
        cfg = SirenConfig(len(hidden), hidden[0], float(omega0), widths[0], widths[-1])
    except ValueError as exc:
        raise CodecError(str(exc)) from None

    n = cfg.n_params
    mask_len = (n + 7) // 8
    if len(data) < offset + mask_len:
        raise TruncatedError("mask truncated")
    packed = np.frombuffer(data, dtype=np.uint8, count=mask_len, offset=offset)
    bits = np.unpackbits(packed, bitorder="little")
    if bits[n:].any():
        raise CodecError("non-zero mask padding bits")
    keep = bits[:n].astype(bool)
    offset += mask_len

    count = int(keep.sum())
    expected = offset + 2 * count
    if len(data) < expected:
        raise TruncatedError(f"payload truncated: need {2 * count} bytes, have {len(data) - offset}")
    if len(data) > expected:
        raise CodecError(f"{len(data) - expected} trailing bytes after payload (mask/payload count mismatch)")
    values = np.frombuffer(data, dtype="<f2", count=count, offset=offset)
    if np.any(values == 0):
        raise CodecError("payload stores a zero for a masked-in parameter")

    flat = np.zeros(n, dtype=np.float32)
    flat[keep] = values.astype(np.float32)
    model = TrainedModel(cfg, flat, np.ones(n, dtype=np.float32), keep)
    return model, (int(height), int(width))


def decompress_to_image(model: TrainedModel, height: int, width: int) -> np.ndarray:
    """Render the half-precision model on an H x W grid as uint8 RGB."""
    coords = make_coord_grid(height, width, np.float32)
    pred, _ = forward(model.half_params(), coords)
    return quantize_8bit(pred).reshape(height, width, 3)


def size_report(data: bytes) -> dict:
    """Payload BPP (parameter bits only) next to the whole-file BPP."""
    model, (h, w) = decode(data)
    active = int(model.mask.sum())
    pixels = h * w
    return {
        "active_params": active,
        "bpp": HALF_BITS * active / pixels,
        "file_bpp": 8 * len(data) / pixels,
        "height": h,
        "width": w,
    }
