"""Image file formats.

Two formats cover the toolkit's needs: binary PGM (P5, maxval 255) for
8-bit interchange, and a raw float format ("FPD1" magic, little-endian
dimensions and float32 payload) that preserves full precision through the
denoising pipeline.  Writing what was just read reproduces the file byte
for byte in both formats.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np


class ImageFormatError(ValueError):
    """Base for all image parsing failures."""


class BadMagicError(ImageFormatError):
    pass


class TruncatedFileError(ImageFormatError):
    pass


class UnsupportedMaxvalError(ImageFormatError):
    pass


FPD1_MAGIC = b"FPD1"
FPD1_HEADER_BYTES = 12


def quantize_u8(img: np.ndarray) -> np.ndarray:
    """Round half away from zero, then clamp to [0, 255]."""
    img = np.asarray(img, dtype=np.float64)
    rounded = np.sign(img) * np.floor(np.abs(img) + 0.5)
    return np.clip(rounded, 0, 255).astype(np.uint8)


def encode_pgm(img: np.ndarray) -> bytes:
    data = quantize_u8(img)
    h, w = data.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + data.tobytes()


def _pgm_tokens(buf: bytes, start: int):
    """Yield (token, next_pos) over PNM header tokens, skipping comments."""
    pos = start
    while True:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos] != 0x0A:
                pos += 1
            continue
        break
    end = pos
    while end < len(buf) and not buf[end : end + 1].isspace():
        end += 1
    if end == pos:
        raise TruncatedFileError("PGM header ended before all fields were read")
    return buf[pos:end], end


def decode_pgm(buf: bytes) -> np.ndarray:
    if buf[:2] != b"P5":
        raise BadMagicError(f"not a binary PGM (magic {buf[:2]!r})")
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _pgm_tokens(buf, pos)
        try:
            fields.append(int(token))
        except ValueError as exc:
            raise ImageFormatError(f"bad PGM header token {token!r}") from exc
    width, height, maxval = fields
    if maxval != 255:
        raise UnsupportedMaxvalError(f"only maxval 255 is supported, got {maxval}")
    pos += 1  # exactly one whitespace byte separates header and raster
    raster = buf[pos : pos + width * height]
    if len(raster) < width * height:
        raise TruncatedFileError(
            f"PGM raster has {len(raster)} bytes, expected {width * height}"
        )
    return (
        np.frombuffer(raster, dtype=np.uint8).reshape(height, width).astype(np.float64)
    )


def encode_fpd1(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ImageFormatError(f"float image must be 2-D, got shape {img.shape}")
    h, w = img.shape
    return (
        FPD1_MAGIC
        + struct.pack("<II", w, h)
        + np.ascontiguousarray(img, dtype="<f4").tobytes()
    )


def decode_fpd1(buf: bytes) -> np.ndarray:
    if buf[:4] != FPD1_MAGIC:
        raise BadMagicError(f"not a float image (magic {buf[:4]!r})")
    if len(buf) < FPD1_HEADER_BYTES:
        raise TruncatedFileError("float image header is incomplete")
    w, h = struct.unpack("<II", buf[4:12])
    payload = buf[FPD1_HEADER_BYTES : FPD1_HEADER_BYTES + 4 * w * h]
    if len(payload) < 4 * w * h:
        raise TruncatedFileError(
            f"float image payload has {len(payload)} bytes, expected {4 * w * h}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(h, w).astype(np.float32)


def read_image(path) -> np.ndarray:
    """Load a PGM or float image, dispatching on content magic."""
    buf = Path(path).read_bytes()
    if buf[:4] == FPD1_MAGIC:
        return decode_fpd1(buf).astype(np.float64)
    if buf[:2] == b"P5":
        return decode_pgm(buf)
    raise BadMagicError(f"{path}: unrecognized image magic {buf[:4]!r}")


def write_image(img: np.ndarray, path) -> None:
    """Write by extension: ``.pgm`` as 8-bit PGM, ``.fpd1`` as raw floats."""
    path = Path(path)
    if path.suffix == ".pgm":
        path.write_bytes(encode_pgm(img))
    elif path.suffix == ".fpd1":
        path.write_bytes(encode_fpd1(img))
    else:
        raise ImageFormatError(
            f"{path}: unknown image extension {path.suffix!r} (use .pgm or .fpd1)"
        )
