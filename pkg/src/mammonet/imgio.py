"""Grayscale image reading/writing: binary PGM (P5) and 8-bit grayscale PNG.

PGM is the cache format for prepared patches, so the codec lives here rather
than behind a library: writes are byte-deterministic (fixed header layout, no
comments) and reads fail with the byte offset of the first malformed field.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .errors import FormatError, InputError

_WHITESPACE = b" \t\n\r\x0b\x0c"


def write_pgm(path: str | os.PathLike, image: np.ndarray) -> None:
    """Write a 2-D uint8 array as binary PGM (P5, maxval 255)."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise InputError(f"PGM writer expects a 2-D array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise InputError(f"PGM writer expects uint8, got {arr.dtype}")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(arr.tobytes())


class _Scanner:
    """Tracks a byte offset through a PGM header."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.token_start = 0

    def skip_separators(self) -> None:
        # whitespace and '#'-to-end-of-line comments may precede any token
        while self.pos < len(self.data):
            b = self.data[self.pos:self.pos + 1]
            if b in (b"#",):
                nl = self.data.find(b"\n", self.pos)
                if nl < 0:
                    raise FormatError("unterminated comment in PGM header", self.pos)
                self.pos = nl + 1
            elif b in _WHITESPACE:
                self.pos += 1
            else:
                return
        raise FormatError("truncated PGM header", self.pos)

    def read_int(self, what: str) -> int:
        self.skip_separators()
        start = self.token_start = self.pos
        while self.pos < len(self.data) and self.data[self.pos:self.pos + 1].isdigit():
            self.pos += 1
        if self.pos == start:
            raise FormatError(f"expected {what} in PGM header", start)
        return int(self.data[start:self.pos])


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary PGM (P5) file into a 2-D uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise FormatError("not a binary PGM file (missing P5 magic)", 0)
    sc = _Scanner(data)
    sc.pos = 2
    width = sc.read_int("width")
    height = sc.read_int("height")
    maxval = sc.read_int("maxval")
    maxval_at = sc.token_start
    if width <= 0 or height <= 0:
        raise FormatError(f"invalid PGM dimensions {width}x{height}", 2)
    if maxval != 255:
        raise FormatError(f"unsupported PGM maxval {maxval} (only 255)", maxval_at)
    if sc.pos >= len(data) or data[sc.pos:sc.pos + 1] not in _WHITESPACE:
        raise FormatError("expected single whitespace after maxval", sc.pos)
    sc.pos += 1
    expected = width * height
    pixels = data[sc.pos:]
    if len(pixels) < expected:
        raise FormatError(
            f"PGM pixel data truncated: expected {expected} bytes, got {len(pixels)}",
            sc.pos + len(pixels))
    if len(pixels) > expected:
        raise FormatError(
            f"trailing bytes after PGM pixel data", sc.pos + expected)
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width).copy()


def read_png(path: str | os.PathLike) -> np.ndarray:
    """Read an 8-bit grayscale PNG into a 2-D uint8 array."""
    with Image.open(path) as im:
        if im.mode != "L":
            raise InputError(
                f"{path}: expected 8-bit grayscale PNG (mode L), got mode {im.mode}")
        return np.asarray(im, dtype=np.uint8)


def read_image(path: str | os.PathLike) -> np.ndarray:
    """Read a grayscale image by extension (.pgm or .png)."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".pgm":
        return read_pgm(path)
    if ext == ".png":
        return read_png(path)
    raise InputError(f"{path}: unsupported image extension {ext!r} (use .pgm or .png)")
