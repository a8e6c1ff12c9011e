"""Minimal binary netpbm IO: PPM (P6) for frames, PGM (P5) for masks.

All files use maxval 255. Masks are stored with values {0, 255} and read
back as {0, 1}.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ValidationError


def _read_header(data: bytes, magic: bytes) -> tuple[int, int, int]:
    """Parse `magic w h maxval` allowing comments, return (w, h, offset)."""
    if not data.startswith(magic):
        raise ValidationError(f"expected {magic!r} header, got {data[:2]!r}")
    fields: list[int] = []
    i = len(magic)
    while len(fields) < 3:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace():
            j += 1
        if j == i:
            raise ValidationError("truncated netpbm header")
        fields.append(int(data[i:j]))
        i = j
    i += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise ValidationError(f"unsupported maxval {maxval}")
    return width, height, i


def write_ppm(path: str | Path, image: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 array as a binary PPM."""
    image = np.ascontiguousarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValidationError(f"expected (H, W, 3) image, got {image.shape}")
    h, w = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(image.tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    w, h, off = _read_header(data, b"P6")
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=off)
    return pixels.reshape(h, w, 3).copy()


def write_pgm(path: str | Path, mask: np.ndarray) -> None:
    """Write a binary mask as PGM with values {0, 255}."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValidationError(f"expected (H, W) mask, got {mask.shape}")
    out = np.where(mask > 0, 255, 0).astype(np.uint8)
    h, w = out.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(out.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a PGM mask back as a (H, W) uint8 array with values {0, 1}."""
    data = Path(path).read_bytes()
    w, h, off = _read_header(data, b"P5")
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=off)
    return (pixels.reshape(h, w) > 0).astype(np.uint8)
