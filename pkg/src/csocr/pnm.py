"""Minimal PGM (P2/P5) reader and writer, plus PNG input via Pillow."""

from __future__ import annotations

import os
import re

import numpy as np

from .imaging import BinaryImage, GrayImage

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _header_tokens(data: bytes, count: int):
    """Pull ``count`` whitespace separated header tokens, skipping comments."""
    pos = 0
    tokens = []
    for _ in range(count):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise ValueError("truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens, pos


def parse_pgm(data: bytes) -> np.ndarray:
    """Decode PGM bytes into a float array scaled to [0, 1]."""
    (magic, w, h, maxval), pos = _header_tokens(data, 4)
    width, height, maxval = int(w), int(h), int(maxval)
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ValueError("bad PGM dimensions or maxval")
    n = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates the header from the raster
        raster = data[pos + 1:]
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        values = np.frombuffer(raster, dtype=dtype, count=n)
    elif magic == b"P2":
        values = np.array(data[pos:].split()[:n], dtype=np.int64)
        if values.size != n:
            raise ValueError("truncated PGM raster")
    else:
        raise ValueError(f"not a PGM file (magic {magic!r})")
    values = values.astype(float).reshape(height, width)
    if values.max(initial=0) > maxval:
        raise ValueError("PGM sample exceeds maxval")
    return values / maxval


def read_gray(path) -> GrayImage:
    """Load a PGM or 8-bit PNG as a :class:`GrayImage`."""
    path = os.fspath(path)
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        if data[:8] == b"\x89PNG\r\n\x1a\n":
            from PIL import Image
            with Image.open(path) as im:
                arr = np.asarray(im.convert("L"), dtype=float) / 255.0
        else:
            arr = parse_pgm(data)
    except (ValueError, OSError) as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc
    return GrayImage(arr)


def encode_pgm(values: np.ndarray) -> bytes:
    """Encode an array of 0..255 integers as binary PGM (P5)."""
    arr = np.asarray(values)
    h, w = arr.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + arr.astype(np.uint8).tobytes()


def write_gray(path, pixels: np.ndarray) -> None:
    """Write intensities in [0, 1] (clamped) as an 8-bit PGM."""
    scaled = np.rint(np.clip(pixels, 0.0, 1.0) * 255.0)
    with open(path, "wb") as fh:
        fh.write(encode_pgm(scaled))


def write_binary(path, image: BinaryImage) -> None:
    """Write a binary image as PGM: ink (1) is black, background white."""
    with open(path, "wb") as fh:
        fh.write(encode_pgm(np.where(image.pixels == 1, 0, 255)))
