"""Character segmentation: adaptive thresholding, connected components,
size filtering and fixed-size resampling of binary glyphs.

Images are stored as 2-D numpy arrays indexed ``[row, col]``.  Flattening
is always row-major, so pixel ``(r, c)`` of an ``S x S`` segment lands at
index ``r * S + c`` of the signal vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy import ndimage

DARK_ON_LIGHT = "dark_on_light"
LIGHT_ON_DARK = "light_on_dark"

DEFAULT_WINDOW = 15
DEFAULT_OFFSET = 0.05
DEFAULT_MIN_PIXELS = 30
DEFAULT_SEGMENT_SIZE = 16

BBox = Tuple[int, int, int, int]


@dataclass(frozen=True)
class GrayImage:
    """Grayscale raster with intensities in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 2 or px.size == 0:
            raise ValueError("GrayImage needs a non-empty 2-D array")
        if np.any(px < 0.0) or np.any(px > 1.0) or not np.all(np.isfinite(px)):
            raise ValueError("GrayImage intensities must lie in [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class BinaryImage:
    """Binary raster, 1 marks foreground (ink)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError("BinaryImage needs a 2-D array")
        if not np.all((px == 0) | (px == 1)):
            raise ValueError("BinaryImage pixels must be 0 or 1")
        px = px.astype(np.uint8)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other):
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Component:
    """A connected foreground region cropped to its bounding box.

    ``bbox`` is ``(x0, y0, w, h)`` in source image coordinates.
    """

    bbox: BBox
    mask: BinaryImage

    @property
    def pixel_count(self) -> int:
        return int(self.mask.pixels.sum())


@dataclass(frozen=True, eq=False)
class Segment:
    image: BinaryImage
    source_bbox: BBox | None = None

    @property
    def size(self) -> int:
        return self.image.width


@dataclass(frozen=True, eq=False)
class SignalVector:
    values: np.ndarray
    dims: Tuple[int, int]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if vals.size != self.dims[0] * self.dims[1]:
            raise ValueError(
                f"signal length {vals.size} does not match dims {self.dims}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def as_image(self) -> np.ndarray:
        return self.values.reshape(self.dims)


def local_mean(pixels: np.ndarray, window: int) -> np.ndarray:
    """Mean over a ``window x window`` box centred on every pixel.

    Boxes are truncated at the border, and the mean is taken over the
    in-bounds pixels only.
    """
    h, w = pixels.shape
    half = window // 2
    # summed-area table with a zero row/column in front
    sat = np.zeros((h + 1, w + 1))
    sat[1:, 1:] = np.cumsum(np.cumsum(pixels, axis=0), axis=1)
    r = np.arange(h)
    c = np.arange(w)
    r0 = np.clip(r - half, 0, h)[:, None]
    r1 = np.clip(r + half + 1, 0, h)[:, None]
    c0 = np.clip(c - half, 0, w)[None, :]
    c1 = np.clip(c + half + 1, 0, w)[None, :]
    total = sat[r1, c1] - sat[r0, c1] - sat[r1, c0] + sat[r0, c0]
    count = (r1 - r0) * (c1 - c0)
    return total / count


def binarize_adaptive(img: GrayImage, window: int = DEFAULT_WINDOW,
                      offset: float = DEFAULT_OFFSET,
                      polarity: str = DARK_ON_LIGHT) -> BinaryImage:
    """Threshold every pixel against the mean of its neighbourhood.

    With ``dark_on_light`` a pixel is foreground when it is darker than
    ``local_mean - offset``; with ``light_on_dark`` when it is brighter than
    ``local_mean + offset``.
    """
    if window % 2 != 1 or window < 3 or window > min(img.width, img.height):
        raise ValueError(
            f"window must be odd and in [3, {min(img.width, img.height)}], "
            f"got {window}")
    if not 0.0 <= offset <= 1.0:
        raise ValueError(f"offset must lie in [0, 1], got {offset}")
    mean = local_mean(img.pixels, window)
    if polarity == DARK_ON_LIGHT:
        fg = img.pixels < mean - offset
    elif polarity == LIGHT_ON_DARK:
        fg = img.pixels > mean + offset
    else:
        raise ValueError(f"unknown polarity {polarity!r}")
    return BinaryImage(fg.astype(np.uint8))


def connected_components(binary: BinaryImage,
                         connectivity: int = 8) -> List[Component]:
    """Label maximal connected foreground regions.

    Components come back ordered by the top-left corner of their bounding
    box (row first), larger components first on ties.
    """
    if connectivity == 8:
        structure = np.ones((3, 3), dtype=int)
    elif connectivity == 4:
        structure = ndimage.generate_binary_structure(2, 1)
    else:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, n = ndimage.label(binary.pixels, structure=structure)
    comps = []
    for idx, slc in enumerate(ndimage.find_objects(labels), start=1):
        rows, cols = slc
        mask = (labels[slc] == idx).astype(np.uint8)
        bbox = (cols.start, rows.start, cols.stop - cols.start,
                rows.stop - rows.start)
        comps.append(Component(bbox=bbox, mask=BinaryImage(mask)))
    comps.sort(key=lambda c: (c.bbox[1], c.bbox[0], -c.pixel_count))
    return comps


def filter_small(components: Sequence[Component],
                 min_pixels: int = DEFAULT_MIN_PIXELS) -> List[Component]:
    if min_pixels < 0:
        raise ValueError("min_pixels must be non-negative")
    return [c for c in components if c.pixel_count >= min_pixels]


def resample_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with pixel-centre alignment.

    Output pixel ``i`` samples the source at ``(i + 0.5) * in / out - 0.5``,
    clamped to the valid source range, so resampling to the same size is
    the identity.
    """
    in_h, in_w = image.shape

    def coords(n_out, n_in):
        src = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
        src = np.clip(src, 0.0, n_in - 1)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    r0, r1, fr = coords(out_h, in_h)
    c0, c1, fc = coords(out_w, in_w)
    img = np.asarray(image, dtype=float)
    top = img[r0][:, c0] * (1 - fc) + img[r0][:, c1] * fc
    bottom = img[r1][:, c0] * (1 - fc) + img[r1][:, c1] * fc
    return top * (1 - fr)[:, None] + bottom * fr[:, None]


def resize_binary(mask: np.ndarray, size: int) -> BinaryImage:
    """Resample a {0,1} mask to ``size x size`` and re-threshold at 0.5."""
    resampled = resample_bilinear(mask, size, size)
    return BinaryImage((resampled >= 0.5).astype(np.uint8))


def normalize_segment(comp: Component,
                      target: int = DEFAULT_SEGMENT_SIZE) -> Segment:
    """Scale a component mask to a ``target x target`` binary segment.

    Aspect ratio is not preserved.
    """
    if target < 2:
        raise ValueError("target size must be at least 2")
    return Segment(image=resize_binary(comp.mask.pixels, target),
                   source_bbox=comp.bbox)


def flatten(seg: Segment) -> SignalVector:
    px = seg.image.pixels
    return SignalVector(px.astype(float).ravel(), dims=px.shape)


def unflatten(signal: SignalVector) -> BinaryImage:
    return BinaryImage((signal.as_image() >= 0.5).astype(np.uint8))


def segment_image(img: GrayImage, *, window: int = DEFAULT_WINDOW,
                  offset: float = DEFAULT_OFFSET,
                  polarity: str = DARK_ON_LIGHT,
                  connectivity: int = 8,
                  min_pixels: int = DEFAULT_MIN_PIXELS,
                  size: int = DEFAULT_SEGMENT_SIZE) -> List[Segment]:
    """Run the full threshold / label / filter / rescale chain."""
    binary = binarize_adaptive(img, window=window, offset=offset,
                               polarity=polarity)
    comps = filter_small(connected_components(binary, connectivity),
                         min_pixels)
    return [normalize_segment(c, size) for c in comps]
