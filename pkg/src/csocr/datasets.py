"""Labelled character datasets: a seeded synthetic digit generator and a
loader for ``root/<label>/*.pgm|png`` image trees."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .imaging import BinaryImage, Segment, resize_binary
from .pnm import read_gray, write_binary

# Full-frame 16 x 16 glyphs: characters fill the frame the way
# size-normalised segments do.  Strokes are 3-4 px, which keeps ink
# below half of every canvas like real printed characters.
_GLYPHS = {
    0: """
        ....########....
        ..############..
        .###........###.
        ###..........###
        ###..........###
        ###..........###
        ###..........###
        ###..........###
        ###..........###
        ###..........###
        ###..........###
        ###..........###
        ###..........###
        .###........###.
        ..############..
        ....########....
    """,
    1: """
        ......#####.....
        ....#######.....
        ..#########.....
        .##########.....
        ......#####.....
        ......#####.....
        ......#####.....
        ......#####.....
        ......#####.....
        ......#####.....
        ......#####.....
        ......#####.....
        ......#####.....
        ......#####.....
        ..#############.
        ..#############.
    """,
    2: """
        ..##########....
        ##############..
        ###........####.
        ...........####.
        ...........####.
        ..........####..
        ........#####...
        ......#####.....
        ....#####.......
        ..#####.........
        .####...........
        ####............
        ###.............
        ###.............
        ################
        ################
    """,
    3: """
        ..##########....
        ##############..
        ###........####.
        ...........####.
        ...........####.
        ..........####..
        ....########....
        ....#########...
        ..........#####.
        ............####
        ............####
        ............####
        ###........####.
        ####......#####.
        #############...
        ..##########....
    """,
    4: """
        ..........####..
        .........#####..
        ........######..
        .......###.###..
        ......###..###..
        .....###...###..
        ....###....###..
        ...###.....###..
        ..###......###..
        .###.......###..
        ################
        ################
        ...........###..
        ...........###..
        ...........###..
        ...........###..
    """,
    5: """
        ###############.
        ###############.
        ###.............
        ###.............
        ###.............
        ###.#######.....
        ##############..
        ####.......####.
        ............###.
        .............###
        .............###
        .............###
        ###.........###.
        ####.......####.
        .############...
        ...#########....
    """,
    6: """
        .........#####..
        .......#####....
        ......####......
        ....#####.......
        ...####.........
        ..####..........
        .####...........
        ############....
        ##############..
        ####.......####.
        ###.........####
        ###.........####
        ###.........####
        ####.......####.
        .#############..
        ...#########....
    """,
    7: """
        ################
        ################
        ...........#####
        ..........#####.
        .........#####..
        ........#####...
        .......#####....
        ......#####.....
        .....#####......
        .....####.......
        ....#####.......
        ....####........
        ....####........
        ....####........
        ....####........
        ....####........
    """,
    8: """
        ....########....
        ..############..
        .###........###.
        .###........###.
        ..###......###..
        ...###....###...
        .....######.....
        .....######.....
        ...###....###...
        ..###......###..
        .###........###.
        ###..........###
        ###..........###
        .###........###.
        ..############..
        ....########....
    """,
    9: """
        ....########....
        ..############..
        .###........###.
        ###..........###
        ###..........###
        ###..........###
        .###........####
        ..##############
        ....#######.###.
        ...........###..
        ..........###...
        .........###....
        .......####.....
        ......###.......
        ....####........
        ..####..........
    """,
}

CANVAS = 16


def glyph_bitmap(digit: int, size: int = CANVAS) -> np.ndarray:
    """Return the ``size x size`` {0,1} bitmap of a digit."""
    rows = [r.strip() for r in _GLYPHS[digit].strip().splitlines()]
    bmp = np.array([[ch == "#" for ch in r] for r in rows], dtype=np.uint8)
    if bmp.shape == (size, size):
        return bmp
    return resize_binary(bmp, size).pixels.copy()


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    items: Tuple[Tuple[Segment, int], ...]
    classes: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "classes", tuple(self.classes))
        unknown = {lab for _, lab in self.items} - set(self.classes)
        if unknown:
            raise ValueError(f"labels {sorted(unknown)} missing from classes")

    def __len__(self):
        return len(self.items)

    @property
    def labels(self) -> np.ndarray:
        return np.array([lab for _, lab in self.items])

    def signals(self) -> np.ndarray:
        """All segments flattened row-major, one per row."""
        return np.array([seg.image.pixels.ravel() for seg, _ in self.items],
                        dtype=float)

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        return LabeledDataset(tuple(self.items[i] for i in indices),
                              self.classes)


def synth_digits(per_class: int, seed: int, shift_max: int = 2,
                 noise_rate: float = 0.02) -> LabeledDataset:
    """Render jittered, noisy copies of the digit glyphs 0-9.

    Each sample is shifted by a uniform integer offset in
    ``[-shift_max, shift_max]`` on both axes (content pushed off the canvas
    is lost) and every pixel is flipped with probability ``noise_rate``.
    """
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if not 0.0 <= noise_rate <= 1.0:
        raise ValueError("noise_rate must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    items = []
    for digit in range(10):
        base = glyph_bitmap(digit)
        for _ in range(per_class):
            dy, dx = rng.integers(-shift_max, shift_max + 1, size=2)
            img = _shift(base, int(dy), int(dx))
            flips = rng.random(img.shape) < noise_rate
            img = np.where(flips, 1 - img, img).astype(np.uint8)
            items.append((Segment(BinaryImage(img)), digit))
    return LabeledDataset(tuple(items), tuple(range(10)))


def _shift(img: np.ndarray, dy: int, dx: int) -> np.ndarray:
    out = np.zeros_like(img)
    h, w = img.shape
    src_r = slice(max(0, -dy), min(h, h - dy))
    dst_r = slice(max(0, dy), min(h, h + dy))
    src_c = slice(max(0, -dx), min(w, w - dx))
    dst_c = slice(max(0, dx), min(w, w + dx))
    out[dst_r, dst_c] = img[src_r, src_c]
    return out


_IMAGE_EXT = (".pgm", ".png")


def binarize_majority(pixels: np.ndarray) -> np.ndarray:
    """Threshold at 0.5 and call the minority side foreground.

    For the usual dark ink on light paper that is the dark side; a tie
    also goes to dark.
    """
    dark = pixels < 0.5
    if dark.sum() > dark.size / 2:
        return (~dark).astype(np.uint8)
    return dark.astype(np.uint8)


def load_dataset(root, size: int = CANVAS) -> LabeledDataset:
    """Read ``root/<integer label>/<image>`` into a dataset.

    Images are binarised with :func:`binarize_majority` and resampled to
    ``size x size`` when they are not already that size.  Items are
    sorted by (label, filename).
    """
    root = os.fspath(root)
    if not os.path.isdir(root):
        raise OSError(f"dataset directory {root} does not exist")
    class_dirs = []
    for name in os.listdir(root):
        path = os.path.join(root, name)
        if os.path.isdir(path):
            try:
                class_dirs.append((int(name), path))
            except ValueError:
                continue
    if not class_dirs:
        raise OSError(f"dataset directory {root} contains no class folders")
    items: List[Tuple[Segment, int]] = []
    for label, path in sorted(class_dirs):
        for fname in sorted(os.listdir(path)):
            if not fname.lower().endswith(_IMAGE_EXT):
                continue
            gray = read_gray(os.path.join(path, fname))
            mask = binarize_majority(gray.pixels)
            if mask.shape == (size, size):
                img = BinaryImage(mask)
            else:
                img = resize_binary(mask, size)
            items.append((Segment(img), label))
    if not items:
        raise OSError(f"dataset directory {root} contains no images")
    classes = sorted({lab for _, lab in items})
    return LabeledDataset(tuple(items), tuple(classes))


def save_dataset(ds: LabeledDataset, root) -> List[str]:
    """Write a dataset as ``root/<label>/<label>_<index>.pgm``."""
    written = []
    counters = {}
    for seg, label in ds.items:
        idx = counters.get(label, 0)
        counters[label] = idx + 1
        folder = os.path.join(root, str(label))
        os.makedirs(folder, exist_ok=True)
        path = os.path.join(folder, f"{label}_{idx:04d}.pgm")
        write_binary(path, seg.image)
        written.append(path)
    return written
