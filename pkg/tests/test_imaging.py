from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from csocr.imaging import (LIGHT_ON_DARK, BinaryImage, Component, GrayImage,
                           Segment, binarize_adaptive, connected_components,
                           filter_small, flatten, local_mean,
                           normalize_segment, unflatten)


def test_gray_image_rejects_out_of_range():
    with pytest.raises(ValueError):
        GrayImage(np.array([[0.5, 1.2]]))
    with pytest.raises(ValueError):
        BinaryImage(np.array([[0, 2]]))


# --- binarize_adaptive ----------------------------------------------------------

def test_uniform_image_is_all_background():
    img = GrayImage(np.full((9, 9), 0.5))
    for window in (3, 5, 9):
        assert binarize_adaptive(img, window, 0.05).pixels.sum() == 0


def test_two_tone_4x4_hand_evaluated():
    # Truncated 3x3 means per column (rows do not matter, columns are
    # constant): col0 -> (0+0)/2 = 0, col1 -> (0+0+1)/3, col2 -> (0+1+1)/3,
    # col3 -> (1+1)/2 = 1.  Foreground needs value < mean - 0.1:
    #   col0: 0 < -0.1 no;  col1: 0 < 0.2333 yes;
    #   col2: 1 < 0.5667 no; col3: 1 < 0.9 no.
    px = np.array([[0.0, 0.0, 1.0, 1.0]] * 4)
    out = binarize_adaptive(GrayImage(px), window=3, offset=0.1)
    expected = np.array([[0, 1, 0, 0]] * 4)
    np.testing.assert_array_equal(out.pixels, expected)


def test_local_mean_matches_brute_force():
    rng = np.random.default_rng(3)
    px = rng.random((7, 9))
    half = 2
    brute = np.empty_like(px)
    for r in range(7):
        for c in range(9):
            brute[r, c] = px[max(0, r - half):r + half + 1,
                             max(0, c - half):c + half + 1].mean()
    np.testing.assert_allclose(local_mean(px, 5), brute, atol=1e-12)


def test_light_on_dark_polarity():
    px = np.zeros((5, 5))
    px[2, 2] = 1.0
    out = binarize_adaptive(GrayImage(px), 3, 0.1, polarity=LIGHT_ON_DARK)
    assert out.pixels.sum() == 1 and out.pixels[2, 2] == 1


@pytest.mark.parametrize("window", [2, 4, 1, 11])
def test_bad_window_rejected(window):
    with pytest.raises(ValueError):
        binarize_adaptive(GrayImage(np.zeros((9, 9))), window, 0.05)


def test_window_larger_than_image_rejected():
    with pytest.raises(ValueError):
        binarize_adaptive(GrayImage(np.zeros((1, 1))), 3, 0.05)


@given(arrays(np.uint8, (6, 7), elements=st.integers(0, 1)))
def test_binary_input_stays_binary(bits):
    out = binarize_adaptive(GrayImage(bits.astype(float)), 3, 0.1)
    assert set(np.unique(out.pixels)) <= {0, 1}


# --- connected_components --------------------------------------------------------

def bfs_labels(px, connectivity):
    """Independent flood fill: list of pixel sets."""
    if connectivity == 4:
        steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        steps = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)
                 if (dr, dc) != (0, 0)]
    seen = np.zeros(px.shape, bool)
    regions = []
    for r0, c0 in zip(*np.nonzero(px)):
        if seen[r0, c0]:
            continue
        region = set()
        queue = deque([(r0, c0)])
        seen[r0, c0] = True
        while queue:
            r, c = queue.popleft()
            region.add((r, c))
            for dr, dc in steps:
                rr, cc = r + dr, c + dc
                if (0 <= rr < px.shape[0] and 0 <= cc < px.shape[1]
                        and px[rr, cc] and not seen[rr, cc]):
                    seen[rr, cc] = True
                    queue.append((rr, cc))
        regions.append(frozenset(region))
    return regions


def component_pixels(comp):
    x0, y0, _, _ = comp.bbox
    rs, cs = np.nonzero(comp.mask.pixels)
    return frozenset((int(r) + y0, int(c) + x0) for r, c in zip(rs, cs))


def test_empty_image_has_no_components():
    assert connected_components(BinaryImage(np.zeros((5, 5), int))) == []


def test_single_pixel_component():
    px = np.zeros((5, 6), int)
    px[2, 3] = 1
    (comp,) = connected_components(BinaryImage(px))
    assert comp.bbox == (3, 2, 1, 1)
    assert comp.pixel_count == 1


def test_diagonal_pair_depends_on_connectivity():
    px = np.zeros((3, 3), int)
    px[0, 0] = px[1, 1] = 1
    assert len(connected_components(BinaryImage(px), 8)) == 1
    assert len(connected_components(BinaryImage(px), 4)) == 2


def test_component_order_and_ties():
    px = np.zeros((8, 8), int)
    px[5, 0] = 1                 # lower, single pixel
    px[1, 4:7] = 1               # top row 1, x0 = 4
    px[1, 1] = 1                 # top row 1, x0 = 1, size 1
    comps = connected_components(BinaryImage(px), 4)
    assert [c.bbox[:2] for c in comps] == [(1, 1), (4, 1), (0, 5)]


@settings(max_examples=60, deadline=None)
@given(arrays(np.uint8, (9, 11), elements=st.integers(0, 1)),
       st.sampled_from([4, 8]))
def test_components_partition_foreground(bits, connectivity):
    comps = connected_components(BinaryImage(bits), connectivity)
    got = [component_pixels(c) for c in comps]
    assert sorted(map(sorted, got)) == sorted(map(sorted, bfs_labels(bits, connectivity)))
    union = set().union(*got) if got else set()
    assert union == {(int(r), int(c)) for r, c in zip(*np.nonzero(bits))}
    assert sum(len(g) for g in got) == len(union)
    for c in comps:
        x0, y0, w, h = c.bbox
        assert 0 <= x0 and x0 + w <= bits.shape[1]
        assert 0 <= y0 and y0 + h <= bits.shape[0]
        assert c.pixel_count == c.mask.pixels.sum() >= 1
    keys = [(c.bbox[1], c.bbox[0], -c.pixel_count) for c in comps]
    assert keys == sorted(keys)


# --- filter_small ---------------------------------------------------------------

def _comp(n):
    return Component(bbox=(0, 0, n, 1), mask=BinaryImage(np.ones((1, n), int)))


def test_filter_small():
    comps = [_comp(3), _comp(15), _comp(40)]
    assert filter_small([], 10) == []
    assert [c.pixel_count for c in filter_small(comps, 10)] == [15, 40]
    assert filter_small(comps, 0) == comps
    with pytest.raises(ValueError):
        filter_small(comps, -1)


# --- normalize_segment ------------------------------------------------------------

def oracle_bilinear_threshold(mask, size):
    """Pixel-by-pixel bilinear resample (pixel-centre alignment) + >= 0.5."""
    in_h, in_w = mask.shape
    out = np.zeros((size, size), int)
    for i in range(size):
        sy = min(max((i + 0.5) * in_h / size - 0.5, 0.0), in_h - 1)
        y0 = int(np.floor(sy))
        y1 = min(y0 + 1, in_h - 1)
        wy = sy - y0
        for j in range(size):
            sx = min(max((j + 0.5) * in_w / size - 0.5, 0.0), in_w - 1)
            x0 = int(np.floor(sx))
            x1 = min(x0 + 1, in_w - 1)
            wx = sx - x0
            v = ((1 - wy) * ((1 - wx) * mask[y0, x0] + wx * mask[y0, x1])
                 + wy * ((1 - wx) * mask[y1, x0] + wx * mask[y1, x1]))
            out[i, j] = 1 if v >= 0.5 else 0
    return out


T_GLYPH = np.array([
    [1, 1, 1, 1, 1, 1, 1, 1],
    [1, 1, 1, 1, 1, 1, 1, 1],
    [0, 0, 0, 1, 1, 0, 0, 0],
    [0, 0, 0, 1, 1, 0, 0, 0],
    [0, 0, 0, 1, 1, 0, 0, 0],
    [0, 0, 0, 1, 1, 0, 0, 0],
    [0, 0, 0, 1, 1, 0, 0, 0],
    [0, 0, 0, 1, 1, 0, 0, 0],
])


def test_identity_resample():
    rng = np.random.default_rng(0)
    mask = rng.integers(0, 2, (16, 16))
    seg = normalize_segment(Component((0, 0, 16, 16), BinaryImage(mask)), 16)
    np.testing.assert_array_equal(seg.image.pixels, mask)


def test_constant_mask_upscales_to_constant():
    seg = normalize_segment(Component((0, 0, 2, 2), BinaryImage(np.ones((2, 2), int))), 4)
    np.testing.assert_array_equal(seg.image.pixels, np.ones((4, 4)))


def test_t_glyph_matches_bilinear_oracle():
    seg = normalize_segment(Component((5, 7, 8, 8), BinaryImage(T_GLYPH)), 16)
    np.testing.assert_array_equal(seg.image.pixels,
                                  oracle_bilinear_threshold(T_GLYPH, 16))
    assert seg.source_bbox == (5, 7, 8, 8)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(2, 20), st.data())
def test_normalize_any_aspect_gives_square(h, w, size, data):
    mask = data.draw(arrays(np.uint8, (h, w), elements=st.integers(0, 1)))
    seg = normalize_segment(Component((0, 0, w, h), BinaryImage(mask)), size)
    assert seg.image.pixels.shape == (size, size)
    np.testing.assert_array_equal(seg.image.pixels,
                                  oracle_bilinear_threshold(mask, size))


def test_normalize_rejects_tiny_target():
    with pytest.raises(ValueError):
        normalize_segment(_comp(3), 1)


# --- flatten ---------------------------------------------------------------------

def test_flatten_background_is_zero():
    sig = flatten(Segment(BinaryImage(np.zeros((16, 16), int))))
    assert sig.values.shape == (256,) and not sig.values.any()
    assert sig.dims == (16, 16)


def test_flatten_row_major():
    px = np.zeros((16, 16), int)
    px[3, 11] = 1
    sig = flatten(Segment(BinaryImage(px)))
    assert np.flatnonzero(sig.values).tolist() == [3 * 16 + 11]
    assert sig.values[3 * 16 + 11] == 1.0


@given(arrays(np.uint8, (16, 16), elements=st.integers(0, 1)))
def test_flatten_roundtrip(bits):
    seg = Segment(BinaryImage(bits))
    assert unflatten(flatten(seg)) == seg.image
