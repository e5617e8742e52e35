import numpy as np
import pytest
from PIL import Image

from csocr.imaging import BinaryImage
from csocr.pnm import parse_pgm, read_gray, write_binary, write_gray


def test_p2_ascii_with_comment(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_text("P2\n# made by hand\n3 2\n255\n0 51 255\n255 102 0\n")
    img = read_gray(path)
    np.testing.assert_allclose(img.pixels, [[0, 0.2, 1], [1, 0.4, 0]])


def test_p5_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    px = rng.integers(0, 256, (5, 7)) / 255.0
    write_gray(tmp_path / "b.pgm", px)
    np.testing.assert_allclose(read_gray(tmp_path / "b.pgm").pixels, px)


def test_write_gray_clamps(tmp_path):
    write_gray(tmp_path / "c.pgm", np.array([[-0.5, 2.0]]))
    np.testing.assert_array_equal(read_gray(tmp_path / "c.pgm").pixels, [[0.0, 1.0]])


def test_binary_written_as_0_255(tmp_path):
    write_binary(tmp_path / "d.pgm", BinaryImage(np.array([[1, 0]])))
    data = (tmp_path / "d.pgm").read_bytes()
    assert data.startswith(b"P5\n2 1\n255\n")
    assert data[-2:] == bytes([0, 255])


def test_png_input(tmp_path):
    arr = np.array([[0, 128], [255, 64]], dtype=np.uint8)
    Image.fromarray(arr, mode="L").save(tmp_path / "e.png")
    np.testing.assert_allclose(read_gray(tmp_path / "e.png").pixels, arr / 255.0)


def test_garbage_is_an_io_error(tmp_path):
    (tmp_path / "f.pgm").write_bytes(b"P7 nonsense")
    with pytest.raises(OSError, match="f.pgm"):
        read_gray(tmp_path / "f.pgm")


def test_truncated_header():
    with pytest.raises(ValueError):
        parse_pgm(b"P5\n3")
