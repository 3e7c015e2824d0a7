import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from l0ne.imageio import (
    dataset_from_array,
    load_image,
    make_coord_grid,
    psnr,
    quantize_8bit,
    save_image,
)


def test_grid_single_row():
    np.testing.assert_array_equal(make_coord_grid(1, 3), [[-1, -1], [-1, 0], [-1, 1]])


def test_grid_single_column():
    np.testing.assert_array_equal(make_coord_grid(3, 1), [[-1, -1], [0, -1], [1, -1]])


def test_grid_corners_row_major():
    np.testing.assert_array_equal(make_coord_grid(2, 2), [[-1, -1], [-1, 1], [1, -1], [1, 1]])


@given(st.integers(2, 40), st.integers(2, 40))
def test_grid_endpoints_and_range(h, w):
    g = make_coord_grid(h, w)
    assert g.shape == (h * w, 2)
    assert g.min() == -1 and g.max() == 1
    assert g[0].tolist() == [-1, -1] and g[-1].tolist() == [1, 1]
    np.testing.assert_array_equal(g, make_coord_grid(h, w))


def test_grid_rejects_empty():
    with pytest.raises(ValueError):
        make_coord_grid(0, 3)


def test_load_white_pixel(tmp_path):
    p = tmp_path / "w.png"
    Image.fromarray(np.full((1, 1, 3), 255, np.uint8)).save(p)
    ds = load_image(p)
    assert ds.coords.tolist() == [[-1, -1]]
    assert ds.targets.tolist() == [[1, 1, 1]]


def test_load_2x2(tmp_path):
    p = tmp_path / "a.png"
    Image.fromarray(np.zeros((2, 2, 3), np.uint8)).save(p)
    ds = load_image(p)
    assert ds.coords.tolist() == [[-1, -1], [-1, 1], [1, -1], [1, 1]]


def test_kodak_sized_dataset():
    ds = dataset_from_array(np.zeros((512, 768, 3), np.uint8))
    assert ds.pixel_count == 393_216 == len(ds.coords) == len(ds.targets)


def test_load_ppm_and_rgba(tmp_path):
    rng = np.random.default_rng(0)
    px = rng.integers(0, 256, (5, 7, 3), dtype=np.uint8)
    Image.fromarray(px).save(tmp_path / "a.ppm")
    rgba = np.concatenate([px, np.full((5, 7, 1), 17, np.uint8)], axis=2)
    Image.fromarray(rgba).save(tmp_path / "a.png")
    for name in ("a.ppm", "a.png"):
        np.testing.assert_array_equal(load_image(tmp_path / name).image_bytes(), px)
    with open(tmp_path / "a.ppm", "rb") as fh:
        assert fh.read(2) == b"P6"


def test_load_rejects_bad_inputs(tmp_path):
    (tmp_path / "junk.png").write_bytes(b"not an image")
    with pytest.raises(ValueError):
        load_image(tmp_path / "junk.png")
    Image.fromarray(np.zeros((3, 3), np.uint8)).save(tmp_path / "gray.png")
    with pytest.raises(ValueError):
        load_image(tmp_path / "gray.png")
    Image.fromarray(np.zeros((3, 3, 3), np.uint8)).save(tmp_path / "a.bmp")
    with pytest.raises(ValueError):
        load_image(tmp_path / "a.bmp")
    with pytest.raises(OSError):
        load_image(tmp_path / "missing.png")


def test_quantization_rule():
    assert quantize_8bit(np.array([1.0, -0.2, 0.5, 1.7])).tolist() == [255, 0, 128, 255]


def test_save_load_roundtrip_bytes(tmp_path):
    rng = np.random.default_rng(1)
    px = rng.integers(0, 256, (6, 9, 3), dtype=np.uint8)
    save_image(px.reshape(-1, 3) / 255.0, 6, 9, tmp_path / "r.png")
    np.testing.assert_array_equal(load_image(tmp_path / "r.png").image_bytes(), px)


def test_save_rejects_wrong_length(tmp_path):
    with pytest.raises(ValueError):
        save_image(np.zeros((5, 3)), 2, 2, tmp_path / "x.png")


def test_psnr_values():
    a = np.zeros((10, 3))
    assert psnr(a, a) == math.inf
    assert psnr(a, np.ones((10, 3))) == 0.0
    assert psnr(a, np.full((10, 3), 0.1)) == pytest.approx(20.0)


def test_psnr_length_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((3, 3)), np.zeros((4, 3)))


unit = arrays(np.float64, (12, 3), elements=st.floats(-0.5, 1.5))


@given(unit, unit, st.randoms())
def test_psnr_symmetric_and_permutation_invariant(a, b, rnd):
    assert psnr(a, b) == psnr(b, a)
    perm = list(range(12))
    rnd.shuffle(perm)
    assert psnr(a[perm], b[perm]) == pytest.approx(psnr(a, b))
