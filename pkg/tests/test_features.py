import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semnav.errors import EmptyMaskError
from semnav.features import extract_volume, feature_dim, global_pool
from semnav.rasters import BinaryMask, ImageRaster


def image_from(grid: np.ndarray) -> ImageRaster:
    if grid.ndim == 2:
        grid = grid[:, :, None]
    h, w, c = grid.shape
    return ImageRaster(w, h, c, grid.astype(np.float64))


def test_dimension_single_channel():
    volume = extract_volume(image_from(np.zeros((4, 4))))
    assert volume.dim == 9 == feature_dim(1)


def test_dimension_rgb():
    volume = extract_volume(image_from(np.zeros((4, 4, 3))))
    assert volume.dim == 23 == feature_dim(3)


def test_constant_image():
    volume = extract_volume(image_from(np.full((6, 5), 0.3)))
    raw = volume.data[:, :, 0]
    assert np.allclose(raw, 0.3)
    for col in (1, 3, 5):  # window means
        assert np.allclose(volume.data[:, :, col], 0.3)
    for col in (2, 4, 6):  # window stds
        assert np.allclose(volume.data[:, :, col], 0.0)
    for col in (7, 8):  # gradients
        assert np.allclose(volume.data[:, :, col], 0.0)


def test_center_pixel_window_mean():
    # Single bright center pixel in a 5x5: 3x3 mean at center is 1/9.
    grid = np.zeros((5, 5))
    grid[2, 2] = 1.0
    volume = extract_volume(image_from(grid))
    assert volume.data[2, 2, 1] == pytest.approx(1.0 / 9.0)
    # 7x7 window covers the whole bright pixel once, mirror-padded.
    assert volume.data[2, 2, 3] == pytest.approx(1.0 / 49.0)


def test_feature_ranges():
    rng = np.random.default_rng(0)
    volume = extract_volume(image_from(rng.random((12, 9, 3))))
    data = volume.data
    for c in range(3):
        base = 7 * c
        assert data[:, :, base].min() >= 0 and data[:, :, base].max() <= 1
        for k in (1, 3, 5):
            assert data[:, :, base + k].min() >= 0 and data[:, :, base + k].max() <= 1
        for k in (2, 4, 6):
            assert data[:, :, base + k].min() >= 0
            assert data[:, :, base + k].max() <= 0.5 + 1e-12
    assert data[:, :, 21].min() >= 0 and data[:, :, 21].max() <= 1
    assert data[:, :, 22].min() >= 0 and data[:, :, 22].max() <= 1


def test_translation_consistency():
    rng = np.random.default_rng(3)
    base = rng.random((40, 40))
    shifted = np.roll(base, shift=(2, 3), axis=(0, 1))
    va = extract_volume(image_from(base)).data
    vb = extract_volume(image_from(shifted)).data
    # Interior far from borders: features move with the image.
    assert np.allclose(va[10:20, 10:20], vb[12:22, 13:23])


def test_deterministic():
    rng = np.random.default_rng(5)
    img = image_from(rng.random((8, 8, 3)))
    a = extract_volume(img).data
    b = extract_volume(img).data
    assert np.array_equal(a, b)


def test_tiny_images_do_not_crash():
    for shape in ((1, 1), (2, 1), (1, 3), (2, 2)):
        volume = extract_volume(image_from(np.random.default_rng(1).random(shape)))
        assert np.isfinite(volume.data).all()


def test_global_pool_constant():
    volume = extract_volume(image_from(np.full((4, 4), 0.25)))
    mask = BinaryMask(4, 4, np.eye(4, dtype=bool))
    assert np.allclose(global_pool(volume), global_pool(volume, mask))


def test_global_pool_single_pixel():
    rng = np.random.default_rng(2)
    volume = extract_volume(image_from(rng.random((5, 5))))
    mask_data = np.zeros((5, 5), dtype=bool)
    mask_data[3, 1] = True
    pooled = global_pool(volume, BinaryMask(5, 5, mask_data))
    assert np.array_equal(pooled, volume.data[3, 1])


def test_global_pool_two_pixels():
    rng = np.random.default_rng(4)
    volume = extract_volume(image_from(rng.random((5, 5))))
    mask_data = np.zeros((5, 5), dtype=bool)
    mask_data[0, 0] = mask_data[4, 4] = True
    pooled = global_pool(volume, BinaryMask(5, 5, mask_data))
    assert np.allclose(pooled, (volume.data[0, 0] + volume.data[4, 4]) / 2)


def test_global_pool_empty_mask():
    volume = extract_volume(image_from(np.zeros((3, 3))))
    with pytest.raises(EmptyMaskError):
        global_pool(volume, BinaryMask(3, 3, np.zeros((3, 3), dtype=bool)))


@settings(max_examples=25, deadline=None)
@given(data=st.data())
def test_window_mean_matches_bruteforce(data):
    h = data.draw(st.integers(3, 10))
    w = data.draw(st.integers(3, 10))
    seed = data.draw(st.integers(0, 2**31))
    grid = np.random.default_rng(seed).random((h, w))
    volume = extract_volume(image_from(grid)).data

    def mirror(i, n):
        period = 2 * n
        j = i % period
        return j if j < n else period - 1 - j

    side = 3
    half = side // 2
    r = data.draw(st.integers(0, h - 1))
    c = data.draw(st.integers(0, w - 1))
    window = [
        grid[mirror(r + dr, h), mirror(c + dc, w)]
        for dr in range(-half, half + 1)
        for dc in range(-half, half + 1)
    ]
    assert volume[r, c, 1] == pytest.approx(np.mean(window))
    assert volume[r, c, 2] == pytest.approx(np.std(window))
