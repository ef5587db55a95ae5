import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semnav.errors import (
    DimensionMismatchError,
    EmptyLabelsError,
    LabelDomainError,
    RasterFormatError,
)
from semnav.rasters import (
    UNLABELED,
    BinaryMask,
    ImageRaster,
    LabelPalette,
    PaletteClass,
    SemanticRaster,
    SparseLabelRaster,
    compute_metrics,
    load_image,
    load_mask,
    load_sparse_labels,
    save_image,
    save_mask,
    save_sparse_labels,
)


def make_palette(n=2):
    colors = [(128, 128, 128), (0, 0, 255), (0, 200, 0), (200, 0, 0), (255, 255, 0)]
    return LabelPalette(
        tuple(PaletteClass(i, f"class{i}", colors[i % len(colors)]) for i in range(n))
    )


# ---------------------------------------------------------------------------
# load_image
# ---------------------------------------------------------------------------


def test_plain_pgm_endpoints():
    raster = load_image(b"P2\n2 1\n255\n0 255\n")
    assert raster.width == 2 and raster.height == 1 and raster.channels == 1
    assert raster.data.ravel().tolist() == [0.0, 1.0]


def test_raw_pgm_roundtrip_values():
    payload = bytes([0, 64, 128, 255])
    raster = load_image(b"P5\n2 2\n255\n" + payload)
    assert np.allclose(raster.data.ravel(), np.array([0, 64, 128, 255]) / 255.0)


def test_ppm_channels():
    raster = load_image(b"P6\n1 1\n255\n" + bytes([10, 20, 30]))
    assert raster.channels == 3
    assert np.allclose(raster.data[0, 0], np.array([10, 20, 30]) / 255.0)


def test_comments_in_header():
    raster = load_image(b"P2 # comment\n# another\n1 1\n255\n7\n")
    assert raster.data[0, 0, 0] == pytest.approx(7 / 255.0)


def test_truncated_raw_payload_names_offset():
    data = b"P6\n2 1\n255\n" + bytes([1, 2, 3, 4, 5])  # one byte short
    with pytest.raises(RasterFormatError) as err:
        load_image(data)
    assert "truncated" in str(err.value)
    assert err.value.offset == len(data)


def test_bad_maxval_rejected():
    with pytest.raises(RasterFormatError) as err:
        load_image(b"P5\n1 1\n65535\n\x00\x00")
    assert "maxval" in str(err.value)


def test_bad_magic_rejected():
    with pytest.raises(RasterFormatError):
        load_image(b"P7\n1 1\n255\n\x00")


def test_plain_sample_out_of_range():
    with pytest.raises(RasterFormatError):
        load_image(b"P2\n1 1\n255\n900\n")


# ---------------------------------------------------------------------------
# save_image
# ---------------------------------------------------------------------------


def test_save_zero_raster():
    raster = ImageRaster(2, 2, 1, np.zeros((2, 2, 1)))
    assert save_image(raster) == b"P5\n2 2\n255\n" + bytes(4)


def test_rounding_half_up():
    # 0.5*255 = 127.5 rounds up to 128
    raster = ImageRaster(1, 1, 1, np.full((1, 1, 1), 0.5))
    assert save_image(raster)[-1] == 128


@settings(max_examples=60, deadline=None)
@given(
    width=st.integers(1, 9),
    height=st.integers(1, 9),
    channels=st.sampled_from([1, 3]),
    data=st.data(),
)
def test_roundtrip_identity(width, height, channels, data):
    values = data.draw(
        st.lists(
            st.integers(0, 255),
            min_size=width * height * channels,
            max_size=width * height * channels,
        )
    )
    grid = np.array(values, dtype=np.float64).reshape(height, width, channels) / 255.0
    raster = ImageRaster(width, height, channels, grid)
    again = load_image(save_image(raster))
    assert again.width == width and again.height == height and again.channels == channels
    assert np.array_equal(again.data, raster.data)


# ---------------------------------------------------------------------------
# sparse labels
# ---------------------------------------------------------------------------


def test_all_unlabeled():
    raster = load_sparse_labels(b"P5\n2 2\n255\n" + bytes([255] * 4), make_palette())
    assert raster.labeled_fraction == 0.0


def test_label_domain_error_reports_pixel():
    data = b"P5\n2 2\n255\n" + bytes([0, 1, 7, 255])
    with pytest.raises(LabelDomainError) as err:
        load_sparse_labels(data, make_palette())
    assert "7" in str(err.value) and "pixel 2" in str(err.value)


def test_half_labeled_fraction():
    data = b"P5\n2 2\n255\n" + bytes([0, 0, 255, 255])
    raster = load_sparse_labels(data, make_palette())
    assert raster.labeled_fraction == 0.5


def test_sparse_roundtrip():
    grid = np.array([[0, 255], [1, 0]], dtype=np.uint8)
    raster = SparseLabelRaster(2, 2, grid)
    again = load_sparse_labels(save_sparse_labels(raster), make_palette())
    assert np.array_equal(again.data, grid)


def test_mask_roundtrip():
    mask = BinaryMask(3, 2, np.array([[1, 0, 1], [0, 1, 0]], dtype=bool))
    assert np.array_equal(load_mask(save_mask(mask)).data, mask.data)


# ---------------------------------------------------------------------------
# palette
# ---------------------------------------------------------------------------


def test_palette_json_roundtrip():
    palette = make_palette(3)
    again = LabelPalette.from_json(palette.to_json())
    assert again == palette


def test_palette_rejects_gaps():
    with pytest.raises(ValueError):
        LabelPalette((PaletteClass(0, "a", (0, 0, 0)), PaletteClass(2, "b", (1, 1, 1))))


def test_palette_with_class_appends():
    palette = make_palette(2).with_class("flooded", (0, 0, 255))
    assert len(palette) == 3
    assert palette.name_of(2) == "flooded"


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def test_metrics_identity():
    truth = SparseLabelRaster(2, 2, np.array([[0, 1], [1, 0]], dtype=np.uint8))
    pred = SemanticRaster(2, 2, np.array([[0, 1], [1, 0]], dtype=np.uint8))
    metrics = compute_metrics(pred, truth)
    assert metrics.overall_accuracy == 1.0
    assert metrics.per_class_iou == {0: 1.0, 1: 1.0}
    assert metrics.mean_iou == 1.0


def test_metrics_disjoint():
    truth = SparseLabelRaster(2, 1, np.array([[0, 0]], dtype=np.uint8))
    pred = SemanticRaster(2, 1, np.array([[1, 1]], dtype=np.uint8))
    metrics = compute_metrics(pred, truth)
    assert metrics.overall_accuracy == 0.0
    assert metrics.per_class_iou[0] == 0.0


def test_metrics_hand_case():
    # truth [0,0,1,255], pred [0,1,1,1]: acc 2/3, IoU(0)=1/2, IoU(1)=1/2
    truth = SparseLabelRaster(2, 2, np.array([[0, 0], [1, UNLABELED]], dtype=np.uint8))
    pred = SemanticRaster(2, 2, np.array([[0, 1], [1, 1]], dtype=np.uint8))
    metrics = compute_metrics(pred, truth)
    assert metrics.overall_accuracy == pytest.approx(2 / 3)
    assert metrics.per_class_iou[0] == pytest.approx(0.5)
    assert metrics.per_class_iou[1] == pytest.approx(0.5)


def test_metrics_requires_labels():
    truth = SparseLabelRaster(1, 1, np.full((1, 1), UNLABELED, dtype=np.uint8))
    pred = SemanticRaster(1, 1, np.zeros((1, 1), dtype=np.uint8))
    with pytest.raises(EmptyLabelsError):
        compute_metrics(pred, truth)


def test_metrics_dimension_mismatch():
    truth = SparseLabelRaster(2, 1, np.zeros((1, 2), dtype=np.uint8))
    pred = SemanticRaster(1, 1, np.zeros((1, 1), dtype=np.uint8))
    with pytest.raises(DimensionMismatchError):
        compute_metrics(pred, truth)


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_metrics_permutation_invariant(data):
    n = data.draw(st.integers(2, 30))
    pred_vals = data.draw(st.lists(st.integers(0, 2), min_size=n, max_size=n))
    truth_vals = data.draw(
        st.lists(st.sampled_from([0, 1, 2, UNLABELED]), min_size=n, max_size=n)
    )
    if all(v == UNLABELED for v in truth_vals):
        truth_vals[0] = 0
    perm = data.draw(st.permutations(range(n)))

    def metrics_of(pv, tv):
        pred = SemanticRaster(n, 1, np.array([pv], dtype=np.uint8))
        truth = SparseLabelRaster(n, 1, np.array([tv], dtype=np.uint8))
        return compute_metrics(pred, truth)

    base = metrics_of(pred_vals, truth_vals)
    shuffled = metrics_of([pred_vals[i] for i in perm], [truth_vals[i] for i in perm])
    assert base == shuffled
