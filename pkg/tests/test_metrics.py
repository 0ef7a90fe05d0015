"""IoU, weighted F-measure (vs. direct-translation oracle), aggregation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partcorr import (
    DimensionError,
    MetricReport,
    UndefinedMetricError,
    aggregate,
    iou,
    iou_histogram,
    nearest_foreground,
    weighted_fbeta,
)

from conftest import image_mask
from oracles import nearest_foreground_bruteforce, weighted_fbeta_reference


def random_gt(rng, shape=(10, 10), p=0.3):
    while True:
        gt = rng.uniform(size=shape) < p
        if gt.any():
            return gt


# ---------------------------------------------------------------------------
# IoU
# ---------------------------------------------------------------------------

def test_iou_identical_masks():
    bits = np.zeros((6, 6), dtype=bool)
    bits[2:4, 2:4] = True
    assert iou(image_mask(bits), image_mask(bits)) == 1.0


def test_iou_disjoint_masks():
    a = np.zeros((4, 4), dtype=bool)
    b = np.zeros((4, 4), dtype=bool)
    a[0, 0] = True
    b[3, 3] = True
    assert iou(image_mask(a), image_mask(b)) == 0.0


def test_iou_hand_counted():
    a = np.zeros((4, 4), dtype=bool)
    b = np.zeros((4, 4), dtype=bool)
    a[0, :] = True
    a[1, :] = True  # 8 pixels
    b[1, :] = True
    b[2, :] = True  # 8 pixels, overlap 4
    assert iou(image_mask(a), image_mask(b)) == pytest.approx(4.0 / 12.0)


def test_iou_empty_vs_empty_is_one():
    empty = image_mask(np.zeros((3, 3), dtype=bool))
    assert iou(empty, empty) == 1.0


def test_iou_dimension_mismatch():
    with pytest.raises(DimensionError):
        iou(image_mask(np.zeros((3, 3), dtype=bool)), image_mask(np.zeros((4, 4), dtype=bool)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**16), dy=st.integers(0, 3), dx=st.integers(0, 3))
def test_iou_symmetric_and_translation_invariant(seed, dy, dx):
    rng = np.random.default_rng(seed)
    a = rng.uniform(size=(6, 6)) < 0.4
    b = rng.uniform(size=(6, 6)) < 0.4
    m_a, m_b = image_mask(a), image_mask(b)
    assert iou(m_a, m_b) == iou(m_b, m_a)
    pad_a = np.zeros((10, 10), dtype=bool)
    pad_b = np.zeros((10, 10), dtype=bool)
    pad_a[dy : dy + 6, dx : dx + 6] = a
    pad_b[dy : dy + 6, dx : dx + 6] = b
    assert iou(image_mask(pad_a), image_mask(pad_b)) == pytest.approx(iou(m_a, m_b))


# ---------------------------------------------------------------------------
# nearest-foreground transform
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(10))
def test_nearest_foreground_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    gt = random_gt(rng, shape=(int(rng.integers(3, 14)), int(rng.integers(3, 14))))
    dist, rows, cols = nearest_foreground(gt)
    ref_dist, ref_rows, ref_cols = nearest_foreground_bruteforce(gt)
    np.testing.assert_allclose(dist, ref_dist, atol=1e-9)
    assert np.array_equal(rows, ref_rows)
    assert np.array_equal(cols, ref_cols)


def test_nearest_foreground_tie_breaks_to_smallest_index():
    gt = np.zeros((1, 3), dtype=bool)
    gt[0, 0] = gt[0, 2] = True  # centre pixel is equidistant
    _, rows, cols = nearest_foreground(gt)
    assert rows[0, 1] == 0 and cols[0, 1] == 0


def test_nearest_foreground_empty_rejected():
    with pytest.raises(UndefinedMetricError):
        nearest_foreground(np.zeros((3, 3), dtype=bool))


# ---------------------------------------------------------------------------
# weighted F-measure
# ---------------------------------------------------------------------------

def test_fwb_perfect_prediction_is_exactly_one():
    gt = np.zeros((10, 10), dtype=bool)
    gt[2:6, 3:8] = True
    assert weighted_fbeta(gt.astype(np.float64), image_mask(gt)) == 1.0


def test_fwb_single_pixel_gt_perfect_is_exactly_one():
    gt = np.zeros((5, 5), dtype=bool)
    gt[2, 2] = True
    assert weighted_fbeta(gt.astype(np.float64), image_mask(gt)) == 1.0


def test_fwb_all_zero_prediction_scores_zero():
    gt = np.zeros((12, 12), dtype=bool)
    gt[4:8, 4:8] = True  # interior region, clear of the border
    value = weighted_fbeta(np.zeros((12, 12)), image_mask(gt))
    assert value == pytest.approx(0.0, abs=1e-9)


def test_fwb_empty_gt_rejected():
    with pytest.raises(UndefinedMetricError):
        weighted_fbeta(np.zeros((4, 4)), image_mask(np.zeros((4, 4), dtype=bool)))


def test_fwb_strictly_decreases_when_interior_pixel_flips():
    gt = np.zeros((10, 10), dtype=bool)
    gt[3:7, 3:7] = True
    pred = gt.astype(np.float64)
    pred[4, 4] = 0.0
    assert weighted_fbeta(pred, image_mask(gt)) < 1.0


@pytest.mark.parametrize("seed", range(20))
def test_fwb_matches_direct_translation_reference(seed):
    rng = np.random.default_rng(seed)
    gt = random_gt(rng)
    pred = rng.uniform(size=(10, 10))
    got = weighted_fbeta(pred, image_mask(gt))
    want = weighted_fbeta_reference(pred, gt)
    assert got == pytest.approx(want, abs=1e-9)


def test_fwb_binary_predictions_match_reference_too():
    rng = np.random.default_rng(77)
    for _ in range(10):
        gt = random_gt(rng)
        pred = (rng.uniform(size=(10, 10)) < 0.4).astype(np.float64)
        assert weighted_fbeta(pred, image_mask(gt)) == pytest.approx(
            weighted_fbeta_reference(pred, gt), abs=1e-9
        )


def test_fwb_input_validation():
    gt = np.ones((4, 4), dtype=bool)
    with pytest.raises(DimensionError):
        weighted_fbeta(np.zeros((3, 3)), image_mask(gt))


# ---------------------------------------------------------------------------
# aggregation and histograms
# ---------------------------------------------------------------------------

def rep(pair, affordance, iou_val, fwb_val=0.5):
    return MetricReport(
        pair_id=pair, support_id="s", target_id="t",
        affordance=affordance, iou=iou_val, fwb=fwb_val,
    )


def test_aggregate_single_report():
    table = aggregate([rep("a", "grasp", 0.7, 0.8)])
    assert table["grasp"]["iou"] == pytest.approx(0.7)
    assert table["grasp"]["fwb"] == pytest.approx(0.8)
    assert table["grasp"]["pairs"] == 1


def test_aggregate_two_reports_same_affordance():
    table = aggregate([rep("a", "cut", 0.4), rep("b", "cut", 0.6)])
    assert table["cut"]["iou"] == pytest.approx(0.5)


def test_aggregate_mixed_affordances():
    reports = [
        rep("a", "grasp", 0.2, 0.1),
        rep("b", "grasp", 0.4, 0.3),
        rep("c", "contain", 1.0, 0.9),
    ]
    table = aggregate(reports)
    assert table["grasp"]["iou"] == pytest.approx(0.3)
    assert table["grasp"]["fwb"] == pytest.approx(0.2)
    assert table["contain"]["iou"] == pytest.approx(1.0)
    assert table["contain"]["pairs"] == 1


def test_histogram_all_perfect_in_last_bin():
    reports = [rep(str(i), "grasp", 1.0) for i in range(5)]
    counts = iou_histogram(reports, "grasp")
    assert counts[-1] == 5 and counts.sum() == 5


def test_histogram_empty_selection():
    counts = iou_histogram([rep("a", "grasp", 0.5)], "cut")
    assert counts.sum() == 0


def test_histogram_hand_binned():
    # bins of width 0.05: 0.04 and 0.02 land in bin 0, 0.12 in bin 2,
    # 0.51 in bin 10, 1.0 in the closed last bin.
    values = [0.04, 0.02, 0.12, 0.51, 1.0]
    reports = [rep(str(i), "pound", v) for i, v in enumerate(values)]
    counts = iou_histogram(reports, "pound", bins=20)
    assert counts[0] == 2
    assert counts[2] == 1
    assert counts[10] == 1
    assert counts[19] == 1
    assert counts.sum() == 5


def test_histogram_mass_conservation():
    rng = np.random.default_rng(9)
    reports = [rep(str(i), "cut", float(v)) for i, v in enumerate(rng.uniform(size=37))]
    assert iou_histogram(reports, "cut", bins=13).sum() == 37
