"""Descriptor file format, masks, depth maps, and resolution changes."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partcorr import (
    BinaryMask,
    DataError,
    DepthMap,
    DimensionError,
    FormatError,
    downsample_mask,
    read_depth_file,
    read_descriptor_file,
    read_mask_png,
    read_score_pfm,
    saliency_mask,
    upsample_mask,
    write_depth_file,
    write_descriptor_file,
    write_mask_png,
    write_score_pfm,
)

from conftest import grid_mask, image_mask, make_grid


def test_round_trip_preserves_values_bit_exactly(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.normal(size=(2, 2, 3)).astype(np.float32)
    grid = make_grid(data, patch_size=4, stride=4)
    path = tmp_path / "grid.afdg"
    write_descriptor_file(path, grid)
    loaded = read_descriptor_file(path)
    assert loaded.height_patches == 2 and loaded.width_patches == 2 and loaded.dim == 3
    assert np.array_equal(loaded.data.view(np.uint32), grid.data.view(np.uint32))
    assert loaded.patch_size == 4 and loaded.stride == 4
    assert loaded.source_image_size == (8, 8)


@settings(max_examples=25, deadline=None)
@given(
    h=st.integers(1, 5),
    w=st.integers(1, 5),
    d=st.integers(1, 8),
    with_saliency=st.booleans(),
    seed=st.integers(0, 2**16),
)
def test_round_trip_random_grids(tmp_path_factory, h, w, d, with_saliency, seed):
    rng = np.random.default_rng(seed)
    saliency = rng.uniform(size=(h, w)).astype(np.float32) if with_saliency else None
    grid = make_grid(rng.normal(size=(h, w, d)).astype(np.float32), saliency=saliency)
    path = tmp_path_factory.mktemp("rt") / "g.afdg"
    write_descriptor_file(path, grid)
    loaded = read_descriptor_file(path)
    assert np.array_equal(loaded.data, grid.data)
    if with_saliency:
        assert np.array_equal(loaded.saliency, grid.saliency)
    else:
        assert loaded.saliency is None


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.afdg"
    path.write_bytes(b"NOPE" + bytes(60))
    with pytest.raises(FormatError):
        read_descriptor_file(path)


def test_truncated_payload_rejected(tmp_path):
    grid = make_grid(np.ones((2, 2, 3), dtype=np.float32))
    path = tmp_path / "trunc.afdg"
    write_descriptor_file(path, grid)
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])  # drop one float: 11 values for a declared 12
    with pytest.raises(FormatError):
        read_descriptor_file(path)


def test_trailing_bytes_rejected(tmp_path):
    grid = make_grid(np.ones((2, 2, 3), dtype=np.float32))
    path = tmp_path / "extra.afdg"
    write_descriptor_file(path, grid)
    path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
    with pytest.raises(FormatError):
        read_descriptor_file(path)


def test_non_finite_payload_rejected(tmp_path):
    grid = make_grid(np.ones((1, 2, 2), dtype=np.float32))
    path = tmp_path / "nan.afdg"
    write_descriptor_file(path, grid)
    raw = bytearray(path.read_bytes())
    raw[-4:] = np.float32(np.nan).tobytes()
    path.write_bytes(bytes(raw))
    with pytest.raises(DataError):
        read_descriptor_file(path)


def test_saliency_out_of_range_rejected():
    with pytest.raises(DataError):
        make_grid(np.ones((2, 2, 2), dtype=np.float32), saliency=np.full((2, 2), 1.5))


def test_grid_invariants_enforced():
    with pytest.raises(DimensionError):
        make_grid(np.ones((0, 2, 2), dtype=np.float32))
    with pytest.raises(DataError):
        make_grid(np.full((1, 1, 1), np.inf, dtype=np.float32))


def test_saliency_mask_thresholds_strictly():
    grid = make_grid(
        np.ones((2, 2, 2), dtype=np.float32),
        saliency=np.array([[0.4, 0.5], [0.51, 1.0]], dtype=np.float32),
    )
    mask = saliency_mask(grid)
    assert mask.bits.tolist() == [[False, False], [True, True]]


# ---------------------------------------------------------------------------
# Mask resolution changes
# ---------------------------------------------------------------------------

def test_downsample_all_true_and_all_false():
    grid = make_grid(np.ones((2, 2, 3), dtype=np.float32), stride=8, patch_size=8)
    ones = image_mask(np.ones((16, 16), dtype=bool))
    zeros = image_mask(np.zeros((16, 16), dtype=bool))
    assert downsample_mask(ones, grid).bits.all()
    assert not downsample_mask(zeros, grid).bits.any()


def test_downsample_single_quadrant():
    # 16x16 image, stride 8: one 8x8 true quadrant covers exactly one of
    # the four stride cells (hand count: 64/64 vs 0/64 pixels).
    grid = make_grid(np.ones((2, 2, 3), dtype=np.float32), stride=8, patch_size=8)
    bits = np.zeros((16, 16), dtype=bool)
    bits[:8, :8] = True
    down = downsample_mask(image_mask(bits), grid)
    assert down.bits.tolist() == [[True, False], [False, False]]


def test_downsample_coverage_threshold():
    grid = make_grid(np.ones((1, 1, 2), dtype=np.float32), stride=4, patch_size=4)
    bits = np.zeros((4, 4), dtype=bool)
    bits[0, :2] = True  # 2/16 coverage
    assert not downsample_mask(image_mask(bits), grid).bits.any()
    assert downsample_mask(image_mask(bits), grid, coverage_threshold=0.125).bits.all()


def test_downsample_dimension_mismatch():
    grid = make_grid(np.ones((2, 2, 3), dtype=np.float32), stride=8)
    with pytest.raises(DimensionError):
        downsample_mask(image_mask(np.zeros((8, 8), dtype=bool)), grid)


def test_upsample_examples():
    ones = grid_mask(np.ones((2, 2), dtype=bool))
    up = upsample_mask(ones, (16, 16), stride=8)
    assert up.bits.all() and up.bits.shape == (16, 16)

    single = np.zeros((2, 2), dtype=bool)
    single[1, 0] = True
    up = upsample_mask(grid_mask(single), (16, 16), stride=8)
    expect = np.zeros((16, 16), dtype=bool)
    expect[8:16, 0:8] = True
    assert np.array_equal(up.bits, expect)


@settings(max_examples=40, deadline=None)
@given(
    hp=st.integers(1, 4),
    wp=st.integers(1, 4),
    stride=st.sampled_from([2, 4, 8]),
    seed=st.integers(0, 2**16),
    threshold=st.floats(0.05, 1.0),
)
def test_downsample_inverts_upsample_on_stride_aligned(hp, wp, stride, seed, threshold):
    rng = np.random.default_rng(seed)
    bits = rng.uniform(size=(hp, wp)) < 0.5
    grid = make_grid(
        rng.normal(size=(hp, wp, 2)).astype(np.float32), stride=stride, patch_size=stride
    )
    up = upsample_mask(grid_mask(bits), (hp * stride, wp * stride), stride)
    down = downsample_mask(up, grid, coverage_threshold=threshold)
    assert np.array_equal(down.bits, bits)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**16))
def test_downsample_monotone_in_added_pixels(seed):
    rng = np.random.default_rng(seed)
    grid = make_grid(rng.normal(size=(3, 3, 2)).astype(np.float32), stride=4, patch_size=4)
    base = rng.uniform(size=(12, 12)) < 0.3
    more = base | (rng.uniform(size=(12, 12)) < 0.3)
    down_base = downsample_mask(image_mask(base), grid)
    down_more = downsample_mask(image_mask(more), grid)
    assert not np.any(down_base.bits & ~down_more.bits)


# ---------------------------------------------------------------------------
# PNG masks, depth, PFM
# ---------------------------------------------------------------------------

def test_mask_png_round_trip(tmp_path):
    bits = np.zeros((5, 7), dtype=bool)
    bits[1:3, 2:6] = True
    path = tmp_path / "m.png"
    write_mask_png(path, image_mask(bits))
    loaded = read_mask_png(path)
    assert np.array_equal(loaded.bits, bits)


def test_depth_round_trip_and_validation(tmp_path):
    values = np.array([[0.5, np.nan], [2.0, 0.0]], dtype=np.float32)
    depth = DepthMap(values=values, fx=500.0, fy=500.0, cx=1.0, cy=1.0)
    path = tmp_path / "d.depth"
    write_depth_file(path, depth)
    loaded = read_depth_file(path)
    assert np.array_equal(np.isnan(loaded.values), np.isnan(values))
    assert np.allclose(loaded.values[np.isfinite(values)], values[np.isfinite(values)])
    assert loaded.fx == 500.0 and loaded.cy == 1.0

    with pytest.raises(DataError):
        DepthMap(values=np.array([[-1.0]]), fx=1, fy=1, cx=0, cy=0)
    path.write_bytes(path.read_bytes()[:-2])
    with pytest.raises(FormatError):
        read_depth_file(path)


def test_score_pfm_round_trip(tmp_path):
    values = np.arange(12, dtype=np.float32).reshape(3, 4) / 7.0
    path = tmp_path / "s.pfm"
    write_score_pfm(path, values)
    assert np.array_equal(read_score_pfm(path), values)


def test_mask_needs_true_bit_for_queries():
    mask = BinaryMask(bits=np.zeros((2, 2), dtype=bool))
    assert mask.is_empty()
