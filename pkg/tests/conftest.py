"""Shared fixtures: tiny descriptor grids and an on-disk synthetic dataset."""

import numpy as np
import pytest

from partcorr import (
    RESOLUTION_GRID,
    RESOLUTION_IMAGE,
    BinaryMask,
    DescriptorGrid,
    write_planted_dataset,
)


def make_grid(data, patch_size=1, stride=1, image_size=None, saliency=None):
    data = np.asarray(data, dtype=np.float32)
    h, w, d = data.shape
    if image_size is None:
        image_size = (h * stride, w * stride)
    return DescriptorGrid(
        height_patches=h,
        width_patches=w,
        dim=d,
        data=data,
        patch_size=patch_size,
        stride=stride,
        source_image_size=image_size,
        saliency=saliency,
    )


def grid_mask(bits):
    return BinaryMask(bits=np.asarray(bits, dtype=bool), resolution_tag=RESOLUTION_GRID)


def image_mask(bits):
    return BinaryMask(bits=np.asarray(bits, dtype=bool), resolution_tag=RESOLUTION_IMAGE)


@pytest.fixture(scope="session")
def synthetic_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("dataset")
    index = write_planted_dataset(root, n_objects=4, seed=7)
    return index
