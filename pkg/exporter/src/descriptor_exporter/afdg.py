"""Writer for the engine's AFDG descriptor container.

Deliberately standalone: the exporter talks to the correspondence engine
only through this file format.

Layout (little-endian): magic "AFDG", u8 version=1, u8 flags
(bit0 = has saliency), u32 x7 (height_patches, width_patches, dim,
patch_size, stride, image_height, image_width), then f32 descriptors
row-major, then f32 saliency in [0, 1] when flagged.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"AFDG"
VERSION = 1
_HEADER = struct.Struct("<4sBB7I")


def write_afdg(
    path,
    descriptors: np.ndarray,
    patch_size: int,
    stride: int,
    image_size: tuple[int, int],
    saliency: np.ndarray | None = None,
) -> None:
    descriptors = np.ascontiguousarray(descriptors, dtype="<f4")
    if descriptors.ndim != 3:
        raise ValueError(f"descriptors must be (H', W', D), got {descriptors.shape}")
    if not np.isfinite(descriptors).all():
        raise ValueError("descriptors contain non-finite values")
    hp, wp, dim = descriptors.shape
    flags = 0
    if saliency is not None:
        saliency = np.ascontiguousarray(saliency, dtype="<f4")
        if saliency.shape != (hp, wp):
            raise ValueError(f"saliency {saliency.shape} does not match grid {(hp, wp)}")
        if saliency.min() < 0.0 or saliency.max() > 1.0:
            raise ValueError("saliency must lie in [0, 1]")
        flags |= 1
    header = _HEADER.pack(
        MAGIC, VERSION, flags, hp, wp, dim, patch_size, stride,
        image_size[0], image_size[1],
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(descriptors.tobytes())
        if saliency is not None:
            f.write(saliency.tobytes())
