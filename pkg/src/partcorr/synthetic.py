"""Synthetic planted-correspondence scenes for end-to-end validation.

Each scene plants a query part whose descriptors reappear verbatim in
one target region, surrounded by distractor patches whose descriptors
are orthogonal to the part's (cosine similarity 0, well under the 0.3
separation the suite guarantees).  A noise-free pipeline must recover
exactly the planted region; optional additive Gaussian noise makes the
recovery statistical rather than exact.

The same construction scales up to a small on-disk dataset (descriptor
files, images, ground-truth masks, and an index) so the benchmark and
CLI paths can run without any real data.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np
from PIL import Image

from .crf import CrfConfig, refine
from .io import (
    RESOLUTION_GRID,
    RESOLUTION_IMAGE,
    BinaryMask,
    DescriptorGrid,
    upsample_map,
    write_descriptor_file,
    write_mask_png,
)
from .matching import MatcherConfig, match_variant
from .metrics import iou

_COLOR_PART = (220, 40, 40)
_COLOR_DISTRACTOR = (40, 220, 40)
_COLOR_BACKGROUND = (40, 40, 220)


@dataclass(frozen=True)
class PlantedPair:
    """One synthetic support/target pair with known ground truth."""

    support: DescriptorGrid
    query_mask: BinaryMask
    target: DescriptorGrid
    target_mask: BinaryMask
    target_rgb: np.ndarray
    truth_mask: BinaryMask


def _orthonormal_vectors(rng: np.random.Generator, dim: int, n: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    return q[:, :n].T.copy()


def _tile_block(field: np.ndarray, block: tuple[int, int, int, int], vectors: np.ndarray):
    """Fill a block with the vector family, cycling so every member appears."""
    y0, x0, bh, bw = block
    k = vectors.shape[0]
    for i in range(bh):
        for j in range(bw):
            field[y0 + i, x0 + j] = vectors[(i * bw + j) % k]


def _block_mask(shape: tuple[int, int], block: tuple[int, int, int, int]) -> np.ndarray:
    out = np.zeros(shape, dtype=bool)
    y0, x0, bh, bw = block
    out[y0 : y0 + bh, x0 : x0 + bw] = True
    return out


def _place_blocks(
    rng: np.random.Generator, grid: int, sizes: list[tuple[int, int]]
) -> list[tuple[int, int, int, int]]:
    """Random non-overlapping block placements (deterministic per rng state)."""
    placed: list[tuple[int, int, int, int]] = []
    for bh, bw in sizes:
        for _ in range(200):
            y0 = int(rng.integers(0, grid - bh + 1))
            x0 = int(rng.integers(0, grid - bw + 1))
            cand = (y0, x0, bh, bw)
            overlap = any(
                y0 < py + ph and py < y0 + bh and x0 < px + pw and px < x0 + bw
                for py, px, ph, pw in placed
            )
            if not overlap:
                placed.append(cand)
                break
        else:
            raise RuntimeError("could not place non-overlapping blocks")
    return placed


def _grid_from_field(field: np.ndarray, saliency: np.ndarray | None = None) -> DescriptorGrid:
    h, w, d = field.shape
    return DescriptorGrid(
        height_patches=h,
        width_patches=w,
        dim=d,
        data=field.astype(np.float32),
        patch_size=1,
        stride=1,
        source_image_size=(h, w),
        saliency=saliency,
    )


def _rgb_from_masks(shape, part: np.ndarray, distractor: np.ndarray) -> np.ndarray:
    rgb = np.empty(shape + (3,), dtype=np.uint8)
    rgb[:] = _COLOR_BACKGROUND
    rgb[distractor] = _COLOR_DISTRACTOR
    rgb[part] = _COLOR_PART
    return rgb


def make_planted_pair(
    seed: int,
    grid: int = 32,
    dim: int = 16,
    part_vectors: int = 5,
    distractor_vectors: int = 5,
    noise: float = 0.0,
) -> PlantedPair:
    """Build one planted scene; ``noise`` adds N(0, noise) per component."""
    rng = np.random.default_rng(seed)
    basis = _orthonormal_vectors(rng, dim, part_vectors + distractor_vectors)
    part_family = basis[:part_vectors]
    clutter_family = basis[part_vectors:]

    def rand_size():
        return int(rng.integers(8, 13)), int(rng.integers(8, 13))

    support_field = np.empty((grid, grid, dim))
    _tile_block(support_field, (0, 0, grid, grid), clutter_family)
    (query_block,) = _place_blocks(rng, grid, [rand_size()])
    _tile_block(support_field, query_block, part_family)

    target_field = np.empty((grid, grid, dim))
    _tile_block(target_field, (0, 0, grid, grid), clutter_family)
    planted_block, distractor_block = _place_blocks(rng, grid, [rand_size(), rand_size()])
    _tile_block(target_field, planted_block, part_family)
    _tile_block(target_field, distractor_block, clutter_family)

    if noise > 0.0:
        support_field = support_field + rng.normal(0.0, noise, support_field.shape)
        target_field = target_field + rng.normal(0.0, noise, target_field.shape)

    planted = _block_mask((grid, grid), planted_block)
    distractor = _block_mask((grid, grid), distractor_block)
    target_mask_bits = planted | distractor
    return PlantedPair(
        support=_grid_from_field(support_field),
        query_mask=BinaryMask(
            bits=_block_mask((grid, grid), query_block), resolution_tag=RESOLUTION_GRID
        ),
        target=_grid_from_field(
            target_field, saliency=target_mask_bits.astype(np.float32)
        ),
        target_mask=BinaryMask(bits=target_mask_bits, resolution_tag=RESOLUTION_GRID),
        target_rgb=_rgb_from_masks((grid, grid), planted, distractor),
        truth_mask=BinaryMask(bits=planted, resolution_tag=RESOLUTION_IMAGE),
    )


def run_planted_pair(
    pair: PlantedPair,
    matcher_config: MatcherConfig = MatcherConfig(),
    crf_config: CrfConfig = CrfConfig(),
    seed: int = 0,
) -> tuple[BinaryMask, float]:
    """Full pipeline on one planted pair; returns (mask, IoU vs truth)."""
    score_map, background_energy = match_variant(
        (pair.support, pair.query_mask),
        (pair.target, pair.target_mask),
        config=matcher_config,
        seed=seed,
    )
    h, w = pair.target.source_image_size
    score_img = upsample_map(score_map, (h, w), pair.target.stride)
    cfg = replace(crf_config, background_energy=background_energy)
    pred = refine(score_img, pair.target_rgb, cfg)
    return pred, iou(pred, pair.truth_mask)


# ---------------------------------------------------------------------------
# On-disk synthetic dataset
# ---------------------------------------------------------------------------

_AFFORDANCE_FAMILIES = ("handle", "blade")
_AFFORDANCE_COLORS = {"handle": (220, 40, 40), "blade": (220, 220, 40)}


def write_planted_dataset(
    root,
    n_objects: int = 4,
    seed: int = 0,
    grid: int = 32,
    dim: int = 16,
    noise: float = 0.0,
    classes: tuple[str, ...] = ("widget", "gadget"),
) -> str:
    """Write a benchmark-ready synthetic dataset; returns the index path.

    Every object of both classes carries part blocks drawn from shared
    per-affordance descriptor families, so any support part has an exact
    correspondence in every other object listing that affordance.
    """
    rng = np.random.default_rng(seed)
    n_fam = len(_AFFORDANCE_FAMILIES)
    basis = _orthonormal_vectors(rng, dim, 5 * (n_fam + 1))
    families = {
        name: basis[5 * i : 5 * (i + 1)] for i, name in enumerate(_AFFORDANCE_FAMILIES)
    }
    clutter_family = basis[5 * n_fam :]

    os.makedirs(root, exist_ok=True)
    index_lines = ["# object_id  class_name  directory  affordances"]
    for i in range(n_objects):
        object_id = f"obj_{i:03d}"
        class_name = classes[i % len(classes)]
        if i % 3 == 0:
            affordances = list(_AFFORDANCE_FAMILIES)
        else:
            affordances = [_AFFORDANCE_FAMILIES[i % n_fam]]

        field = np.empty((grid, grid, dim))
        _tile_block(field, (0, 0, grid, grid), clutter_family)
        sizes = [(8, 8)] * (len(affordances) + 1)
        blocks = _place_blocks(rng, grid, sizes)
        part_union = np.zeros((grid, grid), dtype=bool)
        gt_masks = {}
        # Distinct colour per part: the CRF's appearance kernel must not
        # couple unrelated parts of the same object.
        rgb = np.empty((grid, grid, 3), dtype=np.uint8)
        rgb[:] = _COLOR_BACKGROUND
        for affordance, block in zip(affordances, blocks):
            _tile_block(field, block, families[affordance])
            gt = _block_mask((grid, grid), block)
            gt_masks[affordance] = gt
            part_union |= gt
            rgb[gt] = _AFFORDANCE_COLORS[affordance]
        distractor = _block_mask((grid, grid), blocks[-1])
        rgb[distractor] = _COLOR_DISTRACTOR
        if noise > 0.0:
            field = field + rng.normal(0.0, noise, field.shape)

        saliency = (part_union | distractor).astype(np.float32)
        obj_dir = os.path.join(root, "objects", object_id)
        os.makedirs(os.path.join(obj_dir, "masks"), exist_ok=True)
        write_descriptor_file(
            os.path.join(obj_dir, "descriptors.afdg"),
            _grid_from_field(field, saliency=saliency),
        )
        Image.fromarray(rgb).save(os.path.join(obj_dir, "image.png"))
        for affordance, gt in gt_masks.items():
            write_mask_png(
                os.path.join(obj_dir, "masks", f"{affordance}.png"),
                BinaryMask(bits=gt, resolution_tag=RESOLUTION_IMAGE),
            )
        index_lines.append(
            f"{object_id}  {class_name}  objects/{object_id}  {','.join(affordances)}"
        )

    index_path = os.path.join(root, "index.txt")
    with open(index_path, "w") as f:
        f.write("\n".join(index_lines) + "\n")
    return index_path
