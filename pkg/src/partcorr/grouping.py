"""Cluster masked patch descriptors into mean-descriptor groups.

The matcher works on a handful of mean descriptors per region rather than
raw patches, which suppresses descriptor noise.  Clustering is plain
Lloyd k-means with k-means++ seeding, accelerated with Hamerly's single
lower bound so that most points skip the full distance scan; the result
is identical to unaccelerated Lloyd started from the same seeds.

All distance and mean computations use one fixed expression so that runs
are reproducible bit-for-bit for a given seed.  Exact distance ties
between distinct centroids resolve to the lowest centroid index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EmptyRegionError
from .io import RESOLUTION_GRID, BinaryMask, DescriptorGrid

DEFAULT_K = 10
DEFAULT_MAX_ITERS = 300


@dataclass(frozen=True)
class CentroidSet:
    """K mean descriptors plus the patch -> centroid assignment map.

    ``assignment`` is at grid resolution; masked patches hold a centroid
    index in [0, k) and unmasked patches hold -1.
    """

    k: int
    centroids: np.ndarray
    assignment: np.ndarray
    member_counts: np.ndarray

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, one column per center."""
    out = np.empty((x.shape[0], centers.shape[0]))
    for j, c in enumerate(centers):
        out[:, j] = ((x - c) ** 2).sum(axis=1)
    return out


def _update_means(x: np.ndarray, assign: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Means of each cluster; clusters that lost all members keep their center."""
    new = centers.copy()
    for j in range(centers.shape[0]):
        members = x[assign == j]
        if members.shape[0]:
            new[j] = members.mean(axis=0)
    return new


def kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: iteratively sample points with squared-distance weight."""
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = int(np.argmax(d2))
        centers[i] = x[idx]
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return centers


def kmeans(
    x: np.ndarray,
    k: int,
    seed: int,
    max_iters: int = DEFAULT_MAX_ITERS,
    trace_inertia: list | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Hamerly-accelerated Lloyd k-means.

    Returns (assignment, centroids) after convergence (no assignment
    changed) or ``max_iters`` assignment passes.  Passing a list as
    ``trace_inertia`` appends the inertia observed after every
    assignment pass.
    """
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    centers = kmeans_pp_init(x, k, rng)

    d2 = _sq_dists(x, centers)
    assign = np.argmin(d2, axis=1)
    dists = np.sqrt(d2)
    n = np.arange(x.shape[0])
    upper = dists[n, assign]
    if k > 1:
        lower = np.partition(dists, 1, axis=1)[:, 1]
    else:
        lower = np.full(x.shape[0], np.inf)
    if trace_inertia is not None:
        trace_inertia.append(float((upper**2).sum()))

    for _ in range(max_iters - 1):
        new_centers = _update_means(x, assign, centers)
        delta = np.sqrt(((new_centers - centers) ** 2).sum(axis=1))
        centers = new_centers
        upper = upper + delta[assign]
        lower = lower - delta.max()

        if k > 1:
            cc = _sq_dists(centers, centers)
            np.fill_diagonal(cc, np.inf)
            half_gap = 0.5 * np.sqrt(cc.min(axis=1))
        else:
            half_gap = np.full(k, np.inf)

        bound = np.maximum(half_gap[assign], lower)
        cand = np.where(upper > bound)[0]
        changed = False
        if cand.size:
            # Tighten the upper bound before paying for a full scan.
            upper[cand] = np.sqrt(
                ((x[cand] - centers[assign[cand]]) ** 2).sum(axis=1)
            )
            cand = cand[upper[cand] > bound[cand]]
        if cand.size:
            dc = np.sqrt(_sq_dists(x[cand], centers))
            new_assign = np.argmin(dc, axis=1)
            changed = bool(np.any(new_assign != assign[cand]))
            assign[cand] = new_assign
            rows = np.arange(cand.size)
            upper[cand] = dc[rows, new_assign]
            dc[rows, new_assign] = np.inf
            lower[cand] = dc.min(axis=1)
        if trace_inertia is not None:
            exact = _sq_dists(x, centers)
            trace_inertia.append(float(exact[n, assign].sum()))
        if not changed:
            break
    return assign, centers


def cluster(
    grid: DescriptorGrid,
    mask: BinaryMask,
    k: int = DEFAULT_K,
    seed: int = 0,
    max_iters: int = DEFAULT_MAX_ITERS,
    normalize: bool = False,
) -> CentroidSet:
    """Cluster the masked patches of ``grid`` into at most ``k`` groups.

    The effective cluster count is ``min(k, number of distinct masked
    descriptors)``; duplicated descriptors cannot support more centroids
    than there are distinct values.  ``normalize`` optionally L2-normalizes
    descriptors before clustering (off by default).
    """
    if mask.resolution_tag != RESOLUTION_GRID:
        raise DimensionError("cluster expects a grid-resolution mask")
    if mask.bits.shape != (grid.height_patches, grid.width_patches):
        raise DimensionError(
            f"mask {mask.bits.shape} does not match grid "
            f"{(grid.height_patches, grid.width_patches)}"
        )
    if k < 1:
        raise DimensionError("k must be >= 1")
    flat_mask = mask.bits.ravel()
    if not flat_mask.any():
        raise EmptyRegionError("cannot cluster an empty mask")
    x = grid.flat()[flat_mask].astype(np.float64)
    if normalize:
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        x = x / norms
    n_distinct = np.unique(x, axis=0).shape[0]
    k_eff = min(k, n_distinct)

    assign_masked, centers = kmeans(x, k_eff, seed, max_iters)

    assignment = np.full(grid.n_patches, -1, dtype=np.int32)
    assignment[flat_mask] = assign_masked
    counts = np.bincount(assign_masked, minlength=k_eff).astype(np.int64)
    return CentroidSet(
        k=k_eff,
        centroids=centers,
        assignment=assignment.reshape(grid.height_patches, grid.width_patches),
        member_counts=counts,
    )


def cluster_inertia(cset: CentroidSet, grid: DescriptorGrid, mask: BinaryMask) -> float:
    """Sum of squared distances of each masked descriptor to its centroid."""
    flat_mask = mask.bits.ravel()
    assign = cset.assignment.ravel()[flat_mask]
    if assign.size and assign.min() < 0:
        raise DimensionError("assignment map is inconsistent with the mask")
    x = grid.flat()[flat_mask].astype(np.float64)
    diffs = x - cset.centroids[assign]
    return float((diffs**2).sum())
