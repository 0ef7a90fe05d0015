"""Segmentation quality metrics and their aggregation.

Two per-pair metrics: plain intersection-over-union of binary masks, and
the weighted F-measure for real-valued foreground maps.  The weighted
measure follows the published reference formulation of the
foreground-map evaluation metric: absolute errors are smoothed inside
the ground-truth region by a truncated Gaussian dependency kernel
(foreground pixels get the minimum of raw and smoothed error), while
background errors are weighted by 2 - exp(alpha * delta), with delta the
Euclidean distance to the nearest ground-truth pixel, then the weighted
errors feed standard precision/recall.

Background pixels inherit the error of their *nearest* foreground pixel
before smoothing.  Which pixel is nearest is ambiguous on an integer
grid, so ties are pinned: the candidate with the smallest row-major
index wins.  The transform below implements that rule exactly in linear
time by adding a sub-unit index offset to the squared distances before
taking lower envelopes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import log

import numpy as np
from scipy import ndimage

from .errors import DataError, DimensionError, UndefinedMetricError
from .io import BinaryMask

FWB_SIGMA = 5.0
FWB_KERNEL_SIZE = 7
FWB_ALPHA = log(0.5) / 5.0


@dataclass(frozen=True)
class MetricReport:
    """Evaluation scores for one support -> target transfer."""

    pair_id: str
    support_id: str
    target_id: str
    affordance: str
    iou: float
    fwb: float


def iou(pred: BinaryMask, gt: BinaryMask) -> float:
    """Intersection over union; two empty masks count as a perfect 1.0."""
    if pred.bits.shape != gt.bits.shape:
        raise DimensionError(
            f"mask shapes differ: {pred.bits.shape} vs {gt.bits.shape}"
        )
    union = np.logical_or(pred.bits, gt.bits).sum()
    if union == 0:
        return 1.0
    inter = np.logical_and(pred.bits, gt.bits).sum()
    return float(inter / union)


def _envelope_1d(cost: np.ndarray, out_d: np.ndarray, out_arg: np.ndarray) -> None:
    """1-D lower envelope of parabolas: out_d[p] = min_q (p-q)^2 + cost[q]."""
    n = cost.shape[0]
    finite = np.flatnonzero(np.isfinite(cost))
    if finite.size == 0:
        out_d[:] = np.inf
        out_arg[:] = -1
        return
    v = np.empty(finite.size, dtype=np.int64)
    z = np.empty(finite.size + 1)
    v[0] = finite[0]
    z[0] = -np.inf
    z[1] = np.inf
    k = 0
    for q in finite[1:]:
        fq = cost[q] + q * q
        while True:
            p = v[k]
            s = (fq - (cost[p] + p * p)) / (2.0 * (q - p))
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    pos = np.arange(n)
    seg = np.searchsorted(z[1 : k + 1], pos, side="left")
    src = v[seg]
    out_d[:] = (pos - src) ** 2 + cost[src]
    out_arg[:] = src


def nearest_foreground(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distance and coordinates of each pixel's nearest true pixel.

    Returns (distance, row, col) arrays; distance is Euclidean and exact,
    ties resolve to the smallest row-major index.  Raises on an all-false
    mask.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if not mask.any():
        raise UndefinedMetricError("mask has no foreground pixel")
    n = h * w
    # Sub-unit offsets separate equidistant candidates by row-major index.
    eps = 1.0 / (n + 1.0)
    idx = np.arange(n, dtype=np.float64).reshape(h, w)
    cost = np.where(mask, idx * eps, np.inf)

    col_d = np.empty((h, w))
    col_arg = np.empty((h, w), dtype=np.int64)
    for x in range(w):
        _envelope_1d(cost[:, x], col_d[:, x], col_arg[:, x])
    full_d = np.empty((h, w))
    row_arg = np.empty((h, w), dtype=np.int64)
    for y in range(h):
        _envelope_1d(col_d[y], full_d[y], row_arg[y])

    cols = row_arg
    rows = col_arg[np.arange(h)[:, None], cols]
    ys = np.arange(h)[:, None]
    xs = np.arange(w)[None, :]
    dist = np.sqrt((ys - rows) ** 2 + (xs - cols) ** 2).astype(np.float64)
    return dist, rows, cols


def weighted_fbeta(
    pred: np.ndarray,
    gt: BinaryMask,
    beta: float = 1.0,
    sigma: float = FWB_SIGMA,
    kernel_size: int = FWB_KERNEL_SIZE,
    alpha: float = FWB_ALPHA,
) -> float:
    """Weighted F-measure of a real-valued foreground map against a mask.

    ``pred`` must lie in [0, 1].  Returns exactly 1.0 for a perfect
    binary prediction; raises UndefinedMetricError when the ground truth
    is empty (its weights would be undefined).
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt_bits = gt.bits
    if pred.shape != gt_bits.shape:
        raise DimensionError(f"pred {pred.shape} does not match gt {gt_bits.shape}")
    if not gt_bits.any():
        raise UndefinedMetricError("weighted F-measure needs nonempty ground truth")
    if pred.min() < 0.0 or pred.max() > 1.0:
        raise DataError("pred values must lie in [0, 1]")

    err = np.abs(pred - gt_bits.astype(np.float64))
    dist, rows, cols = nearest_foreground(gt_bits)

    # Background errors take the value at their nearest foreground pixel
    # so smoothing behaves correctly at the region border.
    err_dep = err.copy()
    bg = ~gt_bits
    err_dep[bg] = err[rows[bg], cols[bg]]

    half = kernel_size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    k1 = np.exp(-(ax**2) / (2.0 * sigma**2))
    kern = np.outer(k1, k1)
    kern /= kern.sum()
    smoothed = ndimage.correlate(err_dep, kern, mode="constant", cval=0.0)

    min_err = err.copy()
    take = gt_bits & (smoothed < err)
    min_err[take] = smoothed[take]

    weight = np.ones_like(err)
    weight[bg] = 2.0 - np.exp(alpha * dist[bg])
    weighted_err = min_err * weight

    n_fg = float(gt_bits.sum())
    fn_w = float(weighted_err[gt_bits].sum())
    fp_w = float(weighted_err[bg].sum())
    tp_w = n_fg - fn_w

    recall = tp_w / n_fg
    denom_p = tp_w + fp_w
    precision = tp_w / denom_p if denom_p > 0.0 else 0.0
    denom_f = beta**2 * precision + recall
    if denom_f <= 0.0:
        return 0.0
    return float((1.0 + beta**2) * precision * recall / denom_f)


def aggregate(reports: list[MetricReport]) -> dict[str, dict[str, float]]:
    """Per-affordance arithmetic means of both metrics."""
    if not reports:
        raise UndefinedMetricError("cannot aggregate an empty report list")
    groups: dict[str, list[MetricReport]] = {}
    for rep in reports:
        groups.setdefault(rep.affordance, []).append(rep)
    out = {}
    for affordance in sorted(groups):
        members = groups[affordance]
        out[affordance] = {
            "iou": float(np.mean([r.iou for r in members])),
            "fwb": float(np.mean([r.fwb for r in members])),
            "pairs": len(members),
        }
    return out


def iou_histogram(
    reports: list[MetricReport], affordance: str, bins: int = 20
) -> np.ndarray:
    """Counts of per-pair IoU over equal-width bins spanning [0, 1]."""
    if bins < 1:
        raise DimensionError("bins must be >= 1")
    values = [r.iou for r in reports if r.affordance == affordance]
    counts, _ = np.histogram(values, bins=bins, range=(0.0, 1.0))
    return counts


# ---------------------------------------------------------------------------
# CSV outputs
# ---------------------------------------------------------------------------

def write_report_csv(path, reports: list[MetricReport]) -> None:
    rows = sorted(reports, key=lambda r: r.pair_id)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["pair_id", "support_id", "target_id", "affordance", "iou", "fwb"])
        for r in rows:
            writer.writerow(
                [r.pair_id, r.support_id, r.target_id, r.affordance,
                 f"{r.iou:.6f}", f"{r.fwb:.6f}"]
            )


def write_aggregate_csv(path, reports: list[MetricReport]) -> None:
    table = aggregate(reports)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["affordance", "iou", "fwb", "pairs"])
        for affordance, row in table.items():
            writer.writerow(
                [affordance, f"{row['iou']:.6f}", f"{row['fwb']:.6f}", row["pairs"]]
            )


def write_histogram_csv(path, reports: list[MetricReport], bins: int = 20) -> None:
    affordances = sorted({r.affordance for r in reports})
    edges = np.linspace(0.0, 1.0, bins + 1)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["affordance", "bin_lo", "bin_hi", "count"])
        for affordance in affordances:
            counts = iou_histogram(reports, affordance, bins=bins)
            for b in range(bins):
                writer.writerow(
                    [affordance, f"{edges[b]:.6f}", f"{edges[b + 1]:.6f}", int(counts[b])]
                )
