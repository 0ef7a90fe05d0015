"""Segmentation metrics: plain IoU and the weighted F-measure.

IoU counts pixels; the weighted F-measure also cares about *where* the
errors sit.  Misses deep inside the region (far from correctly labelled
pixels) and false alarms far from the region cost more than mistakes
hugging the boundary.
"""

import numpy as np

from partcorr import BinaryMask, MetricReport, aggregate, iou, iou_histogram, weighted_fbeta


def mask(bits):
    return BinaryMask(bits=np.asarray(bits, dtype=bool), resolution_tag="image")


gt = np.zeros((20, 20), dtype=bool)
gt[5:13, 5:13] = True  # 8x8 part

# Two predictions with the SAME pixel counts: one misses a boundary
# strip, the other misses an interior hole.
boundary_miss = gt.copy()
boundary_miss[5, 5:13] = False     # top row of the part
interior_miss = gt.copy()
interior_miss[8:10, 8:12] = False  # same area, middle of the part

print("ground truth pixels:", gt.sum())
print(f"{'prediction':16s} {'IoU':>8s} {'weighted F':>12s}")
for name, pred in (("boundary miss", boundary_miss), ("interior miss", interior_miss)):
    i = iou(mask(pred), mask(gt))
    f = weighted_fbeta(pred.astype(np.float64), mask(gt))
    print(f"{name:16s} {i:8.4f} {f:12.4f}")
print("same IoU, but the interior hole costs more under the weighted measure")

# False alarms: equally sized, near vs far from the part.
near = gt.copy()
near[13:15, 5:9] = True   # touching the part
far = gt.copy()
far[0:2, 16:20] = True    # opposite corner
print(f"\n{'prediction':16s} {'IoU':>8s} {'weighted F':>12s}")
for name, pred in (("near false pos", near), ("far false pos", far)):
    i = iou(mask(pred), mask(gt))
    f = weighted_fbeta(pred.astype(np.float64), mask(gt))
    print(f"{name:16s} {i:8.4f} {f:12.4f}")
print("distant false positives weigh (up to) twice as much")

# Aggregation groups per-pair reports by affordance label.
reports = [
    MetricReport("p0", "a", "b", "grasp", 0.72, 0.80),
    MetricReport("p1", "b", "a", "grasp", 0.64, 0.71),
    MetricReport("p2", "a", "c", "contain", 0.91, 0.91),
]
print("\nper-affordance means:")
for affordance, row in aggregate(reports).items():
    print(f"  {affordance:8s} iou={row['iou']:.3f} fwb={row['fwb']:.3f} pairs={row['pairs']}")

counts = iou_histogram(reports, "grasp", bins=10)
print("grasp IoU histogram (10 bins):", counts.tolist())
