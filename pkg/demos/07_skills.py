"""Skill geometry: from a transferred mask to actionable poses.

A predicted mask plus a registered depth map yields everything the two
first-order skills need: the grasp pose (3-D part centroid, gripper yaw
along the dominant planar axis) and the containment point (XY centroid).
With several corresponding parts in view, the highest one goes first.
"""

import numpy as np

from partcorr import (
    BinaryMask,
    DepthMap,
    connected_components,
    containment_point,
    grasp_pose,
    select_next,
    skill_records,
)

# A scene with two elongated parts on a table 0.8 m below the camera.
# The right part sits on a 5 cm block, so it is closer to the camera.
bits = np.zeros((24, 32), dtype=bool)
bits[10:14, 3:13] = True    # left part, horizontal
bits[6:16, 22:26] = True    # right part, vertical
depth = np.full((24, 32), 0.80, dtype=np.float32)
depth[6:16, 22:26] = 0.75
depth[0:2, :] = np.nan      # a band the sensor failed to measure

mask = BinaryMask(bits=bits, resolution_tag="image")
dmap = DepthMap(values=depth, fx=300.0, fy=300.0, cx=16.0, cy=12.0)

comps = connected_components(mask)
print(f"{len(comps)} components")
for comp in comps:
    pose = grasp_pose(comp, dmap)
    point = containment_point(comp, dmap)
    print(f"  component {comp.component_id}: {comp.size} px")
    print(f"    grasp position (m): {np.round(pose.position, 4).tolist()}")
    print(f"    grasp yaw (rad):    {pose.yaw:+.4f}"
          + ("  [degenerate axis]" if pose.axis_degenerate else ""))
    print(f"    containment XY (m): {np.round(point, 4).tolist()}")

chosen = select_next(comps, dmap)
print(f"\nnext object by highest point: component {chosen} (it sits on the block)")

print("\nJSON-lines records as emitted by the CLI `skill` subcommand:")
for rec in skill_records(mask, dmap, "grasp"):
    print(" ", rec)
