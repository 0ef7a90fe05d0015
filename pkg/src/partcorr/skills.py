"""Geometric skill primitives computed from predicted masks and depth.

A transferred part mask plus an aligned depth map is enough geometry for
the two first-order skills: a top grasp (3-D centroid of the part with
the gripper yawed along the dominant planar axis) and a containment
point (the XY centroid to release above).  When a scene holds several
corresponding parts, the next one to act on is the component with the
highest point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import pi

import numpy as np
from scipy import ndimage

from .errors import DegenerateGeometryError, DimensionError
from .io import BinaryMask, DepthMap

_YAW_DEGENERATE_RTOL = 1e-9


@dataclass(frozen=True)
class Component:
    """One connected foreground region; ``pixels`` is (n, 2) of (row, col)."""

    component_id: int
    pixels: np.ndarray

    @property
    def size(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class ComponentSet:
    components: tuple[Component, ...]

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i: int) -> Component:
        return self.components[i]


@dataclass(frozen=True)
class GraspPose:
    """Top-grasp target: camera-frame position and planar axis direction.

    ``yaw`` is an axis, canonicalized into [-pi/2, pi/2); when the planar
    spread is isotropic the axis is undefined and ``axis_degenerate``
    flags the conventional yaw of 0.
    """

    position: np.ndarray
    yaw: float
    axis_degenerate: bool = False


def connected_components(mask: BinaryMask, connectivity: int = 8) -> ComponentSet:
    """Label foreground components, ordered by their first row-major pixel."""
    if connectivity not in (4, 8):
        raise DimensionError("connectivity must be 4 or 8")
    structure = np.ones((3, 3), dtype=bool) if connectivity == 8 else None
    labels, n = ndimage.label(mask.bits, structure=structure)
    if n == 0:
        return ComponentSet(components=())
    flat = labels.ravel()
    first_seen = np.full(n + 1, flat.size, dtype=np.int64)
    nonzero = np.flatnonzero(flat)
    # Reversed so earlier raster positions overwrite later ones.
    first_seen[flat[nonzero[::-1]]] = nonzero[::-1]
    order = np.argsort(first_seen[1:], kind="stable")
    comps = []
    for new_id, old in enumerate(order + 1):
        ys, xs = np.nonzero(labels == old)
        comps.append(Component(component_id=new_id, pixels=np.column_stack([ys, xs])))
    return ComponentSet(components=tuple(comps))


def backproject(pixels: np.ndarray, depth: DepthMap) -> np.ndarray:
    """Pinhole back-projection of (row, col) pixels with valid depth.

    Returns an (m, 3) array of camera-frame points; pixels with NaN depth
    are dropped.
    """
    rows = pixels[:, 0]
    cols = pixels[:, 1]
    z = depth.values[rows, cols].astype(np.float64)
    valid = np.isfinite(z)
    z = z[valid]
    u = cols[valid].astype(np.float64)
    v = rows[valid].astype(np.float64)
    x = (u - depth.cx) * z / depth.fx
    y = (v - depth.cy) * z / depth.fy
    return np.column_stack([x, y, z])


def _wrap_axis(angle: float) -> float:
    while angle < -pi / 2.0:
        angle += pi
    while angle >= pi / 2.0:
        angle -= pi
    return angle


def grasp_pose(component: Component, depth: DepthMap) -> GraspPose:
    """Mean 3-D point of the part plus the dominant planar axis as yaw."""
    points = backproject(component.pixels, depth)
    if points.shape[0] < 3:
        raise DegenerateGeometryError(
            f"component {component.component_id} has {points.shape[0]} valid-depth "
            "pixels; need >= 3"
        )
    position = points.mean(axis=0)
    xy = points[:, :2] - position[:2]
    cov = xy.T @ xy / points.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    # eigh sorts ascending, so the leading axis is the last column.
    leading = evecs[:, 1]
    spread = max(evals[1], abs(evals[0]))
    degenerate = (evals[1] - evals[0]) <= _YAW_DEGENERATE_RTOL * max(spread, 1e-300)
    yaw = 0.0 if degenerate else _wrap_axis(float(np.arctan2(leading[1], leading[0])))
    return GraspPose(position=position, yaw=yaw, axis_degenerate=bool(degenerate))


def containment_point(component: Component, depth: DepthMap) -> np.ndarray:
    """XY of the mean back-projected point of the part."""
    points = backproject(component.pixels, depth)
    if points.shape[0] < 1:
        raise DegenerateGeometryError(
            f"component {component.component_id} has no valid-depth pixel"
        )
    return points.mean(axis=0)[:2]


def component_height(
    component: Component, depth: DepthMap, support_plane: tuple | None = None
) -> float:
    """Height of the component's highest point.

    Default frame is a camera looking down, where higher means nearer,
    i.e. height = -z.  ``support_plane`` = (a, b, c, d) measures signed
    distance a*x + b*y + c*z + d instead (normal pointing up).
    """
    points = backproject(component.pixels, depth)
    if points.shape[0] == 0:
        return -np.inf
    if support_plane is None:
        return float((-points[:, 2]).max())
    a, b, c, d = support_plane
    norm = float(np.sqrt(a * a + b * b + c * c))
    if norm == 0.0:
        raise DimensionError("support plane normal must be nonzero")
    return float(((points @ np.array([a, b, c]) + d) / norm).max())


def select_next(
    components: ComponentSet, depth: DepthMap, support_plane: tuple | None = None
) -> int:
    """Id of the component with the highest point; ties pick the lowest id."""
    best_id = None
    best_h = -np.inf
    for comp in components:
        h = component_height(comp, depth, support_plane)
        if h > best_h:
            best_h, best_id = h, comp.component_id
    if best_id is None or not np.isfinite(best_h):
        raise DegenerateGeometryError("no component has a valid-depth pixel")
    return best_id


def skill_records(
    mask: BinaryMask,
    depth: DepthMap,
    skill: str,
    connectivity: int = 8,
    support_plane: tuple | None = None,
) -> list[dict]:
    """One JSON-ready record per component for the requested skill.

    The component that would be acted on next (highest point) carries
    ``selected = True``.  Components with too few valid-depth pixels get
    a null pose and an ``error`` field instead of aborting the scene.
    """
    if skill not in ("grasp", "contain"):
        raise DimensionError(f"unknown skill {skill!r}")
    if mask.bits.shape != depth.values.shape:
        raise DimensionError(
            f"mask {mask.bits.shape} does not match depth {depth.values.shape}"
        )
    comps = connected_components(mask, connectivity=connectivity)
    try:
        selected = select_next(comps, depth, support_plane) if len(comps) else None
    except DegenerateGeometryError:
        selected = None
    records = []
    for comp in comps:
        rec = {
            "component_id": comp.component_id,
            "skill": skill,
            "pixels": comp.size,
            "selected": comp.component_id == selected,
        }
        try:
            if skill == "grasp":
                pose = grasp_pose(comp, depth)
                rec["position"] = [float(v) for v in pose.position]
                rec["yaw"] = pose.yaw
                if pose.axis_degenerate:
                    rec["axis_degenerate"] = True
            else:
                point = containment_point(comp, depth)
                rec["position"] = [float(v) for v in point]
                rec["yaw"] = None
        except DegenerateGeometryError as exc:
            rec["position"] = None
            rec["yaw"] = None
            rec["error"] = str(exc)
        records.append(rec)
    return records


def write_skill_jsonl(path, records: list[dict]) -> None:
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")
