"""Oriented 3D box geometry: corners, containment, BEV overlap, 3D IoU.

Boxes are gravity-aligned: a single yaw about the z axis, center at the
volumetric middle, dims ordered (l, w, h) along the local x/y/z axes.
All functions are pure; Box3D is immutable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Edges closer to parallel than this are treated as parallel during
# clipping (their endpoints still enter the output polygon).
_PARALLEL_EPS = 1e-12


def normalize_yaw(yaw: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    wrapped = math.fmod(yaw + math.pi, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    return wrapped - math.pi


@dataclass(frozen=True)
class Box3D:
    """One annotated object: class, heading, center and size.

    label is either a raw dataset class or a coarse label name; yaw is
    normalized to [-pi, pi) at construction.
    """

    label: str
    yaw: float
    center: tuple[float, float, float]
    dims: tuple[float, float, float]  # (l, w, h)

    def __post_init__(self):
        cx, cy, cz = self.center
        l, w, h = self.dims
        values = (self.yaw, cx, cy, cz, l, w, h)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"non-finite box field: {self!r}")
        if l <= 0.0 or w <= 0.0 or h <= 0.0:
            raise ValueError(f"box dims must be positive, got {self.dims}")
        object.__setattr__(self, "yaw", normalize_yaw(self.yaw))
        object.__setattr__(self, "center", (float(cx), float(cy), float(cz)))
        object.__setattr__(self, "dims", (float(l), float(w), float(h)))

    def volume(self) -> float:
        l, w, h = self.dims
        return l * w * h

    def bev_area(self) -> float:
        l, w, _ = self.dims
        return l * w

    def bev_radius(self) -> float:
        """Half-diagonal of the BEV rectangle; bounds the reach from center."""
        l, w, _ = self.dims
        return 0.5 * math.hypot(l, w)


def bev_corners(box: Box3D) -> np.ndarray:
    """Four BEV corners of the box as a (4, 2) array, counterclockwise.

    Order starts at the (+l/2, +w/2) corner of the local frame.
    """
    l, w, _ = box.dims
    hl, hw = 0.5 * l, 0.5 * w
    local = np.array([(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)])
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    rot = np.array([(c, -s), (s, c)])
    return local @ rot.T + np.array(box.center[:2])


def points_in_box(box: Box3D, points: np.ndarray) -> np.ndarray:
    """Boolean mask of the (N, 3) points inside the box, boundary included."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cx, cy, cz = box.center
    l, w, h = box.dims
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    dx = pts[:, 0] - cx
    dy = pts[:, 1] - cy
    # Rotate by -yaw into the box frame.
    local_x = c * dx + s * dy
    local_y = -s * dx + c * dy
    local_z = pts[:, 2] - cz
    return (
        (np.abs(local_x) <= 0.5 * l)
        & (np.abs(local_y) <= 0.5 * w)
        & (np.abs(local_z) <= 0.5 * h)
    )


def point_in_box(box: Box3D, point) -> bool:
    """True iff a single (x, y, z) point lies inside the box."""
    return bool(points_in_box(box, np.asarray(point, dtype=np.float64))[0])


def _polygon_area(poly: list[tuple[float, float]]) -> float:
    """Shoelace area (absolute value) of a polygon vertex list."""
    n = len(poly)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return 0.5 * abs(acc)


def _clip_polygon(subject, clip):
    """Sutherland-Hodgman: clip a convex polygon by a CCW convex polygon."""
    output = list(subject)
    n_clip = len(clip)
    for i in range(n_clip):
        if not output:
            break
        cx1, cy1 = clip[i]
        cx2, cy2 = clip[(i + 1) % n_clip]
        ex, ey = cx2 - cx1, cy2 - cy1

        def inside(p):
            return ex * (p[1] - cy1) - ey * (p[0] - cx1) >= 0.0

        def intersect(s, e):
            dx, dy = e[0] - s[0], e[1] - s[1]
            den = ex * dy - ey * dx
            if abs(den) < _PARALLEL_EPS:
                return e  # parallel to the clip edge; endpoints cover it
            t = (ey * (s[0] - cx1) - ex * (s[1] - cy1)) / den
            return (s[0] + t * dx, s[1] + t * dy)

        current, output = output, []
        prev = current[-1]
        prev_in = inside(prev)
        for vert in current:
            vert_in = inside(vert)
            if vert_in:
                if not prev_in:
                    output.append(intersect(prev, vert))
                output.append(vert)
            elif prev_in:
                output.append(intersect(prev, vert))
            prev, prev_in = vert, vert_in
    return output


def bev_intersection_area(a: Box3D, b: Box3D) -> float:
    """Overlap area of the two yaw-rotated BEV rectangles, in m^2."""
    # Cheap reject: rectangles cannot touch beyond their circumradii.
    dx = a.center[0] - b.center[0]
    dy = a.center[1] - b.center[1]
    if math.hypot(dx, dy) > a.bev_radius() + b.bev_radius():
        return 0.0
    clipped = _clip_polygon(
        [tuple(p) for p in bev_corners(a)],
        [tuple(p) for p in bev_corners(b)],
    )
    return _polygon_area(clipped)


def iou3d(a: Box3D, b: Box3D) -> float:
    """Volumetric intersection-over-union of two boxes, in [0, 1]."""
    za1, za2 = a.center[2] - 0.5 * a.dims[2], a.center[2] + 0.5 * a.dims[2]
    zb1, zb2 = b.center[2] - 0.5 * b.dims[2], b.center[2] + 0.5 * b.dims[2]
    dz = min(za2, zb2) - max(za1, zb1)
    if dz <= 0.0:
        return 0.0
    bev = bev_intersection_area(a, b)
    if bev <= 0.0:
        return 0.0
    inter = bev * dz
    union = a.volume() + b.volume() - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)
