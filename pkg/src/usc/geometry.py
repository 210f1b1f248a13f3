"""Upright 3D box geometry, projections, and overlap measures.

Coordinate conventions
----------------------
The autonomous vehicle (AV) sits at the origin of a right-handed frame with
``z`` along the heading, ``x`` to the right, and ``y`` completing the frame
(pointing down). A box is the 7-tuple ``(x, y, z, l, h, w, yaw)``: center,
length along ``x`` at zero yaw, height along ``y``, width along ``z``, and
yaw as rotation about the ``y`` axis.

Two projections are used throughout:

* PV (perspective view): pinhole mapping ``(a, b) = (f*x/z, f*y/z)`` onto a
  normalized image plane; boxes become axis-aligned rectangles bounding the
  eight projected corners.
* BEV (bird's-eye view): orthographic drop of ``y`` onto the ``(x, z)``
  ground plane; boxes become counter-clockwise rectangles.

All functions are pure; values are immutable and safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Union

from .errors import BehindCamera

#: Point-coincidence / degeneracy tolerance, meters.
EPS_GEOM = 1e-9

#: Minimum depth ahead of the camera for a PV projection to be defined, meters.
EPS_DEPTH = 1e-3

_TAU = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]. Values already in range pass through unchanged."""
    if -math.pi < angle <= math.pi:
        return angle
    wrapped = math.remainder(angle, _TAU)
    if wrapped <= -math.pi:
        wrapped += _TAU
    return wrapped


class Point3(NamedTuple):
    x: float
    y: float
    z: float


class Point2(NamedTuple):
    """Point on the BEV ground plane (meters)."""

    x: float
    z: float

    def norm(self) -> float:
        return math.hypot(self.x, self.z)


@dataclass(frozen=True)
class Box3D:
    """Upright oriented box in the AV frame.

    Dimensions must be positive and finite; yaw is normalized to (-pi, pi]
    on construction.
    """

    center_x: float
    center_y: float
    center_z: float
    length: float
    height: float
    width: float
    yaw: float

    def __post_init__(self):
        values = (self.center_x, self.center_y, self.center_z,
                  self.length, self.height, self.width, self.yaw)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"box parameters must be finite, got {values}")
        if self.length <= 0 or self.height <= 0 or self.width <= 0:
            raise ValueError(
                f"box dimensions must be positive, got l={self.length}, "
                f"h={self.height}, w={self.width}")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    def as_tuple(self) -> tuple:
        return (self.center_x, self.center_y, self.center_z,
                self.length, self.height, self.width, self.yaw)


@dataclass(frozen=True)
class Rect2D:
    """Axis-aligned rectangle in the normalized PV plane."""

    min_u: float
    min_v: float
    max_u: float
    max_v: float

    def __post_init__(self):
        values = (self.min_u, self.min_v, self.max_u, self.max_v)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"rectangle bounds must be finite, got {values}")
        if self.min_u > self.max_u or self.min_v > self.max_v:
            raise ValueError(f"rectangle bounds out of order: {values}")

    @property
    def area(self) -> float:
        return (self.max_u - self.min_u) * (self.max_v - self.min_v)


@dataclass(frozen=True)
class BevPolygon:
    """Convex counter-clockwise polygon on the BEV plane.

    Vertices must be distinct (within EPS_GEOM) and wound counter-clockwise
    with no reflex corners. ``project_bev`` always produces four vertices.
    """

    vertices: tuple

    def __post_init__(self):
        verts = tuple(Point2(float(p[0]), float(p[1])) for p in self.vertices)
        if len(verts) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        for p in verts:
            if not (math.isfinite(p.x) and math.isfinite(p.z)):
                raise ValueError(f"polygon vertex not finite: {p}")
        n = len(verts)
        for i in range(n):
            a, b = verts[i], verts[(i + 1) % n]
            if math.hypot(b.x - a.x, b.z - a.z) <= EPS_GEOM:
                raise ValueError(f"repeated polygon vertices at index {i}")
        for i in range(n):
            a, b, c = verts[i], verts[(i + 1) % n], verts[(i + 2) % n]
            cross = (b.x - a.x) * (c.z - b.z) - (b.z - a.z) * (c.x - b.x)
            scale = math.hypot(b.x - a.x, b.z - a.z) * math.hypot(c.x - b.x, c.z - b.z)
            if cross < -EPS_GEOM * max(scale, 1.0):
                raise ValueError("polygon is not convex counter-clockwise")
        object.__setattr__(self, "vertices", verts)

    @property
    def area(self) -> float:
        return shoelace_area(self.vertices)

    def contains_origin(self) -> bool:
        """True if the origin lies inside the polygon or on its boundary."""
        n = len(self.vertices)
        for i in range(n):
            a, b = self.vertices[i], self.vertices[(i + 1) % n]
            if (b.x - a.x) * (-a.z) - (b.z - a.z) * (-a.x) < 0.0:
                return False
        return True


@dataclass(frozen=True)
class Segment2D:
    """Line segment on the BEV plane with distinct endpoints."""

    a: Point2
    b: Point2

    def __post_init__(self):
        a = Point2(float(self.a[0]), float(self.a[1]))
        b = Point2(float(self.b[0]), float(self.b[1]))
        if math.hypot(b.x - a.x, b.z - a.z) <= EPS_GEOM:
            raise ValueError(f"degenerate segment at {a}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


def box_corners(box: Box3D) -> tuple:
    """Eight corners of the box in a fixed, bit-coded order.

    Corner ``i`` takes the +x local side iff bit 0 of ``i`` is set, the +y
    side iff bit 1 is set, and the +z side iff bit 2 is set (sides named
    before yaw is applied). Offsets are rotated about the y axis by the yaw
    and translated by the center.
    """
    hx, hy, hz = box.length / 2.0, box.height / 2.0, box.width / 2.0
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    corners = []
    for i in range(8):
        dx = hx if i & 1 else -hx
        dy = hy if i & 2 else -hy
        dz = hz if i & 4 else -hz
        corners.append(Point3(
            box.center_x + dx * c + dz * s,
            box.center_y + dy,
            box.center_z - dx * s + dz * c,
        ))
    return tuple(corners)


def project_pv_rect(box: Box3D, focal: float = 1.0) -> Rect2D:
    """Axis-aligned PV bounding rectangle of the eight projected corners.

    Raises BehindCamera if any corner has depth below EPS_DEPTH, in which
    case the PV constraint is undefined for this box.
    """
    if focal <= 0:
        raise ValueError(f"focal length must be positive, got {focal}")
    corners = box_corners(box)
    for p in corners:
        if p.z < EPS_DEPTH:
            raise BehindCamera(
                f"box corner at z={p.z:.6g} m is behind the camera plane")
    us = [focal * p.x / p.z for p in corners]
    vs = [focal * p.y / p.z for p in corners]
    return Rect2D(min(us), min(vs), max(us), max(vs))


def project_bev(box: Box3D) -> BevPolygon:
    """Four-vertex counter-clockwise BEV footprint of the box."""
    hx, hz = box.length / 2.0, box.width / 2.0
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    local = ((hx, hz), (-hx, hz), (-hx, -hz), (hx, -hz))  # CCW in (x, z)
    return BevPolygon(tuple(
        Point2(box.center_x + dx * c + dz * s, box.center_z - dx * s + dz * c)
        for dx, dz in local))


PolygonLike = Union[BevPolygon, Rect2D, Sequence]


def _as_ccw_vertices(poly: PolygonLike) -> tuple:
    if isinstance(poly, BevPolygon):
        return poly.vertices
    if isinstance(poly, Rect2D):
        return (Point2(poly.min_u, poly.min_v), Point2(poly.max_u, poly.min_v),
                Point2(poly.max_u, poly.max_v), Point2(poly.min_u, poly.max_v))
    return tuple(Point2(float(p[0]), float(p[1])) for p in poly)


def shoelace_area(vertices: Sequence) -> float:
    """Unsigned polygon area by the shoelace formula."""
    n = len(vertices)
    acc = 0.0
    for i in range(n):
        ax, az = vertices[i][0], vertices[i][1]
        bx, bz = vertices[(i + 1) % n][0], vertices[(i + 1) % n][1]
        acc += ax * bz - bx * az
    return abs(acc) / 2.0


def _clip_convex(subject: Sequence, clip: Sequence) -> list:
    """Sutherland-Hodgman clip of a convex subject by a convex CCW clip polygon."""
    output = list(subject)
    n = len(clip)
    for i in range(n):
        if not output:
            return []
        ax, az = clip[i][0], clip[i][1]
        bx, bz = clip[(i + 1) % n][0], clip[(i + 1) % n][1]
        ex, ez = bx - ax, bz - az

        def inside(p):
            # non-strict half-plane test; EPS slack keeps shared boundaries in
            return ex * (p[1] - az) - ez * (p[0] - ax) >= -EPS_GEOM

        def cross_point(p, q):
            den = ex * (q[1] - p[1]) - ez * (q[0] - p[0])
            num = ez * (p[0] - ax) - ex * (p[1] - az)
            t = num / den if den != 0.0 else 0.5
            t = min(1.0, max(0.0, t))
            return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))

        current = output
        output = []
        prev = current[-1]
        prev_in = inside(prev)
        for point in current:
            point_in = inside(point)
            if point_in:
                if not prev_in:
                    output.append(cross_point(prev, point))
                output.append(point)
            elif prev_in:
                output.append(cross_point(prev, point))
            prev, prev_in = point, point_in
    return output


def convex_intersection_area(p: PolygonLike, q: PolygonLike) -> float:
    """Area of the intersection of two convex polygons; 0 if disjoint."""
    clipped = _clip_convex(_as_ccw_vertices(p), _as_ccw_vertices(q))
    if len(clipped) < 3:
        return 0.0
    return shoelace_area(clipped)


def _pair_intersects(s: Segment2D, t: Segment2D) -> bool:
    """Intersection predicate for one segment pair.

    True when the segments share a point that is not a coincident endpoint
    of both; collinear overlap of positive length counts as an intersection.
    """
    ax, az, bx, bz = s.a.x, s.a.z, s.b.x, s.b.z
    cx, cz, dx, dz = t.a.x, t.a.z, t.b.x, t.b.z
    ux, uz = bx - ax, bz - az
    vx, vz = dx - cx, dz - cz
    wx, wz = cx - ax, cz - az
    len_s = math.hypot(ux, uz)
    len_t = math.hypot(vx, vz)
    den = ux * vz - uz * vx

    if abs(den) > EPS_GEOM * len_s * len_t:
        # non-parallel lines: unique intersection at parameters (ts, tt)
        ts = (wx * vz - wz * vx) / den
        tt = (wx * uz - wz * ux) / den
        slack_s = EPS_GEOM / len_s
        slack_t = EPS_GEOM / len_t
        if not (-slack_s <= ts <= 1.0 + slack_s and -slack_t <= tt <= 1.0 + slack_t):
            return False
        px, pz = ax + ts * ux, az + ts * uz

        def near(qx, qz):
            return math.hypot(px - qx, pz - qz) <= EPS_GEOM

        endpoint_of_s = near(ax, az) or near(bx, bz)
        endpoint_of_t = near(cx, cz) or near(dx, dz)
        return not (endpoint_of_s and endpoint_of_t)

    # parallel: only collinear overlap of positive length counts
    if abs(wx * uz - wz * ux) > EPS_GEOM * len_s:
        return False
    t0 = (wx * ux + wz * uz) / len_s  # projection of t.a onto s, meters
    t1 = ((dx - ax) * ux + (dz - az) * uz) / len_s
    lo = max(0.0, min(t0, t1))
    hi = min(len_s, max(t0, t1))
    return hi - lo > EPS_GEOM


def segments_intersect(segments: Iterable[Segment2D]) -> bool:
    """True iff some pair of segments intersects, excluding touches at
    coincident endpoints.

    The representative-point sets this serves hold exactly four segments, so
    the quadratic pairwise test is used rather than a sweep line.
    """
    segs = list(segments)
    if len(segs) < 2:
        raise ValueError("need at least 2 segments")
    for i in range(len(segs)):
        for j in range(i + 1, len(segs)):
            if _pair_intersects(segs[i], segs[j]):
                return True
    return False


def _vertical_interval(box: Box3D) -> tuple:
    half = box.height / 2.0
    return box.center_y - half, box.center_y + half


def box_volume(box: Box3D) -> float:
    """Box volume as BEV footprint area times vertical extent.

    Both factors are computed through the same code paths as the
    intersection volume so that containment yields exact volume ratios.
    """
    lo, hi = _vertical_interval(box)
    return project_bev(box).area * (hi - lo)


def _overlap_parts(p: Box3D, g: Box3D, subject_first: bool) -> float:
    p_lo, p_hi = _vertical_interval(p)
    g_lo, g_hi = _vertical_interval(g)
    vertical = min(p_hi, g_hi) - max(p_lo, g_lo)
    if vertical <= 0.0:
        return 0.0
    first, second = (p, g) if subject_first else (g, p)
    area = convex_intersection_area(project_bev(first), project_bev(second))
    return area * vertical


def intersection_volume(p: Box3D, g: Box3D) -> float:
    """Overlap volume: BEV footprint intersection area times vertical overlap.

    The clipping order is fixed canonically so the result is bit-identical
    under argument swap.
    """
    fp_p, fp_g = project_bev(p), project_bev(g)
    return _overlap_parts(p, g, subject_first=fp_p.vertices <= fp_g.vertices)


def iou3d(p: Box3D, g: Box3D) -> float:
    """Intersection-over-union of overlap volume against the union volume."""
    inter = intersection_volume(p, g)
    union = box_volume(p) + box_volume(g) - inter
    return min(1.0, inter / union)


def iogt3d(p: Box3D, g: Box3D) -> float:
    """Intersection-over-ground-truth: overlap volume against Vol(g) alone.

    Saturates at 1 exactly when p contains g; unlike IoU it measures
    enclosure, not alignment. The ground-truth footprint is used as the
    clipping subject so full containment gives a ratio of exactly 1.
    """
    return min(1.0, _overlap_parts(p, g, subject_first=False) / box_volume(g))
