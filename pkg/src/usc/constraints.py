"""Spatial-constraint verdicts and scores for matched box pairs.

A prediction is "safe" when it fully covers its ground truth as seen from
the vehicle. That requirement decomposes into two checks:

* PV: the prediction's image-plane rectangle must enclose the ground
  truth's (quantified by IoGT, the intersection area over the ground-truth
  area).
* BEV: the prediction's closest footprint corner must be no farther from
  the vehicle than the ground truth's, and the vehicle-facing sides (drawn
  between the closest, rightmost and leftmost corners) must not cross
  (quantified by ADR, the geometric mean of per-corner distance ratios).

The consolidated verdict is the conjunction of both checks; the
consolidated score is ``IoGT * ADR`` in [0, 1].

Conventions: azimuth is ``atan2(x, z)``, increasing to the right; all BEV
footprint vertices must lie strictly ahead of the vehicle (z > 0), and ties
between candidate representative vertices break to the smallest (x, z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (BehindVehicle, DegenerateGroundTruth,
                     GroundTruthAtOrigin, OriginInside)
from .geometry import (EPS_GEOM, BevPolygon, Box3D, Point2, Rect2D,
                       Segment2D, project_bev, project_pv_rect,
                       segments_intersect)


@dataclass(frozen=True)
class RepresentativePoints:
    """Closest, rightmost and leftmost footprint vertices seen from the AV."""

    closest: Point2
    rightmost: Point2
    leftmost: Point2


@dataclass(frozen=True)
class UscBreakdown:
    """Constraint verdicts plus the quantitative measures behind them."""

    pv_constraint: bool
    bev_constraint: bool
    verdict: bool
    iogt_pv: float
    adr: float
    usc: float


def azimuth(point: Point2) -> float:
    """Bearing of a BEV point from the vehicle, rightward positive."""
    return math.atan2(point.x, point.z)


def iogt_pv(p: Rect2D, g: Rect2D) -> float:
    """Intersection-over-ground-truth for two PV rectangles."""
    g_du = g.max_u - g.min_u
    g_dv = g.max_v - g.min_v
    if g_du * g_dv <= EPS_GEOM * EPS_GEOM:
        raise DegenerateGroundTruth(
            f"ground-truth rectangle area {g_du * g_dv:.3g} is degenerate")
    du = min(p.max_u, g.max_u) - max(p.min_u, g.min_u)
    dv = min(p.max_v, g.max_v) - max(p.min_v, g.min_v)
    if du <= 0.0 or dv <= 0.0:
        return 0.0
    return (du * dv) / (g_du * g_dv)


def pv_constraint(p: Rect2D, g: Rect2D) -> bool:
    """True iff the prediction rectangle encloses the ground truth.

    Containment is closed: a prediction exactly coincident with the ground
    truth satisfies the constraint.
    """
    return (p.min_u <= g.min_u and p.min_v <= g.min_v
            and g.max_u <= p.max_u and g.max_v <= p.max_v)


def representative_points(poly: BevPolygon) -> RepresentativePoints:
    """Extract the closest / rightmost / leftmost vertices of a footprint.

    Raises OriginInside when the vehicle origin lies in the footprint and
    BehindVehicle when any vertex sits at or behind the vehicle; in both
    cases the constraint semantics are undefined.
    """
    if poly.contains_origin():
        raise OriginInside("vehicle origin lies inside the footprint")
    for v in poly.vertices:
        if v.z <= 0.0:
            raise BehindVehicle(
                f"footprint vertex at z={v.z:.6g} m is not ahead of the vehicle")
    closest = min(poly.vertices, key=lambda v: (v.norm(), v.x, v.z))
    rightmost = max(poly.vertices, key=lambda v: (azimuth(v), -v.x, -v.z))
    leftmost = min(poly.vertices, key=lambda v: (azimuth(v), v.x, v.z))
    return RepresentativePoints(closest, rightmost, leftmost)


def _facing_segments(rep: RepresentativePoints) -> list:
    """AV-facing sides of a footprint; degenerate sides are dropped."""
    segments = []
    for end in (rep.rightmost, rep.leftmost):
        if math.hypot(end.x - rep.closest.x, end.z - rep.closest.z) > EPS_GEOM:
            segments.append(Segment2D(rep.closest, end))
    return segments


def bev_constraint(p: BevPolygon, g: BevPolygon) -> bool:
    """Closest-corner underestimation plus non-crossing facing sides.

    Note that collinear overlap of the facing sides counts as a crossing,
    so a prediction exactly coincident with the ground truth fails this
    constraint (its facing sides lie on top of the ground truth's).
    """
    rep_p = representative_points(p)
    rep_g = representative_points(g)
    if rep_p.closest.norm() > rep_g.closest.norm():
        return False
    return not segments_intersect(_facing_segments(rep_p) + _facing_segments(rep_g))


def distance_ratio_geomean(g_distances, p_distances) -> float:
    """Geometric mean of ``||g|| / max(||p||, ||g||)`` over paired distances."""
    product = 1.0
    for gd, pd in zip(g_distances, p_distances):
        product *= gd / max(pd, gd)
    return product ** (1.0 / len(g_distances))


def adr(p: BevPolygon, g: BevPolygon) -> float:
    """Average distance ratio between the two footprints, in (0, 1].

    Each representative point of the prediction is compared against its
    ground-truth counterpart by distance from the vehicle; ratios saturate
    at 1 when the prediction point is closer, and the three ratios combine
    by geometric mean.
    """
    rep_p = representative_points(p)
    rep_g = representative_points(g)
    g_dists = (rep_g.closest.norm(), rep_g.rightmost.norm(), rep_g.leftmost.norm())
    p_dists = (rep_p.closest.norm(), rep_p.rightmost.norm(), rep_p.leftmost.norm())
    if min(g_dists) <= EPS_GEOM:
        raise GroundTruthAtOrigin(
            "ground-truth representative point coincides with the origin")
    return distance_ratio_geomean(g_dists, p_dists)


def usc_score(p: Box3D, g: Box3D, focal: float = 1.0) -> UscBreakdown:
    """Full constraint breakdown for a prediction / ground-truth pair.

    Propagates BehindCamera / BehindVehicle / OriginInside /
    GroundTruthAtOrigin from the underlying projections when the pair is
    outside the domain where the constraints are defined.
    """
    p_pv = project_pv_rect(p, focal)
    g_pv = project_pv_rect(g, focal)
    p_bev = project_bev(p)
    g_bev = project_bev(g)
    pv_ok = pv_constraint(p_pv, g_pv)
    bev_ok = bev_constraint(p_bev, g_bev)
    iogt = iogt_pv(p_pv, g_pv)
    ratio = adr(p_bev, g_bev)
    return UscBreakdown(
        pv_constraint=pv_ok,
        bev_constraint=bev_ok,
        verdict=pv_ok and bev_ok,
        iogt_pv=iogt,
        adr=ratio,
        usc=iogt * ratio,
    )


def usc_verdict(p: Box3D, g: Box3D, focal: float = 1.0) -> bool:
    """Conjunction of the PV and BEV constraints for a box pair."""
    return usc_score(p, g, focal).verdict
