"""Safety-oriented loss values on matched box pairs.

These are reference implementations for offline scoring: a Huber-style
kernel on the raw 7-tuple parameters, an enclosure term derived from 3D
IoGT, and their convex blend. No gradients are provided.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import Box3D, iogt3d, wrap_angle

#: Index of the yaw parameter inside the 7-tuple.
_YAW_INDEX = 6


@dataclass(frozen=True)
class LossConfig:
    """Blend weight and kernel settings.

    blend_lambda weighs the accuracy term against the enclosure term and
    must lie strictly inside (0, 1).
    """

    blend_lambda: float = 0.8
    smooth_l1_beta: float = 1.0
    yaw_wrapping: bool = True

    def __post_init__(self):
        if not (0.0 < self.blend_lambda < 1.0):
            raise ValueError(f"lambda must be in (0, 1), got {self.blend_lambda}")
        if self.smooth_l1_beta <= 0.0:
            raise ValueError(f"beta must be positive, got {self.smooth_l1_beta}")


def _huber(residual: float, beta: float) -> float:
    r = abs(residual)
    if r < beta:
        return 0.5 * r * r / beta
    return r - 0.5 * beta


def smooth_l1(p, g, beta: float = 1.0, wrap_yaw: bool = True) -> float:
    """Smooth-L1 distance between two box 7-tuples.

    Accepts Box3D values or plain 7-sequences (x, y, z, l, h, w, yaw). The
    yaw residual is wrapped to (-pi, pi] unless wrap_yaw is disabled.
    """
    pt = p.as_tuple() if isinstance(p, Box3D) else tuple(p)
    gt = g.as_tuple() if isinstance(g, Box3D) else tuple(g)
    if len(pt) != 7 or len(gt) != 7:
        raise ValueError("expected 7-tuples of box parameters")
    total = 0.0
    for i, (pv, gv) in enumerate(zip(pt, gt)):
        residual = pv - gv
        if i == _YAW_INDEX and wrap_yaw:
            residual = wrap_angle(residual)
        total += _huber(residual, beta)
    return total


def iogt_loss(p: Box3D, g: Box3D) -> float:
    """Enclosure loss ``1 - IoGT3D``; zero iff the prediction contains the
    ground truth."""
    return 1.0 - iogt3d(p, g)


def safety_loss(p: Box3D, g: Box3D, config: LossConfig = LossConfig()) -> float:
    """Convex blend of the accuracy and enclosure terms."""
    lam = config.blend_lambda
    accuracy = smooth_l1(p, g, config.smooth_l1_beta, config.yaw_wrapping)
    return lam * accuracy + (1.0 - lam) * iogt_loss(p, g)
