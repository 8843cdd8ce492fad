"""Downward pinhole camera geometry.

Image coordinates are dimensionless: a ground point offset by d at altitude z
lands at focal*d/z, rotated into the body-fixed image frame. Visibility is a
circular field-of-view test against the image extent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DEGENERATE_ALTITUDE = 0.05


class DegenerateProjectionError(ValueError):
    """Altitude too low for a meaningful ground projection."""


@dataclass(frozen=True)
class CameraModel:
    focal: float = 1.0
    half_fov: float = math.radians(32.0)

    def __post_init__(self):
        if not 0.0 < self.half_fov < math.pi / 2.0:
            raise ValueError("half_fov must lie in (0, pi/2)")
        if self.focal <= 0.0:
            raise ValueError("focal must be positive")

    @property
    def image_extent(self) -> float:
        """Half-width of the circular image plane, in image units."""
        return self.focal * math.tan(self.half_fov)


def project_to_image(
    cam: CameraModel,
    uav_pos: tuple[float, float, float],
    heading: float,
    point: tuple[float, float],
) -> tuple[float, float, bool]:
    """Project a ground point into the image; returns (u, v, visible)."""
    x, y, z = uav_pos
    if z <= DEGENERATE_ALTITUDE:
        raise DegenerateProjectionError(
            f"altitude {z:.3f} m is at or below the projection floor")
    du = cam.focal * (point[0] - x) / z
    dv = cam.focal * (point[1] - y) / z
    c, s = math.cos(-heading), math.sin(-heading)
    u = c * du - s * dv
    v = s * du + c * dv
    visible = math.hypot(u, v) <= cam.image_extent
    return u, v, visible


def unproject_from_image(
    cam: CameraModel,
    uav_pos: tuple[float, float, float],
    heading: float,
    image_point: tuple[float, float],
) -> tuple[float, float]:
    """Inverse of project_to_image: image point back to the world offset."""
    u, v = image_point
    c, s = math.cos(heading), math.sin(heading)
    du = c * u - s * v
    dv = s * u + c * v
    z = uav_pos[2]
    return du * z / cam.focal, dv * z / cam.focal


def enclosing_circle(
    points: list[tuple[float, float]] | tuple[tuple[float, float], ...],
) -> tuple[tuple[float, float], float]:
    """Smallest circle enclosing 1..3 points, solved exactly by cases."""
    pts = [(float(x), float(y)) for x, y in points]
    if not pts:
        raise ValueError("enclosing_circle needs at least one point")
    if len(pts) > 3:
        raise ValueError("exact solver handles at most three points")
    if len(pts) == 1:
        return pts[0], 0.0
    if len(pts) == 2:
        return _diameter_circle(pts[0], pts[1])

    a, b, c = pts
    best = None
    for p, q, r in ((a, b, c), (a, c, b), (b, c, a)):
        center, radius = _diameter_circle(p, q)
        if _dist(center, r) <= radius * (1.0 + 1e-12):
            if best is None or radius < best[1]:
                best = (center, radius)
    if best is not None:
        return best
    return _circumcircle(a, b, c)


def _diameter_circle(p, q):
    center = ((p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0)
    return center, _dist(p, q) / 2.0


def _circumcircle(a, b, c):
    d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    if d == 0.0:
        # Collinear: fall back to the widest pair.
        pairs = ((a, b), (a, c), (b, c))
        p, q = max(pairs, key=lambda pq: _dist(pq[0], pq[1]))
        return _diameter_circle(p, q)
    a2 = a[0] * a[0] + a[1] * a[1]
    b2 = b[0] * b[0] + b[1] * b[1]
    c2 = c[0] * c[0] + c[1] * c[1]
    ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d
    uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d
    center = (ux, uy)
    radius = max(_dist(center, a), _dist(center, b), _dist(center, c))
    return center, radius


def _dist(p, q) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])
