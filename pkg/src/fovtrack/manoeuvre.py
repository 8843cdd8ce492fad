"""Scripted UGV formation programs.

A manoeuvre is a chain of piecewise-linear segments: the formation centroid
moves between waypoints while a scalar formation scale grows (climb), shrinks
(descend) or holds (fixed altitude). Three UGVs sit on a triangle around the
centroid, so each ground track is itself piecewise-linear.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

_CONTINUITY_TOL = 1e-9

# Unit-scale UGV offsets from the formation centroid (equilateral triangle,
# circumradius 1). Multiplied by formation_radius and the segment scale.
_UNIT_TRIANGLE = (
    (0.0, 1.0),
    (-math.sqrt(3.0) / 2.0, -0.5),
    (math.sqrt(3.0) / 2.0, -0.5),
)


class ManoeuvreKind(str, enum.Enum):
    FIXED_ALTITUDE = "fixed_altitude"
    CLIMB = "climb"
    DESCEND = "descend"
    COMBINED = "combined"


@dataclass(frozen=True)
class FormationSegment:
    """One linear leg of the program: centroid and scale interpolate."""

    kind: ManoeuvreKind
    duration: float
    centroid_start: tuple[float, float]
    centroid_end: tuple[float, float]
    scale_start: float
    scale_end: float

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("segment duration must be positive")
        if self.scale_start <= 0 or self.scale_end <= 0:
            raise ValueError("formation scale must stay positive")
        if self.kind is ManoeuvreKind.CLIMB and self.scale_end < self.scale_start:
            raise ValueError("climb segment must not shrink the formation")
        if self.kind is ManoeuvreKind.DESCEND and self.scale_end > self.scale_start:
            raise ValueError("descend segment must not grow the formation")
        if self.kind is ManoeuvreKind.FIXED_ALTITUDE and self.scale_end != self.scale_start:
            raise ValueError("fixed-altitude segment must hold the formation scale")


@dataclass(frozen=True)
class ManoeuvreSpec:
    """A complete program: segments plus the formation geometry."""

    kind: ManoeuvreKind
    segments: tuple[FormationSegment, ...]
    formation_radius: float = 0.5

    def __post_init__(self):
        if not self.segments:
            raise ValueError("manoeuvre needs at least one segment")
        for a, b in zip(self.segments, self.segments[1:]):
            jump = math.hypot(b.centroid_start[0] - a.centroid_end[0],
                              b.centroid_start[1] - a.centroid_end[1])
            if jump > _CONTINUITY_TOL or abs(b.scale_start - a.scale_end) > _CONTINUITY_TOL:
                raise ValueError("segments must chain continuously")

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)

    @property
    def segment_boundaries(self) -> tuple[float, ...]:
        """Times at which one segment hands over to the next."""
        out, acc = [], 0.0
        for seg in self.segments[:-1]:
            acc += seg.duration
            out.append(acc)
        return tuple(out)

    def _locate(self, t: float) -> tuple[FormationSegment, float]:
        t = min(max(t, 0.0), self.duration)
        acc = 0.0
        for seg in self.segments:
            if t <= acc + seg.duration or seg is self.segments[-1]:
                frac = (t - acc) / seg.duration
                return seg, min(max(frac, 0.0), 1.0)
            acc += seg.duration
        raise AssertionError("unreachable")

    def scale_at(self, t: float) -> float:
        seg, u = self._locate(t)
        return seg.scale_start + (seg.scale_end - seg.scale_start) * u

    def centroid_at(self, t: float) -> tuple[float, float]:
        seg, u = self._locate(t)
        return (
            seg.centroid_start[0] + (seg.centroid_end[0] - seg.centroid_start[0]) * u,
            seg.centroid_start[1] + (seg.centroid_end[1] - seg.centroid_start[1]) * u,
        )

    def positions_at(self, t: float) -> tuple[tuple[float, float], ...]:
        seg, u = self._locate(t)
        cx = seg.centroid_start[0] + (seg.centroid_end[0] - seg.centroid_start[0]) * u
        cy = seg.centroid_start[1] + (seg.centroid_end[1] - seg.centroid_start[1]) * u
        s = (seg.scale_start + (seg.scale_end - seg.scale_start) * u) * self.formation_radius
        return tuple((cx + s * ox, cy + s * oy) for ox, oy in _UNIT_TRIANGLE)

    def centroid_spread(self, t: float) -> float:
        """World distance from the centroid to the farthest UGV."""
        return self.scale_at(t) * self.formation_radius


def formation_positions(spec: ManoeuvreSpec, t: float) -> tuple[tuple[float, float], ...]:
    """Scripted UGV positions at time t (clamped to the program)."""
    return spec.positions_at(t)


@dataclass(frozen=True)
class ManoeuvreParams:
    """Knobs shared by the program builders."""

    formation_radius: float = 0.5
    centroid_speed: float = 0.18      # m/s along fixed-altitude legs
    drift_speed_frac: float = 0.4     # centroid speed fraction while scaling
    scale_high: float = 1.6
    scale_low: float = 0.75
    primitive_duration: float = 25.0
    fixed_duration: float = 50.0      # its ground path is much longer
    clearance: float = 1.2            # extra inset beyond the formation extent


def _waypoint_box(bounds: tuple[float, float, float, float],
                  p: ManoeuvreParams) -> tuple[float, float, float, float]:
    x_min, x_max, y_min, y_max = bounds
    inset = p.clearance + p.scale_high * p.formation_radius
    if x_max - x_min <= 2 * inset or y_max - y_min <= 2 * inset:
        raise ValueError("environment too small for the formation program")
    return (x_min + inset, x_max - inset, y_min + inset, y_max - inset)


def _random_point(rng: np.random.Generator, box) -> tuple[float, float]:
    return (float(rng.uniform(box[0], box[1])), float(rng.uniform(box[2], box[3])))


def _leg_towards(rng: np.random.Generator, box, start, speed, duration):
    """End point of a constant-speed leg from start, bounced inside the box."""
    ang = rng.uniform(0.0, 2.0 * math.pi)
    dist = speed * duration
    ex = start[0] + dist * math.cos(ang)
    ey = start[1] + dist * math.sin(ang)
    # Reflect rather than clip so legs keep their length statistics.
    ex = _reflect(ex, box[0], box[1])
    ey = _reflect(ey, box[2], box[3])
    return (ex, ey)


def _reflect(v: float, lo: float, hi: float) -> float:
    span = hi - lo
    v = (v - lo) % (2.0 * span)
    return lo + (span - abs(v - span))


def build_fixed_altitude(bounds, rng: np.random.Generator,
                         params: ManoeuvreParams = ManoeuvreParams()) -> ManoeuvreSpec:
    """Long multi-leg tour at constant formation scale."""
    box = _waypoint_box(bounds, params)
    start = _random_point(rng, box)
    legs = max(2, int(round(params.fixed_duration / 12.0)))
    leg_time = params.fixed_duration / legs
    segs = []
    pos = start
    for _ in range(legs):
        end = _leg_towards(rng, box, pos, params.centroid_speed, leg_time)
        segs.append(FormationSegment(
            ManoeuvreKind.FIXED_ALTITUDE, leg_time, pos, end, 1.0, 1.0))
        pos = end
    return ManoeuvreSpec(ManoeuvreKind.FIXED_ALTITUDE, tuple(segs),
                         params.formation_radius)


def _scaling_segment(kind, bounds, rng, params, scale_from, scale_to, duration):
    box = _waypoint_box(bounds, params)
    start = _random_point(rng, box)
    drift = params.centroid_speed * params.drift_speed_frac
    end = _leg_towards(rng, box, start, drift, duration)
    seg = FormationSegment(kind, duration, start, end, scale_from, scale_to)
    return ManoeuvreSpec(kind, (seg,), params.formation_radius)


def build_climb(bounds, rng: np.random.Generator,
                params: ManoeuvreParams = ManoeuvreParams()) -> ManoeuvreSpec:
    """Formation grows from unit scale, forcing the UAV upward."""
    return _scaling_segment(ManoeuvreKind.CLIMB, bounds, rng, params,
                            1.0, params.scale_high, params.primitive_duration)


def build_descend(bounds, rng: np.random.Generator,
                  params: ManoeuvreParams = ManoeuvreParams()) -> ManoeuvreSpec:
    """Formation shrinks back to unit scale from its expanded state."""
    return _scaling_segment(ManoeuvreKind.DESCEND, bounds, rng, params,
                            params.scale_high, 1.0, params.primitive_duration)


def build_combined(bounds, rng: np.random.Generator,
                   params: ManoeuvreParams = ManoeuvreParams(),
                   n_segments: int | None = None) -> ManoeuvreSpec:
    """Random switching program containing all three primitive kinds."""
    box = _waypoint_box(bounds, params)
    if n_segments is None:
        n_segments = int(rng.integers(4, 7))
    n_segments = max(3, n_segments)

    # Guarantee one of each primitive, then pad randomly.
    kinds = [ManoeuvreKind.CLIMB, ManoeuvreKind.DESCEND, ManoeuvreKind.FIXED_ALTITUDE]
    extra = [ManoeuvreKind(k) for k in rng.choice(
        [k.value for k in kinds], size=n_segments - 3)]
    kinds = kinds + extra
    rng.shuffle(kinds)

    segs = []
    pos = _random_point(rng, box)
    scale = 1.0
    for kind in kinds:
        duration = float(rng.uniform(6.0, 9.0))
        if kind is ManoeuvreKind.FIXED_ALTITUDE:
            speed, new_scale = params.centroid_speed, scale
        else:
            speed = params.centroid_speed * params.drift_speed_frac
            if kind is ManoeuvreKind.CLIMB:
                new_scale = min(params.scale_high + 0.1,
                                scale * float(rng.uniform(1.25, 1.5)))
                new_scale = max(new_scale, scale)
            else:
                new_scale = max(params.scale_low,
                                scale * float(rng.uniform(0.65, 0.8)))
                new_scale = min(new_scale, scale)
        end = _leg_towards(rng, box, pos, speed, duration)
        segs.append(FormationSegment(kind, duration, pos, end, scale, new_scale))
        pos, scale = end, new_scale
    return ManoeuvreSpec(ManoeuvreKind.COMBINED, tuple(segs), params.formation_radius)


_BUILDERS = {
    ManoeuvreKind.FIXED_ALTITUDE: build_fixed_altitude,
    ManoeuvreKind.CLIMB: build_climb,
    ManoeuvreKind.DESCEND: build_descend,
    ManoeuvreKind.COMBINED: build_combined,
}


def build_manoeuvre(kind: ManoeuvreKind | str, bounds, seed: int,
                    params: ManoeuvreParams = ManoeuvreParams()) -> ManoeuvreSpec:
    """Seeded random variant of the requested manoeuvre kind."""
    kind = ManoeuvreKind(kind)
    rng = np.random.default_rng(seed)
    return _BUILDERS[kind](bounds, rng, params)
