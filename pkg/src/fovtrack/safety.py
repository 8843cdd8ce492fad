"""Double-layer safety net: hard geometric margins plus manual override.

The hard layer flags any predicted position inside a margin-inflated obstacle
or within the margin of the arena boundary / altitude band. Because the
vehicle carries first-order velocity lag, the arbiter certifies not just the
next position but the whole braking tail: the hover-decay positions are
scalar multiples of one drift vector, so they lie on a segment that can be
checked exactly. A Pass therefore guarantees a later Hover stays violation
free.
"""

from __future__ import annotations

import enum
import logging
import math
import threading
from dataclasses import dataclass

from .world import HOVER, Action, DynamicsParams, WorldState, advance_uav

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle, used for obstacles and the arena bounds."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise ValueError("rectangle edges must satisfy min < max")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)


Obstacle = Rect


@dataclass(frozen=True)
class SafetyConfig:
    bounds: Rect
    obstacles: tuple[Rect, ...] = ()
    margin: float = 0.3          # safety margin thickness, m
    z_min: float = 0.3
    z_max: float = 3.0
    lookahead_steps: int = 1
    staleness_window: float = 1.0  # manual commands older than this are ignored, s

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")
        if self.z_min >= self.z_max:
            raise ValueError("altitude band must satisfy z_min < z_max")
        if self.lookahead_steps < 1:
            raise ValueError("lookahead_steps must be at least 1")


class OverrideMode(str, enum.Enum):
    AUTONOMOUS = "autonomous"
    MANUAL = "manual"


@dataclass(frozen=True)
class OverrideCommand:
    mode: OverrideMode = OverrideMode.AUTONOMOUS
    manual_action: Action = HOVER
    source: str = ""
    timestamp: float = 0.0


AUTONOMOUS = OverrideCommand()


class Verdict(str, enum.Enum):
    PASS = "pass"
    HOVER = "hover"
    MANUAL = "manual"


@dataclass(frozen=True)
class ArbitrationResult:
    action: Action
    verdict: Verdict
    unsafe: int                              # Eq.-1 flag of the predicted position
    predicted: tuple[float, float, float]
    margin_id: str | None


def check_unsafe(p_next: tuple[float, float], cfg: SafetyConfig) -> int:
    """Planar unsafe indicator: 1 inside any inflated obstacle or within the
    margin of (or beyond) the arena boundary, else 0."""
    x, y = p_next
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError("position must be finite")
    xi = cfg.margin
    b = cfg.bounds
    if x - xi < b.x_min or x + xi > b.x_max or y - xi < b.y_min or y + xi > b.y_max:
        return 1
    for o in cfg.obstacles:
        if x + xi > o.x_min and x - xi < o.x_max and y + xi > o.y_min and y - xi < o.y_max:
            return 1
    return 0


def check_unsafe_ugv(p_next: tuple[float, float], cfg: SafetyConfig) -> int:
    """Same predicate for a UGV; the arbitration consequence is a stop."""
    return check_unsafe(p_next, cfg)


def arbitrate_ugv(
    current: tuple[float, float],
    proposed_next: tuple[float, float],
    cfg: SafetyConfig,
) -> tuple[tuple[float, float], bool]:
    """Freeze a ground vehicle whose next scripted position would violate."""
    if check_unsafe_ugv(proposed_next, cfg):
        return current, True
    return proposed_next, False


def classify_unsafe(p: tuple[float, float], z: float, cfg: SafetyConfig) -> str | None:
    """Identity of the violated margin, or None when the point is safe."""
    x, y = p
    xi = cfg.margin
    b = cfg.bounds
    if x - xi < b.x_min or x + xi > b.x_max or y - xi < b.y_min or y + xi > b.y_max:
        return "boundary"
    if z - xi < cfg.z_min or z + xi > cfg.z_max:
        return "altitude"
    for i, o in enumerate(cfg.obstacles):
        if x + xi > o.x_min and x - xi < o.x_max and y + xi > o.y_min and y - xi < o.y_max:
            return f"obstacle[{i}]"
    return None


def arbitrate(
    proposed: Action,
    world: WorldState,
    cfg: SafetyConfig,
    override: OverrideCommand = AUTONOMOUS,
    dt: float = 0.05,
    params: DynamicsParams = DynamicsParams(),
) -> ArbitrationResult:
    """Pick the effective action: manual override if fresh, then the hard
    margin check on the predicted motion; violations force a hover."""
    manual = override.mode is OverrideMode.MANUAL
    if manual and world.t - override.timestamp > cfg.staleness_window:
        logger.warning(
            "ignoring stale manual override from %r (age %.2f s)",
            override.source, world.t - override.timestamp)
        manual = False
    candidate = (override.manual_action if manual else proposed).clamped()

    margin_id, predicted = _unsafe_motion(world, candidate, dt, cfg, params)
    eta = check_unsafe((predicted[0], predicted[1]), cfg)
    if margin_id is not None:
        return ArbitrationResult(HOVER, Verdict.HOVER, eta, predicted, margin_id)
    verdict = Verdict.MANUAL if manual else Verdict.PASS
    return ArbitrationResult(candidate, verdict, eta, predicted, None)


def _unsafe_motion(world, action, dt, cfg, params):
    """Margin id hit by the candidate rollout or its braking tail, if any."""
    pos, vel, heading = world.uav_pos, world.uav_vel, world.uav_heading
    first = None
    for _ in range(cfg.lookahead_steps):
        pos, vel, heading = advance_uav(pos, vel, heading, action, dt, params)
        if first is None:
            first = pos
        hit = classify_unsafe((pos[0], pos[1]), pos[2], cfg)
        if hit is not None:
            return hit, first
    return _braking_tail_unsafe(pos, vel, dt, params, cfg), first


def _braking_tail_unsafe(pos, vel, dt, params, cfg):
    """Check the hover-decay path from a predicted state.

    Under hover the velocity decays by q = 1 - dt/tau per step, so every
    future position is pos + dt*v*S_k with S_k a partial geometric sum: the
    whole tail lies on one segment whose extremes are known in closed form.
    """
    q = 1.0 - dt / params.tau
    if abs(q) >= 1.0:
        raise ValueError("braking certification requires dt < 2*tau")
    sums = (0.0, q, q * (1.0 + q), q / (1.0 - q))
    lo, hi = min(sums), max(sums)
    ax, ay, az = (pos[0] + dt * vel[0] * lo, pos[1] + dt * vel[1] * lo,
                  pos[2] + dt * vel[2] * lo)
    bx, by, bz = (pos[0] + dt * vel[0] * hi, pos[1] + dt * vel[1] * hi,
                  pos[2] + dt * vel[2] * hi)
    for px, py, pz in ((ax, ay, az), (bx, by, bz)):
        hit = classify_unsafe((px, py), pz, cfg)
        if hit is not None:
            return hit
    # Endpoints safe covers the convex boundary/altitude bands; obstacles can
    # still be crossed mid-segment.
    xi = cfg.margin
    for i, o in enumerate(cfg.obstacles):
        if _segment_hits_rect(ax, ay, bx, by,
                              o.x_min - xi, o.x_max + xi,
                              o.y_min - xi, o.y_max + xi):
            return f"obstacle[{i}]"
    return None


def _segment_hits_rect(ax, ay, bx, by, lo_x, hi_x, lo_y, hi_y) -> bool:
    """Open-rectangle slab test for the segment A-B."""
    t0, t1 = 0.0, 1.0
    for a, b, lo, hi in ((ax, bx, lo_x, hi_x), (ay, by, lo_y, hi_y)):
        d = b - a
        if d == 0.0:
            if not lo < a < hi:
                return False
            continue
        s0, s1 = (lo - a) / d, (hi - a) / d
        if s0 > s1:
            s0, s1 = s1, s0
        t0, t1 = max(t0, s0), min(t1, s1)
        if t0 >= t1:
            return False
    return True


class Arbiter:
    """Stateful wrapper holding the latest override command.

    Single writer (the telemetry service), many readers (the control loop);
    the lock is held only for the reference swap.
    """

    def __init__(self, cfg: SafetyConfig, params: DynamicsParams = DynamicsParams()):
        self.cfg = cfg
        self.params = params
        self._override = AUTONOMOUS
        self._lock = threading.Lock()

    def set_override(self, command: OverrideCommand) -> None:
        with self._lock:
            self._override = command

    @property
    def override(self) -> OverrideCommand:
        with self._lock:
            return self._override

    def decide(self, proposed: Action, world: WorldState, dt: float) -> ArbitrationResult:
        return arbitrate(proposed, world, self.cfg, self.override, dt, self.params)
