"""Discrete-time world model: UAV velocity dynamics and scripted UGV tracks.

The UAV responds to normalized stick commands through a first-order velocity
lag; the three UGVs follow the manoeuvre's waypoint program exactly. Stepping
is a pure function, so replaying an action sequence reproduces a trajectory
bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .manoeuvre import ManoeuvreSpec

# Stick convention of the target platform: negative pitch = nose down = fly
# toward +x, negative roll = fly toward +y, positive vertical = climb,
# positive yaw_rate = counter-clockwise.
PITCH_SIGN = -1.0
ROLL_SIGN = -1.0

# Altitude is clamped here only to keep the state physical; the safety layer
# owns the real z band.
Z_FLOOR = 0.01


@dataclass(frozen=True)
class Action:
    """Normalized 4-channel stick command, each component in [-1, 1]."""

    pitch: float = 0.0
    roll: float = 0.0
    vertical: float = 0.0
    yaw_rate: float = 0.0

    def clamped(self) -> "Action":
        return Action(
            _clamp(self.pitch), _clamp(self.roll),
            _clamp(self.vertical), _clamp(self.yaw_rate),
        )

    def is_finite(self) -> bool:
        return all(map(math.isfinite, self.as_tuple()))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.pitch, self.roll, self.vertical, self.yaw_rate)

    @staticmethod
    def from_sequence(values) -> "Action":
        p, r, v, w = (float(x) for x in values)
        return Action(p, r, v, w)


HOVER = Action(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class DynamicsParams:
    """First-order velocity response constants."""

    v_max_xy: float = 1.0    # m/s, per horizontal axis
    v_max_z: float = 0.5     # m/s
    v_max_yaw: float = 0.5   # rad/s
    tau: float = 0.5         # velocity lag time constant, s

    def __post_init__(self):
        if min(self.v_max_xy, self.v_max_z, self.v_max_yaw, self.tau) <= 0:
            raise ValueError("dynamics constants must be positive")


@dataclass(frozen=True)
class WorldState:
    """Ground-truth poses and velocities at one sim instant."""

    t: float
    uav_pos: tuple[float, float, float]
    uav_vel: tuple[float, float, float, float]  # vx, vy, vz, yaw rate
    uav_heading: float
    ugv_pos: tuple[tuple[float, float], ...]
    manoeuvre_phase: float = 0.0

    def as_tuple(self) -> tuple:
        return (self.t, self.uav_pos, self.uav_vel, self.uav_heading,
                self.ugv_pos, self.manoeuvre_phase)


def command_velocity(a: Action, params: DynamicsParams) -> tuple[float, float, float, float]:
    """Map a clamped stick command to the commanded velocity vector."""
    return (
        PITCH_SIGN * params.v_max_xy * a.pitch,
        ROLL_SIGN * params.v_max_xy * a.roll,
        params.v_max_z * a.vertical,
        params.v_max_yaw * a.yaw_rate,
    )


def advance_uav(
    pos: tuple[float, float, float],
    vel: tuple[float, float, float, float],
    heading: float,
    a: Action,
    dt: float,
    params: DynamicsParams,
) -> tuple[tuple[float, float, float], tuple[float, float, float, float], float]:
    """One first-order velocity update plus Euler position integration.

    Shared by step_world and the safety arbiter's lookahead so both predict
    identical positions.
    """
    beta = dt / params.tau
    cmd = command_velocity(a, params)
    new_vel = tuple(v + (c - v) * beta for v, c in zip(vel, cmd))
    x = pos[0] + new_vel[0] * dt
    y = pos[1] + new_vel[1] * dt
    z = max(Z_FLOOR, pos[2] + new_vel[2] * dt)
    new_heading = heading + new_vel[3] * dt
    return (x, y, z), new_vel, new_heading


def step_world(
    world: WorldState,
    a: Action,
    dt: float,
    spec: ManoeuvreSpec,
    params: DynamicsParams = DynamicsParams(),
) -> WorldState:
    """Advance the world by one step under a clamped action.

    Deterministic: identical inputs produce identical outputs bit-for-bit.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not a.is_finite():
        raise ValueError(f"non-finite action components: {a.as_tuple()}")
    a = a.clamped()

    pos, vel, heading = advance_uav(
        world.uav_pos, world.uav_vel, world.uav_heading, a, dt, params)
    t = world.t + dt
    ugv = spec.positions_at(t)
    phase = min(1.0, t / spec.duration) if spec.duration > 0 else 1.0
    return WorldState(
        t=t, uav_pos=pos, uav_vel=vel, uav_heading=heading,
        ugv_pos=ugv, manoeuvre_phase=phase,
    )


def initial_world(
    spec: ManoeuvreSpec,
    uav_pos: tuple[float, float, float],
    t0: float = 0.0,
    heading: float = 0.0,
) -> WorldState:
    """World at rest at the start of a manoeuvre."""
    phase = min(1.0, t0 / spec.duration) if spec.duration > 0 else 1.0
    return WorldState(
        t=t0,
        uav_pos=uav_pos,
        uav_vel=(0.0, 0.0, 0.0, 0.0),
        uav_heading=heading,
        ugv_pos=spec.positions_at(t0),
        manoeuvre_phase=phase,
    )


def _clamp(x: float) -> float:
    return -1.0 if x < -1.0 else (1.0 if x > 1.0 else float(x))
