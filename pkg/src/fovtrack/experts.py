"""Scripted proportional controllers standing in for the human operator.

Horizontal channels steer against the image-plane centroid error (positive
image-x error commands negative pitch, the platform's stick convention);
the vertical channel regulates the actual spread radius onto the target one.
Dimensions outside a sub-task's active set output exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .dataset import SubTaskSpec
from .manoeuvre import ManoeuvreKind
from .observation import Observation
from .world import Action

Controller = Callable[[Observation], Action]


@dataclass(frozen=True)
class ExpertGains:
    horizontal: float = 1.8
    vertical: float = 6.0
    centering: float = 0.9   # reduced horizontal gain while climbing/descending

    def __post_init__(self):
        if min(self.horizontal, self.vertical, self.centering) <= 0:
            raise ValueError("gains must be positive")


def _controller(active: frozenset[str], g_xy: float, g_z: float) -> Controller:
    def act(obs: Observation) -> Action:
        pitch = -g_xy * obs.ugv_center[0] if "pitch" in active else 0.0
        roll = -g_xy * obs.ugv_center[1] if "roll" in active else 0.0
        vertical = 0.0
        if "vertical" in active:
            vertical = g_z * (obs.actual_radius - obs.target_radius)
        return Action(pitch, roll, vertical, 0.0).clamped()
    return act


def scripted_expert(spec: SubTaskSpec, gains: ExpertGains = ExpertGains()) -> Controller:
    """Proportional controller restricted to the sub-task's active dims."""
    full_gain = spec.manoeuvre is ManoeuvreKind.FIXED_ALTITUDE
    g_xy = gains.horizontal if full_gain else gains.centering
    return _controller(frozenset(spec.active_dims), g_xy, gains.vertical)


def combined_expert(gains: ExpertGains = ExpertGains()) -> Controller:
    """Full-authority controller for the composite manoeuvre."""
    return _controller(frozenset(("pitch", "roll", "vertical")),
                       gains.horizontal, gains.vertical)


def zero_policy(_: Observation) -> Action:
    return Action()
