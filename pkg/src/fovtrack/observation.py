"""Construction of the 11-D policy observation.

Layout, in order: UAV image center (always the origin for the downward
camera), visible-UGV centroid in the image, altitude, target and actual
formation spread radii in image units, then the normalized velocity vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import CameraModel, project_to_image
from .world import DynamicsParams, WorldState

OBSERVATION_DIM = 11


@dataclass(frozen=True)
class Observation:
    ugv_center: tuple[float, float]
    altitude: float
    target_radius: float
    actual_radius: float
    velocity: tuple[float, float, float, float]  # normalized to [-1, 1]
    valid: bool
    visible: tuple[bool, bool, bool]

    def vector(self) -> np.ndarray:
        """The 11 numbers the policy consumes, Table-layout order."""
        return np.array([
            0.0, 0.0,
            self.ugv_center[0], self.ugv_center[1],
            self.altitude,
            self.target_radius, self.actual_radius,
            *self.velocity,
        ], dtype=np.float64)

    @property
    def all_visible(self) -> bool:
        return all(self.visible)


def build_observation(
    world: WorldState,
    cam: CameraModel,
    target_radius: float,
    params: DynamicsParams = DynamicsParams(),
    fallback: Observation | None = None,
) -> Observation:
    """Project the UGVs and assemble the observation.

    When no UGV is in the field of view the last valid image quantities are
    held (from `fallback`) and the validity flag drops, so the policy always
    receives 11 finite numbers.
    """
    projections = [
        project_to_image(cam, world.uav_pos, world.uav_heading, p)
        for p in world.ugv_pos
    ]
    visible = tuple(vis for _, _, vis in projections)
    in_view = [(u, v) for u, v, vis in projections if vis]

    vel = (
        world.uav_vel[0] / params.v_max_xy,
        world.uav_vel[1] / params.v_max_xy,
        world.uav_vel[2] / params.v_max_z,
        world.uav_vel[3] / params.v_max_yaw,
    )

    if in_view:
        cx = sum(u for u, _ in in_view) / len(in_view)
        cy = sum(v for _, v in in_view) / len(in_view)
        spread = max(math.hypot(u - cx, v - cy) for u, v in in_view)
        return Observation(
            ugv_center=(cx, cy), altitude=world.uav_pos[2],
            target_radius=target_radius, actual_radius=spread,
            velocity=vel, valid=True, visible=visible,
        )

    if fallback is not None:
        held_center, held_spread = fallback.ugv_center, fallback.actual_radius
    else:
        held_center, held_spread = (0.0, 0.0), 0.0
    return Observation(
        ugv_center=held_center, altitude=world.uav_pos[2],
        target_radius=target_radius, actual_radius=held_spread,
        velocity=vel, valid=False, visible=visible,
    )
