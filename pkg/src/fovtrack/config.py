"""Scenario configuration: environment presets, physics and camera constants,
manoeuvre programs, safety layout, and recording schedule.

Configs load from YAML, validate strictly (unknown keys are rejected), and
fingerprint to a stable hash that is embedded in every artifact produced from
them, so datasets, models, and reports can be traced to their exact setup.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, fields, is_dataclass
from typing import Any

import yaml

from .camera import CameraModel
from .manoeuvre import ManoeuvreParams
from .safety import Rect, SafetyConfig
from .world import DynamicsParams

ENV_CONFIG_VAR = "FOVTRACK_CONFIG"

# Arena presets: the simulation arena and the indoor test volume whose safe
# area spans x in [-3.3, 3.3] and y in [-2.5, 2.5].
PRESETS: dict[str, tuple[float, float, float, float]] = {
    "sim": (-5.0, 5.0, -5.0, 5.0),
    "lab": (-3.3, 3.3, -2.5, 2.5),
}


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


@dataclass(frozen=True)
class CameraSettings:
    focal: float = 1.0
    half_fov_deg: float = 32.0

    def __post_init__(self):
        if self.focal <= 0:
            raise ConfigError("camera focal must be positive")
        if not 0.0 < self.half_fov_deg < 90.0:
            raise ConfigError("camera half_fov_deg must lie in (0, 90)")


@dataclass(frozen=True)
class SafetySettings:
    margin: float = 0.3
    z_min: float = 0.3
    z_max: float = 3.0
    lookahead_steps: int = 1
    staleness_window: float = 1.0
    obstacles: tuple[tuple[float, float, float, float], ...] = ()

    def __post_init__(self):
        if self.margin < 0:
            raise ConfigError("safety margin must be nonnegative")
        if self.z_min >= self.z_max:
            raise ConfigError("altitude band must satisfy z_min < z_max")
        if self.lookahead_steps < 1:
            raise ConfigError("lookahead_steps must be at least 1")
        for o in self.obstacles:
            if len(o) != 4 or o[0] >= o[1] or o[2] >= o[3]:
                raise ConfigError(f"malformed obstacle rectangle {o}")


@dataclass(frozen=True)
class ExpertSettings:
    horizontal_gain: float = 1.8
    vertical_gain: float = 6.0
    centering_gain: float = 0.9
    strict_orthogonal: bool = False
    demo_noise: float = 0.06   # actuation jitter while demonstrating, stick units

    def __post_init__(self):
        if min(self.horizontal_gain, self.vertical_gain, self.centering_gain) <= 0:
            raise ConfigError("expert gains must be positive")
        if self.demo_noise < 0:
            raise ConfigError("demo_noise must be nonnegative")


@dataclass(frozen=True)
class RecordingSettings:
    fixed_altitude_episodes: int = 5
    primitive_episodes: int = 10

    def __post_init__(self):
        if min(self.fixed_altitude_episodes, self.primitive_episodes) < 1:
            raise ConfigError("episode counts must be at least 1")


@dataclass(frozen=True)
class ManoeuvreSettings:
    formation_radius: float = 0.5
    centroid_speed: float = 0.18
    scale_high: float = 1.6
    scale_low: float = 0.75
    primitive_duration: float = 25.0
    fixed_duration: float = 50.0

    def __post_init__(self):
        values = (self.formation_radius, self.centroid_speed, self.scale_high,
                  self.scale_low, self.primitive_duration, self.fixed_duration)
        if min(values) <= 0:
            raise ConfigError("manoeuvre settings must be positive")
        if self.scale_low >= self.scale_high:
            raise ConfigError("scale_low must be below scale_high")


@dataclass(frozen=True)
class ScenarioConfig:
    preset: str = "sim"
    dt: float = 0.05
    tau: float = 0.5
    v_max_xy: float = 1.0
    v_max_z: float = 0.5
    v_max_yaw: float = 0.5
    target_radius_scale: float = 0.55  # target image radius as a fraction of the extent
    stream_rate: float = 20.0
    seed: int = 0
    camera: CameraSettings = CameraSettings()
    safety: SafetySettings = SafetySettings()
    expert: ExpertSettings = ExpertSettings()
    recording: RecordingSettings = RecordingSettings()
    manoeuvre: ManoeuvreSettings = ManoeuvreSettings()

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        if self.dt <= 0 or self.tau <= 0:
            raise ConfigError("dt and tau must be positive")
        if self.dt >= 2 * self.tau:
            raise ConfigError("dt must be below 2*tau for stable braking prediction")
        if not 0 < self.target_radius_scale < 1:
            raise ConfigError("target_radius_scale must lie in (0, 1)")
        if self.stream_rate <= 0:
            raise ConfigError("stream_rate must be positive")

    # -- derived objects ----------------------------------------------------

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return PRESETS[self.preset]

    def build_camera(self) -> CameraModel:
        return CameraModel(focal=self.camera.focal,
                           half_fov=math.radians(self.camera.half_fov_deg))

    def build_dynamics(self) -> DynamicsParams:
        return DynamicsParams(v_max_xy=self.v_max_xy, v_max_z=self.v_max_z,
                              v_max_yaw=self.v_max_yaw, tau=self.tau)

    def build_safety(self) -> SafetyConfig:
        s = self.safety
        return SafetyConfig(
            bounds=Rect(*self.bounds),
            obstacles=tuple(Rect(*o) for o in s.obstacles),
            margin=s.margin, z_min=s.z_min, z_max=s.z_max,
            lookahead_steps=s.lookahead_steps,
            staleness_window=s.staleness_window)

    def build_manoeuvre_params(self) -> ManoeuvreParams:
        m = self.manoeuvre
        return ManoeuvreParams(
            formation_radius=m.formation_radius, centroid_speed=m.centroid_speed,
            scale_high=m.scale_high, scale_low=m.scale_low,
            primitive_duration=m.primitive_duration, fixed_duration=m.fixed_duration)

    @property
    def target_radius(self) -> float:
        return self.target_radius_scale * self.build_camera().image_extent

    def equilibrium_altitude(self, scale: float = 1.0) -> float:
        """Altitude at which the formation's image spread equals the target."""
        cam = self.build_camera()
        spread = self.manoeuvre.formation_radius * scale
        return cam.focal * spread / self.target_radius

    def input_scale(self) -> list[float]:
        """Per-component multiplier normalizing observations for the network."""
        s = [1.0] * 11
        s[4] = 1.0 / self.safety.z_max
        return s

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["safety"]["obstacles"] = [list(o) for o in self.safety.obstacles]
        return d

    def fingerprint(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _build_section(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    allowed = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = allowed[name]
        if is_dataclass(f.default) and isinstance(value, dict):
            kwargs[name] = _build_section(f.default.__class__, value, f"{path}.{name}")
        elif name == "obstacles":
            kwargs[name] = tuple(tuple(float(x) for x in o) for o in value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{path}: {e}") from e


def scenario_from_dict(data: dict) -> ScenarioConfig:
    return _build_section(ScenarioConfig, data or {}, "scenario")


def load_scenario(path: str | None = None) -> ScenarioConfig:
    """Load a scenario file; with no path, honor the env var, else defaults."""
    if path is None:
        path = os.environ.get(ENV_CONFIG_VAR)
    if path is None:
        return ScenarioConfig()
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f)
    if data is None:
        return ScenarioConfig()
    return scenario_from_dict(data)


def save_scenario(cfg: ScenarioConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(cfg.to_dict(), f, sort_keys=True)
