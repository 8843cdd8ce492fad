"""Episode metrics and evaluation setups.

The two headline errors are the time-integrated image-plane centering
distance and the squared spread-radius mismatch, discretized as Riemann sums
scaled by the step size. Per-step means are reported alongside so episode
length does not dominate comparisons.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .camera import project_to_image
from .config import ScenarioConfig
from .episode import Policy, Trajectory, run_episode
from .manoeuvre import ManoeuvreKind, build_manoeuvre
from .safety import Verdict


class SetupId(str, enum.Enum):
    HUMAN_COMBINED = "human-combined"
    DNN_COMBINED = "dnn-combined"
    PRIMITIVE = "primitive"


@dataclass(frozen=True)
class MetricsReport:
    steps: int
    dist_error_integral: float       # sum of L2 centering errors * dt
    dist_step_mean: float
    dist_step_std: float
    dist_sq_step_mean: float         # MSE-style per-step mean
    radius_error_integral: float     # sum of squared radius errors * dt
    radius_sq_step_mean: float
    radius_sq_step_std: float
    coverage: float                  # fraction of steps with all UGVs visible
    invalid_steps: int               # steps carrying held image quantities
    hover_steps: int
    manual_time: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def distance_series(tr: Trajectory) -> np.ndarray:
    """Per-step L2 distance between the image center and the UGV centroid."""
    return np.array([
        float(np.hypot(s.obs.ugv_center[0], s.obs.ugv_center[1]))
        for s in tr.steps])


def radius_series(tr: Trajectory) -> np.ndarray:
    """Per-step squared difference between target and actual spread radii."""
    return np.array([
        (s.obs.target_radius - s.obs.actual_radius) ** 2
        for s in tr.steps])


def distance_error(tr: Trajectory) -> tuple[float, np.ndarray]:
    series = distance_series(tr)
    return float(series.sum() * tr.dt), series


def radius_error(tr: Trajectory) -> tuple[float, np.ndarray]:
    series = radius_series(tr)
    return float(series.sum() * tr.dt), series


def coverage(tr: Trajectory) -> float:
    if not tr.steps:
        return 0.0
    return sum(1 for s in tr.steps if s.obs.all_visible) / len(tr.steps)


def coverage_reprojected(tr: Trajectory, scenario: ScenarioConfig) -> float:
    """Coverage recomputed from logged world states rather than stored
    flags; must agree with coverage() exactly."""
    if not tr.steps:
        return 0.0
    cam = scenario.build_camera()
    ok = 0
    for s in tr.steps:
        w = s.world
        ok += all(project_to_image(cam, w.uav_pos, w.uav_heading, p)[2]
                  for p in w.ugv_pos)
    return ok / len(tr.steps)


def episode_report(tr: Trajectory) -> MetricsReport:
    d_int, d_series = distance_error(tr)
    r_int, r_series = radius_error(tr)
    n = len(tr.steps)
    return MetricsReport(
        steps=n,
        dist_error_integral=d_int,
        dist_step_mean=float(d_series.mean()) if n else 0.0,
        dist_step_std=float(d_series.std()) if n else 0.0,
        dist_sq_step_mean=float((d_series ** 2).mean()) if n else 0.0,
        radius_error_integral=r_int,
        radius_sq_step_mean=float(r_series.mean()) if n else 0.0,
        radius_sq_step_std=float(r_series.std()) if n else 0.0,
        coverage=coverage(tr),
        invalid_steps=sum(1 for s in tr.steps if not s.obs.valid),
        hover_steps=sum(1 for s in tr.steps if s.verdict is Verdict.HOVER),
        manual_time=tr.dt * sum(1 for s in tr.steps if s.verdict is Verdict.MANUAL),
    )


AGGREGATE_FIELDS = (
    "dist_error_integral", "dist_step_mean", "dist_sq_step_mean",
    "radius_error_integral", "radius_sq_step_mean", "coverage",
)


def aggregate(reports: list[MetricsReport]) -> dict[str, tuple[float, float]]:
    """Mean and (population) standard deviation per metric across episodes."""
    if not reports:
        raise ValueError("no episode reports to aggregate")
    out = {}
    for name in AGGREGATE_FIELDS:
        values = np.array([getattr(r, name) for r in reports], dtype=np.float64)
        out[name] = (float(values.mean()), float(values.std()))
    return out


@dataclass
class SetupResult:
    setup: SetupId
    reports: list[MetricsReport]
    summary: dict[str, tuple[float, float]]
    trajectories: list[Trajectory]

    def to_dict(self) -> dict:
        return {
            "setup": self.setup.value,
            "episodes": [r.to_dict() for r in self.reports],
            "summary": {k: {"mean": m, "std": s} for k, (m, s) in self.summary.items()},
        }


def evaluate_policy(
    policy: Policy,
    scenario: ScenarioConfig,
    n_runs: int,
    seed: int,
    setup: SetupId,
    policy_id: str = "",
    kind: ManoeuvreKind = ManoeuvreKind.COMBINED,
) -> SetupResult:
    """Run n seeded random cases of the manoeuvre and aggregate the errors."""
    reports, trajectories = [], []
    for i in range(n_runs):
        spec = build_manoeuvre(kind, scenario.bounds, seed + i,
                               scenario.build_manoeuvre_params())
        tr = run_episode(policy, spec, scenario, seed=seed + i,
                         policy_id=policy_id, max_phase_jitter=2.0)
        trajectories.append(tr)
        reports.append(episode_report(tr))
    return SetupResult(setup=setup, reports=reports,
                       summary=aggregate(reports), trajectories=trajectories)


def evaluate_sessions(sessions: list[Trajectory], setup: SetupId) -> SetupResult:
    """Metrics over previously recorded trajectories (the human pathway)."""
    if not sessions:
        raise ValueError("no recorded sessions supplied")
    reports = [episode_report(tr) for tr in sessions]
    return SetupResult(setup=setup, reports=reports,
                       summary=aggregate(reports), trajectories=list(sessions))


def summary_table(result: SetupResult) -> str:
    lines = [f"setup: {result.setup.value} ({len(result.reports)} episodes)"]
    for name, (mean, std) in result.summary.items():
        lines.append(f"  {name:24s} {mean:12.6g} +/- {std:.6g}")
    return "\n".join(lines)


def export_series(tr: Trajectory, path) -> None:
    """Columnar time series for external plotting."""
    d = distance_series(tr)
    r = radius_series(tr)
    with open(path, "w", encoding="utf-8") as f:
        f.write("t dist_err radius_sq_err uav_x uav_y uav_z "
                "ugv_center_u ugv_center_v target_radius actual_radius\n")
        for i, s in enumerate(tr.steps):
            w, o = s.world, s.obs
            f.write(f"{s.t:.6f} {d[i]:.9g} {r[i]:.9g} "
                    f"{w.uav_pos[0]:.9g} {w.uav_pos[1]:.9g} {w.uav_pos[2]:.9g} "
                    f"{o.ugv_center[0]:.9g} {o.ugv_center[1]:.9g} "
                    f"{o.target_radius:.9g} {o.actual_radius:.9g}\n")
