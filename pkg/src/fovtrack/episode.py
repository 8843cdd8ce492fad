"""Closed-loop episode execution and trajectory archives.

One episode is observe -> policy -> arbitrate -> step, repeated for the
manoeuvre's duration. Start pose and manoeuvre phase are randomized from the
seed, so runs are reproducible case by case.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .config import ScenarioConfig
from .dataset import DemoSet, Sample, SubTaskSpec, record_stream
from .experts import ExpertGains, combined_expert, scripted_expert
from .manoeuvre import ManoeuvreKind, ManoeuvreSpec, build_manoeuvre
from .observation import Observation, build_observation
from .safety import Arbiter, OverrideCommand, Verdict, arbitrate_ugv
from .world import Action, WorldState, initial_world, step_world

Policy = Callable[[Observation], Action]

TRAJECTORY_FORMAT = "fovtrack-trajectory"
TRAJECTORY_VERSION = 1


class PolicyFault(RuntimeError):
    """Policy produced non-finite action components."""


@dataclass(frozen=True)
class StepRecord:
    t: float
    world: WorldState
    obs: Observation
    proposed: Action
    action: Action
    verdict: Verdict
    unsafe: int
    margin_id: str | None
    predicted: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass
class Trajectory:
    steps: list[StepRecord]
    dt: float
    manoeuvre: str
    policy_id: str
    seed: int
    aborted: bool = False

    def __len__(self) -> int:
        return len(self.steps)


def run_episode(
    policy: Policy,
    spec: ManoeuvreSpec,
    scenario: ScenarioConfig,
    seed: int,
    override_provider: Callable[[float], OverrideCommand] | None = None,
    policy_id: str = "",
    max_phase_jitter: float = 0.0,
    abort_on_fault: bool = False,
) -> Trajectory:
    """Run the policy on one manoeuvre under safety arbitration."""
    rng = np.random.default_rng(seed)
    cam = scenario.build_camera()
    params = scenario.build_dynamics()
    safety = scenario.build_safety()
    arbiter = Arbiter(safety, params)
    dt = scenario.dt

    t0 = float(rng.uniform(0.0, max_phase_jitter)) if max_phase_jitter > 0 else 0.0
    cx, cy = spec.centroid_at(t0)
    jx = float(rng.uniform(-0.2, 0.2))
    jy = float(rng.uniform(-0.2, 0.2))
    z_eq = scenario.equilibrium_altitude(spec.scale_at(t0))
    z0 = z_eq * (1.0 + float(rng.uniform(-0.15, 0.15)))
    # The whole formation must start comfortably inside the field of view,
    # or partial-visibility feedback can spiral the controller downward.
    worst = spec.centroid_spread(t0) + float(np.hypot(jx, jy))
    z_visible = cam.focal * worst / (0.9 * cam.image_extent)
    z0 = max(z0, z_visible)
    z0 = min(max(z0, safety.z_min + safety.margin + 0.05),
             safety.z_max - safety.margin - 0.05)
    world = initial_world(spec, (cx + jx, cy + jy, z0), t0=t0)

    n_steps = int(round((spec.duration - t0) / dt))
    steps: list[StepRecord] = []
    prev_obs: Observation | None = None
    aborted = False

    for _ in range(n_steps):
        obs = build_observation(world, cam, scenario.target_radius, params,
                                fallback=prev_obs)
        proposed = policy(obs)
        if not proposed.is_finite():
            if abort_on_fault:
                raise PolicyFault(f"non-finite action at t={world.t:.3f}")
            aborted = True
            break
        if override_provider is not None:
            arbiter.set_override(override_provider(world.t))
        decision = arbiter.decide(proposed, world, dt)
        steps.append(StepRecord(
            t=world.t, world=world, obs=obs, proposed=proposed,
            action=decision.action, verdict=decision.verdict,
            unsafe=decision.unsafe, margin_id=decision.margin_id,
            predicted=decision.predicted))
        world = step_world(world, decision.action, dt, spec, params)
        if safety.obstacles:
            world = _freeze_unsafe_ugvs(world, steps[-1].world, safety)
        prev_obs = obs

    return Trajectory(steps=steps, dt=dt, manoeuvre=spec.kind.value,
                      policy_id=policy_id, seed=seed, aborted=aborted)


def _freeze_unsafe_ugvs(world: WorldState, prev: WorldState, safety) -> WorldState:
    held = []
    changed = False
    for now, before in zip(world.ugv_pos, prev.ugv_pos):
        effective, stopped = arbitrate_ugv(before, now, safety)
        held.append(effective)
        changed = changed or stopped
    return replace(world, ugv_pos=tuple(held)) if changed else world


# ---------------------------------------------------------------------------
# Demonstration recording
# ---------------------------------------------------------------------------

def demo_samples(tr: Trajectory, tag: str, episode: int):
    """Per-step (state, executed action) pairs of a trajectory."""
    for step in tr.steps:
        yield Sample(t=step.t, state=step.obs.vector(),
                     action=np.array(step.action.as_tuple()),
                     subtask_tag=tag, episode=episode)


def with_actuation_noise(policy: Policy, sigma: float, rng,
                         active: tuple[int, ...] = (0, 1, 2, 3)) -> Policy:
    """Seeded stick jitter on the given channels, like a human operator's
    hand; keeps the other channels untouched (exactly zero for sub-tasks)."""
    if sigma <= 0:
        return policy

    def noisy(obs: Observation) -> Action:
        vals = list(policy(obs).as_tuple())
        for i in active:
            vals[i] = vals[i] + sigma * float(rng.standard_normal())
        return Action(*vals).clamped()

    return noisy


def record_demos(
    subtask: SubTaskSpec,
    scenario: ScenarioConfig,
    episodes: int,
    seed: int,
    gains: ExpertGains | None = None,
) -> tuple[DemoSet, list[Trajectory]]:
    """Fly the scripted expert on seeded variants of its sub-task manoeuvre.

    Demonstrations carry seeded actuation noise on the sub-task's active
    channels: the expert stands in for a human operator, and the label noise
    is what gives the behavioral-cloning loss its floor.
    """
    if gains is None:
        e = scenario.expert
        gains = ExpertGains(horizontal=e.horizontal_gain, vertical=e.vertical_gain,
                            centering=e.centering_gain)
    controller = scripted_expert(subtask, gains)
    samples: list[Sample] = []
    trajectories: list[Trajectory] = []
    for ep in range(episodes):
        spec = build_manoeuvre(subtask.manoeuvre, scenario.bounds, seed + ep,
                               scenario.build_manoeuvre_params())
        noise_rng = np.random.default_rng((seed + ep, 977))
        policy = with_actuation_noise(controller, scenario.expert.demo_noise,
                                      noise_rng, subtask.active_indices)
        tr = run_episode(policy, spec, scenario, seed=seed + ep,
                         policy_id=f"scripted:{subtask.tag}")
        trajectories.append(tr)
        samples.extend(demo_samples(tr, subtask.tag, ep))
    demo = record_stream(samples, scenario.dt, subtask.manoeuvre.value,
                         "scripted", subtask)
    return demo, trajectories


def record_combined_demos(
    scenario: ScenarioConfig,
    episodes: int,
    seed: int,
    gains: ExpertGains | None = None,
) -> tuple[DemoSet, list[Trajectory]]:
    """Full-authority demonstrations on the composite manoeuvre (the
    traditional single-task cloning baseline)."""
    if gains is None:
        e = scenario.expert
        gains = ExpertGains(horizontal=e.horizontal_gain, vertical=e.vertical_gain,
                            centering=e.centering_gain)
    controller = combined_expert(gains)
    samples: list[Sample] = []
    trajectories: list[Trajectory] = []
    for ep in range(episodes):
        spec = build_manoeuvre(ManoeuvreKind.COMBINED, scenario.bounds, seed + ep,
                               scenario.build_manoeuvre_params())
        noise_rng = np.random.default_rng((seed + ep, 978))
        policy = with_actuation_noise(controller, scenario.expert.demo_noise,
                                      noise_rng, (0, 1, 2))
        tr = run_episode(policy, spec, scenario, seed=seed + ep,
                         policy_id="scripted:combined")
        trajectories.append(tr)
        samples.extend(demo_samples(tr, "combined", ep))
    demo = record_stream(samples, scenario.dt, ManoeuvreKind.COMBINED.value,
                         "scripted", None)
    return demo, trajectories


# ---------------------------------------------------------------------------
# Trajectory archive: JSON header plus one line per step. Decimal text with
# 17 significant digits makes replays byte-identical across runs.
# ---------------------------------------------------------------------------

def dumps_trajectory(tr: Trajectory) -> str:
    header = {
        "format": TRAJECTORY_FORMAT,
        "version": TRAJECTORY_VERSION,
        "dt": tr.dt,
        "manoeuvre": tr.manoeuvre,
        "policy_id": tr.policy_id,
        "seed": tr.seed,
        "aborted": tr.aborted,
        "steps": len(tr.steps),
    }
    lines = [json.dumps(header, sort_keys=True)]
    for s in tr.steps:
        w, o = s.world, s.obs
        nums = [
            s.t,
            *w.uav_pos, w.uav_heading, *w.uav_vel,
            *(c for p in w.ugv_pos for c in p), w.manoeuvre_phase,
            *o.vector().tolist(),
            *s.proposed.as_tuple(), *s.action.as_tuple(), *s.predicted,
        ]
        flags = [int(o.valid), *(int(v) for v in o.visible), s.unsafe]
        lines.append(" ".join(
            [f"{x:.17g}" for x in nums]
            + [str(f) for f in flags]
            + [s.verdict.value, s.margin_id if s.margin_id else "-"]))
    return "\n".join(lines) + "\n"


def save_trajectory(tr: Trajectory, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_trajectory(tr))


def loads_trajectory(text: str) -> Trajectory:
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty trajectory archive")
    header = json.loads(lines[0])
    if header.get("format") != TRAJECTORY_FORMAT:
        raise ValueError("not a trajectory archive")
    if header.get("version") != TRAJECTORY_VERSION:
        raise ValueError(f"unsupported trajectory version {header.get('version')}")
    steps = []
    for line in lines[1:]:
        tok = line.split()
        if len(tok) != 45:
            raise ValueError(f"trajectory line has {len(tok)} fields, expected 45")
        nums = [float(x) for x in tok[:38]]
        valid, v1, v2, v3, unsafe = (int(x) for x in tok[38:43])
        verdict = Verdict(tok[43])
        margin_id = None if tok[44] == "-" else tok[44]
        world = WorldState(
            t=nums[0], uav_pos=(nums[1], nums[2], nums[3]), uav_heading=nums[4],
            uav_vel=(nums[5], nums[6], nums[7], nums[8]),
            ugv_pos=((nums[9], nums[10]), (nums[11], nums[12]), (nums[13], nums[14])),
            manoeuvre_phase=nums[15])
        vec = nums[16:27]
        obs = Observation(
            ugv_center=(vec[2], vec[3]), altitude=vec[4],
            target_radius=vec[5], actual_radius=vec[6],
            velocity=(vec[7], vec[8], vec[9], vec[10]),
            valid=bool(valid), visible=(bool(v1), bool(v2), bool(v3)))
        proposed = Action(*nums[27:31])
        action = Action(*nums[31:35])
        steps.append(StepRecord(
            t=nums[0], world=world, obs=obs, proposed=proposed, action=action,
            verdict=verdict, unsafe=unsafe, margin_id=margin_id,
            predicted=(nums[35], nums[36], nums[37])))
    if len(steps) != int(header["steps"]):
        raise ValueError("trajectory step count disagrees with its header")
    return Trajectory(
        steps=steps, dt=float(header["dt"]), manoeuvre=str(header["manoeuvre"]),
        policy_id=str(header["policy_id"]), seed=int(header["seed"]),
        aborted=bool(header["aborted"]))


def load_trajectory(path) -> Trajectory:
    with open(path, "r", encoding="utf-8") as f:
        return loads_trajectory(f.read())
