"""Gate criteria for the whole artifact, one printed verdict per criterion.

Run `pytest tests/test_acceptance.py -v -s` to see the verdict lines. The
paper-scale pipeline (full-size demonstrations, 10,000-epoch full-batch
training) runs once in a session fixture and is shared by the last criteria;
expect the module to take roughly 20-25 minutes on two cores.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from fovtrack.camera import (CameraModel, enclosing_circle, project_to_image,
                             unproject_from_image)
from fovtrack.config import ScenarioConfig
from fovtrack.dataset import fuse, split, standard_subtasks
from fovtrack.episode import record_combined_demos, record_demos, run_episode
from fovtrack.evaluator import (SetupId, aggregate, distance_error,
                                episode_report, evaluate_policy, radius_error)
from fovtrack.experts import combined_expert
from fovtrack.manoeuvre import build_manoeuvre
from fovtrack.network import (TrainConfig, forward, init_model, loss_and_grad,
                              policy_from_model, train)
from fovtrack.safety import (AUTONOMOUS, Rect, SafetyConfig, arbitrate,
                             check_unsafe, classify_unsafe)
from fovtrack.world import Action, initial_world, step_world

from test_camera import brute_force_circle
from test_safety import oracle_unsafe, random_layout


def gate(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# Safety criteria
# ---------------------------------------------------------------------------

def test_safety_soundness_fuzz():
    """10,000 seeded episodes of adversarial actions under arbitration:
    no visited position may ever trip the margin predicate."""
    rng = np.random.default_rng(815)
    scenario = ScenarioConfig()
    params = scenario.build_dynamics()
    spec = build_manoeuvre("fixed_altitude", scenario.bounds, 0,
                           scenario.build_manoeuvre_params())
    presets = (Rect(-5, 5, -5, 5), Rect(-3.3, 3.3, -2.5, 2.5))
    dt = scenario.dt
    episodes = 10_000
    violations = 0
    steps = 0
    t0 = time.perf_counter()
    for ep in range(episodes):
        bounds = presets[ep % 2]
        cfg = SafetyConfig(bounds=bounds, obstacles=random_layout(rng, bounds),
                           margin=float(rng.uniform(0.05, 0.5)))
        for _ in range(100):
            x = rng.uniform(bounds.x_min, bounds.x_max)
            y = rng.uniform(bounds.y_min, bounds.y_max)
            z = rng.uniform(cfg.z_min + cfg.margin + 0.01,
                            cfg.z_max - cfg.margin - 0.01)
            if classify_unsafe((x, y), z, cfg) is None:
                break
        else:
            continue
        world = initial_world(spec, (x, y, z))
        for _ in range(60):
            action = Action(*rng.uniform(-1, 1, 4))
            decision = arbitrate(action, world, cfg, AUTONOMOUS, dt, params)
            world = step_world(world, decision.action, dt, spec, params)
            steps += 1
            p = (world.uav_pos[0], world.uav_pos[1])
            if check_unsafe(p, cfg) or classify_unsafe(p, world.uav_pos[2], cfg):
                violations += 1
    elapsed = time.perf_counter() - t0
    gate("safety soundness fuzz",
         violations == 0 and elapsed < 300.0,
         f"{violations} violations over {episodes} episodes / {steps} steps "
         f"in {elapsed:.1f}s (target < 300s)")


def test_margin_predicate_oracle_equivalence():
    """The margin predicate matches an independently written
    inflate-then-contain oracle on one million random triples, exactly."""
    rng = np.random.default_rng(1889)
    scenario = ScenarioConfig()
    bounds = Rect(*scenario.bounds)
    disagreements = 0
    total = 0
    t0 = time.perf_counter()
    for _ in range(10_000):
        obstacles = random_layout(rng, bounds)
        for _ in range(100):
            cfg = SafetyConfig(bounds=bounds, obstacles=obstacles,
                               margin=float(rng.uniform(0.0, 0.8)))
            p = (float(rng.uniform(-6, 6)), float(rng.uniform(-6, 6)))
            if check_unsafe(p, cfg) != oracle_unsafe(p, cfg):
                disagreements += 1
            total += 1
    elapsed = time.perf_counter() - t0
    gate("margin predicate oracle equivalence",
         disagreements == 0 and total == 1_000_000,
         f"{disagreements} disagreements over {total} triples in {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# Learner criteria
# ---------------------------------------------------------------------------

def _loss_only(model, x, a):
    y = forward(model, x)
    return float(np.mean((y - a) ** 2))


def _conditioned_net(seed, margin=1e-4):
    """Small random net + batch with hidden preactivations clear of the relu
    kink, where central differences are a valid derivative oracle."""
    rng = np.random.default_rng(seed)
    while True:
        dims = tuple(int(d) for d in rng.integers(2, 7, size=rng.integers(3, 5)))
        model = init_model(dims, seed=int(rng.integers(1 << 31)), init_scale=0.5)
        for b in model.biases:
            b[:] = rng.normal(0, 0.3, b.shape)
        x = rng.normal(0, 1.0, (int(rng.integers(2, 9)), dims[0]))
        a = np.tanh(rng.normal(0, 0.7, (x.shape[0], dims[-1])))
        h = x * model.input_scale
        clear = True
        for w, b in zip(model.weights[:-1], model.biases[:-1]):
            z = h @ w + b
            clear &= bool(np.min(np.abs(z)) > margin)
            h = np.maximum(z, 0)
        if clear:
            return model, x, a


def _conditioned_batch(model, net_idx, batch_idx, margin=1e-4):
    """Batch whose hidden preactivations clear the relu kink on this net."""
    for k in range(1000):
        rng = np.random.default_rng((net_idx, batch_idx, k))
        x = rng.normal(0, 1.0, (6, model.dims[0]))
        a = np.tanh(rng.normal(0, 0.7, (6, model.dims[-1])))
        h = x * model.input_scale
        clear = True
        for w, b in zip(model.weights[:-1], model.biases[:-1]):
            z = h @ w + b
            clear &= bool(np.min(np.abs(z)) > margin)
            h = np.maximum(z, 0)
        if clear:
            return x, a
    raise AssertionError("could not condition a batch away from relu kinks")


def test_gradient_check():
    """Analytic gradients against central finite differences: 50 random
    small nets x 10 batches, every parameter, relative error < 1e-5."""
    h = 1e-5
    worst = 0.0
    t0 = time.perf_counter()
    for net_idx in range(50):
        model, _, _ = _conditioned_net(10_000 + net_idx)
        for batch_idx in range(10):
            x, a = _conditioned_batch(model, net_idx, batch_idx)
            _, (gw, gb) = loss_and_grad(model, x, a)
            gw = [g.copy() for g in gw]
            gb = [g.copy() for g in gb]
            # relative to the batch gradient scale: components far below it
            # sit under the oracle's own roundoff/truncation noise floor
            g_max = max(float(np.max(np.abs(g))) for g in (*gw, *gb))
            floor = max(1e-8, 1e-3 * g_max)
            for params, grads in ((model.weights, gw), (model.biases, gb)):
                for p, g in zip(params, grads):
                    for idx in np.ndindex(p.shape):
                        orig = p[idx]
                        p[idx] = orig + h
                        up = _loss_only(model, x, a)
                        p[idx] = orig - h
                        down = _loss_only(model, x, a)
                        p[idx] = orig
                        fd = (up - down) / (2 * h)
                        err = abs(fd - g[idx]) / max(abs(fd) + abs(g[idx]), floor)
                        worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    gate("gradient check",
         worst < 1e-5 and elapsed < 60.0,
         f"max relative error {worst:.3e} over 50 nets x 10 batches "
         f"in {elapsed:.1f}s (target < 60s)")


def test_training_determinism_and_capacity():
    rng = np.random.default_rng(99)
    x = rng.normal(0, 0.4, (64, 11))
    a = np.tanh(rng.normal(0, 0.5, (64, 4)))
    cfg = TrainConfig(epochs=150, seed=5)
    from fovtrack.network import train_arrays
    r1 = train_arrays(x, a, cfg)
    r2 = train_arrays(x, a, cfg)
    identical = all(np.array_equal(w1, w2) for w1, w2 in
                    zip(r1.model.weights, r2.model.weights))
    identical &= all(np.array_equal(b1, b2) for b1, b2 in
                     zip(r1.model.biases, r2.model.biases))

    xo = rng.normal(0, 0.4, (10, 11))
    ao = rng.uniform(-0.8, 0.8, (10, 4))
    overfit = train_arrays(xo, ao, TrainConfig(epochs=10_000, seed=3))
    final = float(overfit.train_loss[-1])
    gate("training determinism and capacity",
         identical and final < 1e-6,
         f"bit-identical rerun: {identical}; 10-sample overfit mse {final:.2e} "
         f"(< 1e-6 within 10,000 epochs)")


# ---------------------------------------------------------------------------
# Geometry criteria
# ---------------------------------------------------------------------------

def test_pinhole_and_enclosing_circle_oracles():
    cam = CameraModel()
    rng = np.random.default_rng(2718)
    worst_rt = 0.0
    t0 = time.perf_counter()
    for _ in range(100_000):
        pose = (rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.1, 3.0))
        heading = rng.uniform(-math.pi, math.pi)
        point = (rng.uniform(-5, 5), rng.uniform(-5, 5))
        u, v, _ = project_to_image(cam, pose, heading, point)
        dx, dy = unproject_from_image(cam, pose, heading, (u, v))
        worst_rt = max(worst_rt,
                       abs(pose[0] + dx - point[0]),
                       abs(pose[1] + dy - point[1]))

    worst_circle = 0.0
    for _ in range(10_000):
        pts = [tuple(rng.uniform(-10, 10, 2)) for _ in range(3)]
        _, radius = enclosing_circle(pts)
        _, r_ref = brute_force_circle(pts)
        worst_circle = max(worst_circle, abs(radius - r_ref))
    elapsed = time.perf_counter() - t0
    gate("pinhole and enclosing-circle oracles",
         worst_rt < 1e-9 and worst_circle < 1e-9,
         f"round-trip err {worst_rt:.2e} over 1e5 poses; circle err "
         f"{worst_circle:.2e} over 1e4 triples; {elapsed:.1f}s")


def test_metric_oracle():
    """Evaluator accumulations equal a brute-force re-summation of the
    logged trajectory, to 1e-12."""
    scenario = ScenarioConfig()
    spec = build_manoeuvre("combined", scenario.bounds, seed=31,
                           params=scenario.build_manoeuvre_params())
    tr = run_episode(combined_expert(), spec, scenario, seed=31,
                     max_phase_jitter=1.0)
    d_val, _ = distance_error(tr)
    r_val, _ = radius_error(tr)
    d_ref = 0.0
    r_ref = 0.0
    for s in tr.steps:
        d_ref += math.hypot(s.obs.ugv_center[0], s.obs.ugv_center[1]) * tr.dt
        r_ref += (s.obs.target_radius - s.obs.actual_radius) ** 2 * tr.dt
    report = episode_report(tr)
    summary = aggregate([report, report, report])
    mean_ok = abs(summary["dist_step_mean"][0] - report.dist_step_mean) < 1e-12
    std_ok = summary["dist_step_mean"][1] == 0.0
    gate("metric oracle",
         abs(d_val - d_ref) < 1e-12 and abs(r_val - r_ref) < 1e-12
         and mean_ok and std_ok,
         f"|dd| {abs(d_val - d_ref):.2e}, |dnu| {abs(r_val - r_ref):.2e} over "
         f"{len(tr.steps)} steps; aggregation exact")


# ---------------------------------------------------------------------------
# Paper-scale pipeline (shared fixture)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def paper_pipeline():
    scenario = ScenarioConfig()
    t0 = time.perf_counter()
    sets = []
    gate_details = []
    for st in standard_subtasks(scenario.expert.strict_orthogonal):
        episodes = (scenario.recording.fixed_altitude_episodes
                    if st.tag == "fixed_altitude"
                    else scenario.recording.primitive_episodes)
        demo, trajectories = record_demos(st, scenario, episodes,
                                          seed=100 + st.task_id * 1000)
        worst = min(episode_report(tr).coverage for tr in trajectories)
        gate_details.append(f"{st.tag}:{len(demo)} samples cov {worst:.3f}")
        assert worst == 1.0, f"data-quality gate failed for {st.tag}"
        sets.append(demo)
    composite = fuse(sets)
    record_time = time.perf_counter() - t0

    train_set, val_set = split(composite, 0.67, seed=scenario.seed)
    cfg = TrainConfig(epochs=10_000, dtype="float32", seed=scenario.seed)
    result = train(train_set, cfg, validation=val_set,
                   input_scale=scenario.input_scale())
    train_time = time.perf_counter() - t0 - record_time
    return {
        "scenario": scenario,
        "sets": sets,
        "composite": composite,
        "result": result,
        "record_time": record_time,
        "train_time": train_time,
        "detail": "; ".join(gate_details),
    }


def test_pipeline_end_to_end(paper_pipeline):
    """The bootstrapping claim at paper scale: sub-task demonstrations only,
    fused and cloned, keep the whole formation in view on the composite
    manoeuvre."""
    p = paper_pipeline
    scenario = p["scenario"]
    sizes = [len(s) for s in p["sets"]]
    assert all(4500 <= n <= 5500 for n in sizes), sizes
    assert len(p["composite"]) == sum(sizes)

    loss = p["result"].train_loss
    plateau_ratio = float(loss[1999] / loss[9999])

    t0 = time.perf_counter()
    policy = policy_from_model(p["result"].model)
    outcome = evaluate_policy(policy, scenario, n_runs=10, seed=5000,
                              setup=SetupId.PRIMITIVE, policy_id="primitive")
    eval_time = time.perf_counter() - t0
    coverages = [r.coverage for r in outcome.reports]
    full = sum(1 for c in coverages if c == 1.0)
    unsafe_steps = sum(s.unsafe for tr in outcome.trajectories for s in tr.steps)
    total = p["record_time"] + p["train_time"] + eval_time

    gate("end-to-end bootstrapping pipeline",
         full >= 9 and min(coverages) >= 0.99
         and plateau_ratio <= 1.05 and unsafe_steps == 0
         and total < 2700.0,
         f"sizes {sizes}; plateau loss[2000]/loss[10000] = {plateau_ratio:.4f} "
         f"(<= 1.05); coverage full on {full}/10, min {min(coverages):.4f}; "
         f"runtime record {p['record_time']:.0f}s + train {p['train_time']:.0f}s "
         f"+ eval {eval_time:.0f}s = {total:.0f}s (target 1800s, ceiling 2700s)")


def test_relative_ordering_reported(paper_pipeline):
    """Soft criterion, reported not gated: sub-task-bootstrapped policy vs
    the policy cloned from composite-task demonstrations, radius error on
    the combined manoeuvre."""
    p = paper_pipeline
    scenario = p["scenario"]
    combined_demo, _ = record_combined_demos(scenario, episodes=10, seed=9000)
    train_set, val_set = split(combined_demo, 0.67, seed=scenario.seed)
    # short mode, justified by the plateau check of the primitive run
    cfg = TrainConfig(epochs=2_000, dtype="float32", seed=scenario.seed)
    combined_result = train(train_set, cfg, validation=val_set,
                            input_scale=scenario.input_scale())

    primitive_policy = policy_from_model(p["result"].model)
    combined_policy = policy_from_model(combined_result.model)
    prim = evaluate_policy(primitive_policy, scenario, 10, seed=5000,
                           setup=SetupId.PRIMITIVE)
    comb = evaluate_policy(combined_policy, scenario, 10, seed=5000,
                           setup=SetupId.DNN_COMBINED)
    prim_err = prim.summary["radius_sq_step_mean"][0]
    comb_err = comb.summary["radius_sq_step_mean"][0]
    ratio = prim_err / comb_err if comb_err > 0 else float("inf")
    ordered = prim_err <= comb_err
    print(f"[REPORT] relative ordering (soft): primitive radius mse "
          f"{prim_err:.3e} vs dnn-combined {comb_err:.3e}; ratio {ratio:.3f}; "
          f"primitive <= combined: {ordered}")
    assert np.isfinite(prim_err) and np.isfinite(comb_err)


def test_transfer_to_lab_preset(paper_pipeline):
    """Model trained on the simulation arena, evaluated in the lab volume:
    no safety violations and the formation stays observable."""
    p = paper_pipeline
    lab = replace(p["scenario"], preset="lab")
    policy = policy_from_model(p["result"].model)
    outcome = evaluate_policy(policy, lab, n_runs=10, seed=7000,
                              setup=SetupId.PRIMITIVE, policy_id="transfer")
    unsafe_steps = sum(s.unsafe for tr in outcome.trajectories for s in tr.steps)
    margin_hits = sum(1 for tr in outcome.trajectories for s in tr.steps
                      if s.margin_id is not None)
    mean_cov = outcome.summary["coverage"][0]
    gate("transfer run (sim -> lab)",
         unsafe_steps == 0 and mean_cov > 0.0,
         f"unsafe steps {unsafe_steps}; hover interventions {margin_hits}; "
         f"mean coverage {mean_cov:.4f} over 10 episodes")


# ---------------------------------------------------------------------------
# Secondary component: the human pathway over the wire
# ---------------------------------------------------------------------------

def test_teleop_session_feeds_the_pipeline(tmp_path):
    """[SECONDARY] A 60-second human-pathway session recorded through the
    telemetry protocol exports a dataset file that fuse and train consume
    without modification."""
    import asyncio
    import json

    from websockets.asyncio.client import connect

    from fovtrack.cli import main as cli_main
    from fovtrack.dataset import load_demoset
    from fovtrack.server import TelemetryServer

    scenario = ScenarioConfig()
    out_dir = tmp_path / "sessions"

    async def drive():
        server = TelemetryServer(scenario, manoeuvre="climb", port=0,
                                 realtime=10.0, out_dir=out_dir)
        await server.start()
        try:
            async with connect(f"ws://127.0.0.1:{server.port}",
                               ping_interval=None) as ws:
                seq = 0

                async def send(msg):
                    nonlocal seq
                    msg["seq"] = seq
                    seq += 1
                    await ws.send(json.dumps(msg))

                await send({"type": "hello", "role": "controller"})
                await send({"type": "record", "command": "start", "tag": "climb"})
                recorded = 0
                rng = np.random.default_rng(4)
                while recorded < 1230:  # > 60 s of sim time at dt = 0.05
                    msg = json.loads(await asyncio.wait_for(ws.recv(), timeout=10))
                    if msg.get("type") != "state" or not msg.get("recording"):
                        continue
                    recorded += 1
                    obs = msg["obs"]
                    # a human-ish hand: proportional corrections plus jitter
                    act = [
                        -1.8 * obs[2] + 0.03 * rng.standard_normal(),
                        -1.8 * obs[3] + 0.03 * rng.standard_normal(),
                        6.0 * (obs[6] - obs[5]) + 0.03 * rng.standard_normal(),
                        0.0,
                    ]
                    act = [max(-1.0, min(1.0, a)) for a in act]
                    await send({"type": "action", "action": act})
                await send({"type": "record", "command": "stop", "tag": "climb"})
                for _ in range(50):
                    msg = json.loads(await asyncio.wait_for(ws.recv(), timeout=10))
                    if msg.get("type") == "ack":
                        break
        finally:
            await server.stop()

    asyncio.run(asyncio.wait_for(drive(), timeout=180))

    sessions = sorted(out_dir.glob("*.demos"))
    assert sessions, "no session file written"
    human = load_demoset(sessions[0])
    assert human.provenance == "human"
    assert human.subtask is not None and human.subtask.tag == "climb"
    assert len(human) >= 1200  # 60 s at dt = 0.05

    # the exported file must flow through fuse and train untouched
    import yaml
    cfg_path = tmp_path / "fast.yaml"
    cfg_path.write_text(yaml.safe_dump({
        "manoeuvre": {"primitive_duration": 5.0, "fixed_duration": 10.0},
        "recording": {"fixed_altitude_episodes": 1, "primitive_episodes": 1},
    }))
    base = ["--config", str(cfg_path)]
    assert cli_main(base + ["record", "--subtask", "fixed_altitude",
                            "--out", str(tmp_path / "fx.demos")]) == 0
    assert cli_main(base + ["record", "--subtask", "descend",
                            "--out", str(tmp_path / "de.demos")]) == 0
    assert cli_main(base + ["fuse", str(sessions[0]),
                            str(tmp_path / "fx.demos"), str(tmp_path / "de.demos"),
                            "--out", str(tmp_path / "composite.demos")]) == 0
    composite = load_demoset(tmp_path / "composite.demos")
    assert len(composite) == len(human) + 200 + 100
    assert cli_main(base + ["train", "--dataset", str(tmp_path / "composite.demos"),
                            "--out", str(tmp_path / "m.npz"),
                            "--epochs", "40"]) == 0
    gate("teleop session feeds the pipeline",
         (tmp_path / "m.npz").exists(),
         f"60 s session: {len(human)} samples -> fuse ({len(composite)}) -> train ok")
