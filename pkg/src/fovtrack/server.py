"""Telemetry and teleoperation service.

One authoritative sim loop per service instance steps the world at wall-clock
pace, broadcasts state frames, and folds client input in at step boundaries
(zero-order hold). Exactly one client may register as the controller and feed
actions; any authorized client may toggle the manual override. Frames are
JSON texts on a WebSocket — a TCP connection carrying length-delimited
structured text frames — so browser consoles speak the protocol natively.

Per-client send queues are bounded and newest-wins: a lagging client skips
frames instead of stalling the sim loop.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from websockets.asyncio.server import serve
from websockets.exceptions import ConnectionClosed

from .config import ScenarioConfig
from .dataset import DemoSet, Sample, save_demoset, standard_subtasks
from .episode import StepRecord, Trajectory, save_trajectory
from .manoeuvre import ManoeuvreKind, build_manoeuvre
from .observation import Observation, build_observation
from .safety import Arbiter, OverrideCommand, OverrideMode, Verdict
from .world import Action, initial_world, step_world

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
QUEUE_LIMIT = 4
ACTION_HOLD_WINDOW = 1.0  # seconds of wall silence before a held action decays to zero


class _Client:
    _ids = itertools.count(1)

    def __init__(self, ws):
        self.ws = ws
        self.id = next(self._ids)
        self.role = "observer"
        self.authorized = False
        self.last_seq = -1
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=QUEUE_LIMIT)
        self.out_seq = itertools.count()

    def enqueue(self, payload: dict) -> None:
        msg = dict(payload)
        msg["seq"] = next(self.out_seq)
        while True:
            try:
                self.queue.put_nowait(msg)
                return
            except asyncio.QueueFull:
                try:
                    self.queue.get_nowait()  # newest wins
                except asyncio.QueueEmpty:
                    pass


@dataclass
class _RecorderState:
    active: bool = False
    tag: str = ""
    steps: list[StepRecord] = field(default_factory=list)
    episodes: list[int] = field(default_factory=list)
    session: int = 0


class TelemetryServer:
    """Authoritative sim loop plus WebSocket fan-out."""

    def __init__(
        self,
        scenario: ScenarioConfig,
        manoeuvre: ManoeuvreKind | str = ManoeuvreKind.COMBINED,
        policy=None,
        host: str = "127.0.0.1",
        port: int = 0,
        token: str | None = None,
        out_dir: str | Path | None = None,
        realtime: float = 1.0,
    ):
        self.scenario = scenario
        self.kind = ManoeuvreKind(manoeuvre)
        self.policy = policy
        self.host = host
        self._requested_port = port
        self.token = token
        self.out_dir = Path(out_dir) if out_dir else None
        self.realtime = realtime  # >1 runs faster than wall time (tests)

        self.params = scenario.build_dynamics()
        self.cam = scenario.build_camera()
        self.arbiter = Arbiter(scenario.build_safety(), self.params)

        self._clients: dict[int, _Client] = {}
        self._controller: _Client | None = None
        self._server = None
        self._sim_task = None
        self._stopping = asyncio.Event()

        self._manual_mode = False
        self._manual_source = ""
        self._latest_axes = Action()
        self._axes_sim_time = -1e9
        self._axes_wall_time = -1e9
        self._recorder = _RecorderState()
        self._episode = 0
        self._new_episode()

    # -- lifecycle ----------------------------------------------------------

    async def start(self) -> None:
        self._server = await serve(self._handle_client, self.host,
                                   self._requested_port)
        self._sim_task = asyncio.create_task(self._sim_loop())

    @property
    def port(self) -> int:
        return self._server.sockets[0].getsockname()[1]

    async def stop(self) -> None:
        self._stopping.set()
        if self._sim_task:
            await self._sim_task
        self._server.close()
        await self._server.wait_closed()
        if self._recorder.active:
            self._finish_recording()

    # -- sim loop -----------------------------------------------------------

    def _new_episode(self) -> None:
        seed = self.scenario.seed + self._episode
        self.spec = build_manoeuvre(self.kind, self.scenario.bounds, seed,
                                    self.scenario.build_manoeuvre_params())
        start = self.spec.centroid_at(0.0)
        z0 = self.scenario.equilibrium_altitude(self.spec.scale_at(0.0))
        self.world = initial_world(self.spec, (start[0], start[1], z0))
        self._prev_obs: Observation | None = None

    async def _sim_loop(self) -> None:
        dt = self.scenario.dt
        decimate = max(1, round((1.0 / dt) / self.scenario.stream_rate))
        next_deadline = time.monotonic()
        step_index = 0
        while not self._stopping.is_set():
            obs = build_observation(self.world, self.cam,
                                    self.scenario.target_radius, self.params,
                                    fallback=self._prev_obs)
            proposed = self._proposed_action(obs)
            self.arbiter.set_override(self._current_override())
            decision = self.arbiter.decide(proposed, self.world, dt)
            record = StepRecord(
                t=self.world.t, world=self.world, obs=obs, proposed=proposed,
                action=decision.action, verdict=decision.verdict,
                unsafe=decision.unsafe, margin_id=decision.margin_id,
                predicted=decision.predicted)
            if self._recorder.active:
                self._recorder.steps.append(record)
                self._recorder.episodes.append(self._episode)
            if step_index % decimate == 0:
                self._broadcast_state(record)
            self.world = step_world(self.world, decision.action, dt, self.spec,
                                    self.params)
            self._prev_obs = obs
            step_index += 1
            if self.world.t >= self.spec.duration:
                self._episode += 1
                self._new_episode()

            next_deadline += dt / self.realtime
            delay = next_deadline - time.monotonic()
            if delay > 0:
                try:
                    await asyncio.wait_for(self._stopping.wait(), timeout=delay)
                except asyncio.TimeoutError:
                    pass
            else:
                next_deadline = time.monotonic()
                await asyncio.sleep(0)

    def _proposed_action(self, obs: Observation) -> Action:
        if self.policy is not None:
            return self.policy(obs)
        if time.monotonic() - self._axes_wall_time <= ACTION_HOLD_WINDOW:
            return self._latest_axes
        return Action()

    def _current_override(self) -> OverrideCommand:
        if not self._manual_mode:
            return OverrideCommand()
        return OverrideCommand(
            mode=OverrideMode.MANUAL, manual_action=self._latest_axes,
            source=self._manual_source, timestamp=self._axes_sim_time)

    def _broadcast_state(self, rec: StepRecord) -> None:
        w, o = rec.world, rec.obs
        payload = {
            "type": "state",
            "t": round(w.t, 6),
            "uav": {"pos": list(w.uav_pos), "heading": w.uav_heading,
                    "vel": list(w.uav_vel)},
            "ugv": [list(p) for p in w.ugv_pos],
            "obs": [float(x) for x in o.vector()],
            "valid": o.valid,
            "visible": list(o.visible),
            "verdict": rec.verdict.value,
            "unsafe": rec.unsafe,
            "margin": rec.margin_id,
            "action": list(rec.action.as_tuple()),
            "manual": self._manual_mode,
            "recording": self._recorder.active,
            "episode": self._episode,
            "bounds": list(self.scenario.bounds),
            "obstacles": [list(ob) for ob in self.scenario.safety.obstacles],
            "margin_width": self.scenario.safety.margin,
            "fov_extent": self.cam.image_extent,
            "focal": self.cam.focal,
        }
        for c in list(self._clients.values()):
            c.enqueue(payload)

    # -- client handling ------------------------------------------------------

    async def _handle_client(self, ws) -> None:
        client = _Client(ws)
        self._clients[client.id] = client
        sender = asyncio.create_task(self._send_loop(client))
        try:
            async for raw in ws:
                self._on_frame(client, raw)
        except ConnectionClosed:
            pass
        finally:
            sender.cancel()
            self._clients.pop(client.id, None)
            if self._controller is client:
                self._controller = None

    async def _send_loop(self, client: _Client) -> None:
        try:
            while True:
                msg = await client.queue.get()
                await client.ws.send(json.dumps(msg))
        except (ConnectionClosed, asyncio.CancelledError):
            pass

    def _on_frame(self, client: _Client, raw) -> None:
        try:
            msg = json.loads(raw)
            if not isinstance(msg, dict) or "type" not in msg:
                raise ValueError("frame must be an object with a 'type'")
        except (json.JSONDecodeError, ValueError, UnicodeDecodeError) as e:
            client.enqueue({"type": "error", "message": f"malformed frame: {e}"})
            return
        seq = msg.get("seq")
        if isinstance(seq, int):
            if seq <= client.last_seq:
                return  # stale or duplicate
            client.last_seq = seq
        try:
            self._dispatch(client, msg)
        except Exception as e:  # client input must never kill the loop
            logger.exception("error handling %s frame", msg.get("type"))
            client.enqueue({"type": "error", "ref_seq": seq,
                            "message": f"{type(e).__name__}: {e}"})

    def _dispatch(self, client: _Client, msg: dict) -> None:
        kind = msg["type"]
        seq = msg.get("seq")
        if kind == "hello":
            if self.token is not None and msg.get("token") != self.token:
                client.enqueue({"type": "error", "ref_seq": seq,
                                "message": "bad token"})
                return
            client.authorized = True
            role = msg.get("role", "observer")
            if role == "controller":
                if self._controller is not None and self._controller is not client:
                    client.enqueue({"type": "error", "ref_seq": seq,
                                    "message": "controller already registered"})
                    return
                self._controller = client
                client.role = "controller"
            client.enqueue({"type": "welcome", "ref_seq": seq,
                            "role": client.role,
                            "protocol": PROTOCOL_VERSION,
                            "stream_rate": self.scenario.stream_rate,
                            "dt": self.scenario.dt,
                            "manoeuvre": self.kind.value})
            return
        if not client.authorized:
            client.enqueue({"type": "error", "ref_seq": seq,
                            "message": "hello required first"})
            return
        if kind == "action":
            if client is not self._controller:
                client.enqueue({"type": "error", "ref_seq": seq,
                                "message": "only the controller may send actions"})
                return
            axes = msg.get("action", [0, 0, 0, 0])
            self._latest_axes = Action.from_sequence(axes).clamped()
            self._axes_sim_time = self.world.t
            self._axes_wall_time = time.monotonic()
            return
        if kind == "override":
            mode = msg.get("mode", "autonomous")
            self._manual_mode = mode == "manual"
            self._manual_source = f"client-{client.id}"
            if "action" in msg:
                self._latest_axes = Action.from_sequence(msg["action"]).clamped()
                self._axes_sim_time = self.world.t
                self._axes_wall_time = time.monotonic()
            client.enqueue({"type": "ack", "ref_seq": seq, "ok": True,
                            "detail": f"override {mode}"})
            return
        if kind == "record":
            command = msg.get("command")
            if command == "start":
                self._recorder = _RecorderState(
                    active=True, tag=str(msg.get("tag", self.kind.value)),
                    session=self._recorder.session + 1)
            elif command == "stop":
                self._finish_recording()
            else:
                raise ValueError(f"unknown record command {command!r}")
            client.enqueue({"type": "ack", "ref_seq": seq, "ok": True,
                            "detail": f"recording {'on' if self._recorder.active else 'off'}"})
            return
        raise ValueError(f"unknown message type {kind!r}")

    # -- recording ------------------------------------------------------------

    def _finish_recording(self) -> None:
        rec = self._recorder
        self._recorder = _RecorderState(active=False, session=rec.session)
        if not rec.active or not rec.steps or self.out_dir is None:
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        subtask = next((s for s in standard_subtasks(self.scenario.expert.strict_orthogonal)
                        if s.tag == rec.tag), None)
        samples = [
            Sample(t=s.t, state=s.obs.vector(),
                   action=np.array(s.action.as_tuple()),
                   subtask_tag=rec.tag, episode=ep)
            for s, ep in zip(rec.steps, rec.episodes)
        ]
        demo = DemoSet(samples=samples, dt=self.scenario.dt,
                       manoeuvre=rec.tag, provenance="human",
                       subtasks=(subtask,) if subtask else (),
                       config_fingerprint=self.scenario.fingerprint())
        stem = f"session_{rec.session:03d}_{rec.tag}"
        save_demoset(demo, self.out_dir / f"{stem}.demos")
        tr = Trajectory(steps=rec.steps, dt=self.scenario.dt,
                        manoeuvre=rec.tag, policy_id="teleop",
                        seed=self.scenario.seed, aborted=False)
        save_trajectory(tr, self.out_dir / f"{stem}.traj")
        logger.info("saved teleop session %s (%d samples)", stem, len(samples))


async def serve_forever(server: TelemetryServer) -> None:
    await server.start()
    logger.info("telemetry service on ws://%s:%d", server.host, server.port)
    try:
        await asyncio.Event().wait()
    finally:
        await server.stop()


async def replay_trajectory(
    tr: Trajectory,
    scenario: ScenarioConfig,
    host: str = "127.0.0.1",
    port: int = 8765,
    realtime: float = 1.0,
) -> None:
    """Stream an archived trajectory to every connected client, then exit."""
    cam = scenario.build_camera()
    clients: set = set()
    first_client = asyncio.Event()

    async def handle(ws):
        clients.add(ws)
        first_client.set()
        try:
            await ws.wait_closed()
        finally:
            clients.discard(ws)

    async with serve(handle, host, port):
        logger.info("replay service on ws://%s:%d (%d steps)", host, port, len(tr.steps))
        await first_client.wait()
        seq = 0
        for rec in tr.steps:
            w, o = rec.world, rec.obs
            payload = {
                "type": "state", "seq": seq, "t": round(w.t, 6), "replay": True,
                "uav": {"pos": list(w.uav_pos), "heading": w.uav_heading,
                        "vel": list(w.uav_vel)},
                "ugv": [list(p) for p in w.ugv_pos],
                "obs": [float(x) for x in o.vector()],
                "valid": o.valid, "visible": list(o.visible),
                "verdict": rec.verdict.value, "unsafe": rec.unsafe,
                "margin": rec.margin_id,
                "action": list(rec.action.as_tuple()),
                "manual": rec.verdict is Verdict.MANUAL, "recording": False,
                "episode": 0, "bounds": list(scenario.bounds),
                "obstacles": [list(ob) for ob in scenario.safety.obstacles],
                "margin_width": scenario.safety.margin,
                "fov_extent": cam.image_extent,
                "focal": cam.focal,
            }
            seq += 1
            dead = []
            for ws in clients:
                try:
                    await ws.send(json.dumps(payload))
                except ConnectionClosed:
                    dead.append(ws)
            for ws in dead:
                clients.discard(ws)
            await asyncio.sleep(tr.dt / realtime)
