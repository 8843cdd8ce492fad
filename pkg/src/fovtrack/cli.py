"""Command-line front end: simulate, record, fuse, train, eval, replay, serve.

Every command writes a manifest next to its outputs (resolved config
fingerprint, seed, inputs) so any artifact can be reproduced from its
manifest alone.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig, load_scenario
from .dataset import (DatasetFormatError, dataset_fingerprint, fuse,
                      load_demoset, save_demoset, split, standard_subtasks)
from .episode import load_trajectory, record_demos, run_episode, save_trajectory
from .evaluator import (SetupId, evaluate_policy, evaluate_sessions,
                        export_series, summary_table)
from .experts import ExpertGains, combined_expert, zero_policy
from .manoeuvre import ManoeuvreKind, build_manoeuvre
from .network import (ModelFormatError, TrainConfig, load_model,
                      policy_from_model, save_loss_history, save_model, train)
from .server import TelemetryServer, replay_trajectory, serve_forever

logger = logging.getLogger(__name__)


class CliError(RuntimeError):
    pass


def _write_manifest(out: Path, command: str, cfg: ScenarioConfig,
                    seed: int, extra: dict | None = None) -> None:
    manifest = {
        "tool": f"fovtrack {__version__}",
        "command": command,
        "config_fingerprint": cfg.fingerprint(),
        "config": cfg.to_dict(),
        "seed": seed,
    }
    manifest.update(extra or {})
    path = out if out.is_dir() else out.parent
    name = (out.name if out.is_dir() else out.stem) + ".manifest.json"
    (path / name).write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _scenario(args) -> ScenarioConfig:
    cfg = load_scenario(args.config)
    if getattr(args, "preset", None):
        cfg = replace(cfg, preset=args.preset)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _expert_gains(cfg: ScenarioConfig) -> ExpertGains:
    e = cfg.expert
    return ExpertGains(horizontal=e.horizontal_gain, vertical=e.vertical_gain,
                       centering=e.centering_gain)


def _load_policy(cfg: ScenarioConfig, source: str):
    if source == "zero":
        return zero_policy, "zero"
    if source == "expert":
        return combined_expert(_expert_gains(cfg)), "scripted:combined"
    path = Path(source)
    if not path.exists():
        raise CliError(f"model file not found: {path}")
    model = load_model(path)
    _check_normalization(model, cfg)
    return policy_from_model(model), f"model:{path.name}"


def _check_normalization(model, cfg: ScenarioConfig) -> None:
    expected = np.asarray(cfg.input_scale(), dtype=np.float64)
    actual = np.asarray(model.input_scale, dtype=np.float64)
    if actual.shape != expected.shape or not np.allclose(actual, expected, rtol=0, atol=1e-12):
        raise CliError(
            "model was trained with a different observation normalization "
            f"({actual.tolist()} vs {expected.tolist()}); refusing to evaluate")


# -- commands ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _scenario(args)
    policy, policy_id = _load_policy(cfg, args.policy)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kind = ManoeuvreKind(args.manoeuvre)
    for i in range(args.episodes):
        seed = cfg.seed + i
        spec = build_manoeuvre(kind, cfg.bounds, seed, cfg.build_manoeuvre_params())
        tr = run_episode(policy, spec, cfg, seed=seed, policy_id=policy_id,
                         max_phase_jitter=2.0)
        save_trajectory(tr, out / f"episode_{i:03d}.traj")
        if args.series:
            export_series(tr, out / f"episode_{i:03d}.series")
    _write_manifest(out, "simulate", cfg, cfg.seed,
                    {"manoeuvre": kind.value, "episodes": args.episodes,
                     "policy": policy_id})
    print(f"wrote {args.episodes} trajectory archive(s) to {out}")
    return 0


def cmd_record(args) -> int:
    cfg = _scenario(args)
    if args.source == "teleop":
        return _record_teleop(args, cfg)
    subtask = next((s for s in standard_subtasks(cfg.expert.strict_orthogonal)
                    if s.tag == args.subtask), None)
    if subtask is None:
        raise CliError(f"unknown sub-task {args.subtask!r}")
    episodes = args.episodes or (
        cfg.recording.fixed_altitude_episodes
        if subtask.manoeuvre is ManoeuvreKind.FIXED_ALTITUDE
        else cfg.recording.primitive_episodes)
    demo, trajectories = record_demos(subtask, cfg, episodes, cfg.seed)
    demo.config_fingerprint = cfg.fingerprint()
    bad = [i for i, tr in enumerate(trajectories)
           if any(not s.obs.all_visible for s in tr.steps)]
    if bad:
        raise CliError(f"data-quality gate failed: episodes {bad} lost sight of a UGV")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fp = save_demoset(demo, out)
    _write_manifest(out, "record", cfg, cfg.seed,
                    {"subtask": subtask.tag, "episodes": episodes,
                     "samples": len(demo), "dataset_fingerprint": fp})
    print(f"recorded {len(demo)} samples over {episodes} episodes -> {out}")
    return 0


def _record_teleop(args, cfg: ScenarioConfig) -> int:
    out = Path(args.out)
    try:
        kind = ManoeuvreKind(args.subtask)
    except ValueError:
        kind = ManoeuvreKind.COMBINED
    server = TelemetryServer(cfg, manoeuvre=kind, host=args.host,
                             port=args.port, token=args.token, out_dir=out)
    print(f"teleop recording service for {kind.value!r}; "
          f"sessions will be saved to {out}")
    asyncio.run(serve_forever(server))
    return 0


def cmd_fuse(args) -> int:
    sources = [load_demoset(p) for p in args.inputs]
    composite = fuse(sources)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fp = save_demoset(composite, out)
    cfg = _scenario(args)
    _write_manifest(out, "fuse", cfg, cfg.seed,
                    {"inputs": [str(p) for p in args.inputs],
                     "sizes": [len(s) for s in sources],
                     "composite_size": len(composite),
                     "dataset_fingerprint": fp})
    print(f"fused {'+'.join(str(len(s)) for s in sources)} = "
          f"{len(composite)} samples -> {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _scenario(args)
    demo = load_demoset(args.dataset)
    train_set, val_set = split(demo, args.split, cfg.seed)
    tc = TrainConfig(epochs=args.epochs, seed=cfg.seed, dtype=args.dtype)
    meta = {
        "dataset_fingerprint": dataset_fingerprint(demo),
        "config_fingerprint": cfg.fingerprint(),
        "split": args.split,
    }
    result = train(train_set, tc, validation=val_set,
                   input_scale=cfg.input_scale(), meta=meta)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(result.model, out)
    save_loss_history(out.with_suffix(".loss"), result.train_loss, result.val_loss)
    _write_manifest(out, "train", cfg, cfg.seed,
                    {"dataset": str(args.dataset), "epochs": args.epochs,
                     "dtype": args.dtype,
                     "final_train_mse": float(result.train_loss[-1]),
                     "final_val_mse": float(result.val_loss[-1])})
    print(f"trained {tc.epochs} epochs; final train mse "
          f"{result.train_loss[-1]:.3e}, val mse {result.val_loss[-1]:.3e} -> {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _scenario(args)
    setup = SetupId(args.setup)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if setup is SetupId.HUMAN_COMBINED:
        if not args.sessions:
            raise CliError("human-combined evaluation needs --sessions <dir of .traj>")
        paths = sorted(Path(args.sessions).glob("*.traj"))
        if not paths:
            raise CliError(f"no recorded sessions in {args.sessions}")
        result = evaluate_sessions([load_trajectory(p) for p in paths], setup)
    else:
        if not args.model:
            raise CliError(f"{setup.value} evaluation needs --model")
        policy, policy_id = _load_policy(cfg, args.model)
        result = evaluate_policy(policy, cfg, args.episodes, cfg.seed, setup,
                                 policy_id=policy_id)
        for i, tr in enumerate(result.trajectories):
            save_trajectory(tr, out / f"eval_{setup.value}_{i:03d}.traj")
    report = result.to_dict()
    report["config_fingerprint"] = cfg.fingerprint()
    report_path = out / f"report_{setup.value}.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True))
    _write_manifest(out, "eval", cfg, cfg.seed,
                    {"setup": setup.value, "episodes": len(result.reports)})
    print(summary_table(result))
    print(f"report -> {report_path}")
    return 0


def cmd_replay(args) -> int:
    cfg = _scenario(args)
    tr = load_trajectory(args.archive)
    asyncio.run(replay_trajectory(tr, cfg, host=args.host, port=args.port,
                                  realtime=args.realtime))
    return 0


def cmd_serve(args) -> int:
    cfg = _scenario(args)
    policy = None
    if args.policy:
        policy, _ = _load_policy(cfg, args.policy)
    server = TelemetryServer(cfg, manoeuvre=args.manoeuvre, policy=policy,
                             host=args.host, port=args.port, token=args.token,
                             out_dir=args.out)
    asyncio.run(serve_forever(server))
    return 0


# -- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fovtrack",
        description="UAV/UGV tracking simulator, safety net, and imitation pipeline")
    p.add_argument("--config", help="scenario YAML (default: $FOVTRACK_CONFIG or built-ins)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--preset", choices=("sim", "lab"), help="environment preset")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run episodes and archive trajectories")
    sim.add_argument("--manoeuvre", default="combined",
                     choices=[k.value for k in ManoeuvreKind])
    sim.add_argument("--policy", default="expert",
                     help="model file, 'expert', or 'zero'")
    sim.add_argument("--episodes", type=int, default=1)
    sim.add_argument("--out", required=True)
    sim.add_argument("--series", action="store_true",
                     help="also export plot-ready time series")
    sim.set_defaults(func=cmd_simulate)

    rec = sub.add_parser("record", help="record demonstrations")
    rec.add_argument("--subtask", default="climb",
                     help="sub-task tag (fixed_altitude, climb, descend)")
    rec.add_argument("--source", default="scripted", choices=("scripted", "teleop"))
    rec.add_argument("--episodes", type=int)
    rec.add_argument("--out", required=True)
    rec.add_argument("--host", default="127.0.0.1")
    rec.add_argument("--port", type=int, default=8765)
    rec.add_argument("--token")
    rec.set_defaults(func=cmd_record)

    fu = sub.add_parser("fuse", help="fuse sub-task sets into a composite set")
    fu.add_argument("inputs", nargs="+")
    fu.add_argument("--out", required=True)
    fu.set_defaults(func=cmd_fuse)

    tr = sub.add_parser("train", help="train the policy network")
    tr.add_argument("--dataset", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--epochs", type=int, default=10_000)
    tr.add_argument("--split", type=float, default=0.67,
                    help="training fraction of the data")
    tr.add_argument("--dtype", default="float32", choices=("float32", "float64"))
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a setup on the combined manoeuvre")
    ev.add_argument("--setup", required=True,
                    choices=[s.value for s in SetupId])
    ev.add_argument("--model", help="model file ('expert'/'zero' also accepted)")
    ev.add_argument("--sessions", help="directory of teleop .traj archives")
    ev.add_argument("--episodes", type=int, default=10)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_eval)

    rp = sub.add_parser("replay", help="stream an archived trajectory to clients")
    rp.add_argument("--archive", required=True)
    rp.add_argument("--host", default="127.0.0.1")
    rp.add_argument("--port", type=int, default=8765)
    rp.add_argument("--realtime", type=float, default=1.0)
    rp.set_defaults(func=cmd_replay)

    sv = sub.add_parser("serve", help="run the telemetry/teleoperation service")
    sv.add_argument("--manoeuvre", default="combined",
                    choices=[k.value for k in ManoeuvreKind])
    sv.add_argument("--policy", help="optional model file to fly autonomously")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8765)
    sv.add_argument("--token")
    sv.add_argument("--out", help="directory for recorded sessions")
    sv.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigError, DatasetFormatError, ModelFormatError,
            FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
