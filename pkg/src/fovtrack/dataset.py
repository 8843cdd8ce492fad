"""Demonstration sets: recording, sub-task fusion, splitting, and file I/O.

A demonstration is a sequence of (state, action) samples tagged with the
sub-task that produced them. Fusion lifts each sub-task demonstration into
the composite spaces: states pass through unchanged (all sub-tasks share the
full state layout) and actions are zero-padded outside the sub-task's active
dimensions, then the sources are concatenated in order.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .manoeuvre import ManoeuvreKind
from .observation import OBSERVATION_DIM

SCHEMA_VERSION = 1
FORMAT_NAME = "fovtrack-demoset"
ACTION_DIM_NAMES = ("pitch", "roll", "vertical", "yaw_rate")
ACTION_DIM = 4


class DatasetFormatError(ValueError):
    """Malformed dataset file or incompatible schema."""


@dataclass(frozen=True)
class SubTaskSpec:
    """Which action dimensions a sub-task exercises.

    `active_dims` are the recorded/fused dimensions; `distinguishing` names
    the dimension(s) that set this sub-task apart, with an expected sign
    (+1, -1, or 0 for either) used by the orthogonality audit.
    """

    task_id: int
    manoeuvre: ManoeuvreKind
    active_dims: tuple[str, ...]
    distinguishing: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if not self.active_dims:
            raise ValueError("a sub-task needs at least one active dimension")
        for d in self.active_dims:
            if d not in ACTION_DIM_NAMES:
                raise ValueError(f"unknown action dimension {d!r}")

    @property
    def tag(self) -> str:
        return self.manoeuvre.value

    @property
    def active_indices(self) -> tuple[int, ...]:
        return tuple(ACTION_DIM_NAMES.index(d) for d in self.active_dims)

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "manoeuvre": self.manoeuvre.value,
            "active_dims": list(self.active_dims),
            "distinguishing": [[d, s] for d, s in self.distinguishing],
        }

    @staticmethod
    def from_dict(d: dict) -> "SubTaskSpec":
        return SubTaskSpec(
            task_id=int(d["task_id"]),
            manoeuvre=ManoeuvreKind(d["manoeuvre"]),
            active_dims=tuple(d["active_dims"]),
            distinguishing=tuple((str(k), int(s)) for k, s in d["distinguishing"]),
        )


def standard_subtasks(strict_orthogonal: bool = False) -> tuple[SubTaskSpec, ...]:
    """The three primitive sub-tasks.

    Climb/descend keep low-gain horizontal centering active by default (an
    operator would too); the strict variant restricts them to the vertical
    channel only.
    """
    vertical_only = ("vertical",)
    with_centering = ("pitch", "roll", "vertical")
    updown = vertical_only if strict_orthogonal else with_centering
    return (
        SubTaskSpec(1, ManoeuvreKind.FIXED_ALTITUDE, ("pitch", "roll"),
                    (("pitch", 0), ("roll", 0))),
        SubTaskSpec(2, ManoeuvreKind.CLIMB, updown, (("vertical", +1),)),
        SubTaskSpec(3, ManoeuvreKind.DESCEND, updown, (("vertical", -1),)),
    )


def orthogonality_audit(subtasks: tuple[SubTaskSpec, ...],
                        required_dims: tuple[str, ...] = ("pitch", "roll", "vertical")):
    """Check the sub-task set is usable for bootstrapping the composite task.

    The union of active dimensions must cover everything the composite task
    needs, and no two sub-tasks may share a distinguishing dimension unless
    their expected signs disagree.
    """
    covered = {d for s in subtasks for d in s.active_dims}
    missing = [d for d in required_dims if d not in covered]
    if missing:
        raise ValueError(f"sub-tasks leave required dimensions uncovered: {missing}")
    for i, a in enumerate(subtasks):
        for b in subtasks[i + 1:]:
            for dim_a, sign_a in a.distinguishing:
                for dim_b, sign_b in b.distinguishing:
                    if dim_a == dim_b and not (sign_a * sign_b < 0):
                        raise ValueError(
                            f"sub-tasks {a.task_id} and {b.task_id} overlap on "
                            f"distinguishing dimension {dim_a!r}")


@dataclass(frozen=True)
class Sample:
    t: float
    state: np.ndarray    # (11,)
    action: np.ndarray   # (4,)
    subtask_tag: str
    episode: int = 0

    def __post_init__(self):
        object.__setattr__(self, "state", np.asarray(self.state, dtype=np.float64))
        object.__setattr__(self, "action", np.asarray(self.action, dtype=np.float64))
        if self.state.shape != (OBSERVATION_DIM,):
            raise ValueError(f"state must have {OBSERVATION_DIM} components")
        if self.action.shape != (ACTION_DIM,):
            raise ValueError(f"action must have {ACTION_DIM} components")
        if not (np.all(np.isfinite(self.state)) and np.all(np.isfinite(self.action))):
            raise ValueError("sample values must be finite")
        if np.any(np.abs(self.action) > 1.0 + 1e-12):
            raise ValueError("action components must lie in [-1, 1]")


@dataclass
class DemoSet:
    samples: list[Sample]
    dt: float
    manoeuvre: str
    provenance: str                       # "scripted" | "human" | "mixed"
    subtasks: tuple[SubTaskSpec, ...] = ()
    schema_version: int = SCHEMA_VERSION
    config_fingerprint: str | None = None  # scenario that produced the data

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def subtask(self) -> SubTaskSpec | None:
        return self.subtasks[0] if len(self.subtasks) == 1 else None

    def states_matrix(self) -> np.ndarray:
        return np.stack([s.state for s in self.samples])

    def actions_matrix(self) -> np.ndarray:
        return np.stack([s.action for s in self.samples])

    def episodes(self) -> tuple[int, ...]:
        return tuple(sorted({s.episode for s in self.samples}))

    def validate(self) -> None:
        """Recording invariants: time strictly increases within an episode."""
        last: dict[int, float] = {}
        for s in self.samples:
            if s.episode in last and s.t <= last[s.episode]:
                raise ValueError(
                    f"timestamps must strictly increase within episode {s.episode}")
            last[s.episode] = s.t


def f_state(state) -> np.ndarray:
    """Lift a sub-task state into the composite state space (identity: every
    sub-task observes the full state layout)."""
    arr = np.asarray(state, dtype=np.float64)
    if arr.shape != (OBSERVATION_DIM,):
        raise ValueError(f"state must have {OBSERVATION_DIM} components")
    return arr


def f_action(a_sub, spec: SubTaskSpec) -> np.ndarray:
    """Lift sub-action values onto the composite action vector, zero
    elsewhere."""
    values = np.asarray(a_sub, dtype=np.float64).ravel()
    if values.shape != (len(spec.active_dims),):
        raise ValueError(
            f"sub-action has {values.size} values but the sub-task activates "
            f"{len(spec.active_dims)} dimensions")
    out = np.zeros(ACTION_DIM)
    for idx, v in zip(spec.active_indices, values):
        out[idx] = v
    return out


def fuse(demos: list[DemoSet]) -> DemoSet:
    """Algorithm-style fusion: lift every sample of every sub-task set into
    the composite spaces and concatenate, preserving order."""
    if not demos:
        raise ValueError("nothing to fuse")
    dt = demos[0].dt
    version = demos[0].schema_version
    specs_by_tag: dict[str, SubTaskSpec] = {}
    samples: list[Sample] = []
    episode_offset = 0
    provenances = set()
    for d in demos:
        if d.schema_version != version:
            raise DatasetFormatError("conflicting schema versions across sources")
        if abs(d.dt - dt) > 1e-12:
            raise ValueError("all sources must share the same step size")
        spec = d.subtask
        if spec is None:
            raise ValueError("every source must be tagged with exactly one sub-task")
        known = specs_by_tag.get(spec.tag)
        if known is not None and known != spec:
            raise DatasetFormatError(
                f"conflicting sub-task definitions for tag {spec.tag!r}")
        specs_by_tag[spec.tag] = spec
        provenances.add(d.provenance)
        for s in d.samples:
            composite_action = f_action(s.action[list(spec.active_indices)], spec)
            samples.append(Sample(
                t=s.t, state=f_state(s.state), action=composite_action,
                subtask_tag=spec.tag, episode=s.episode + episode_offset))
        if d.samples:
            episode_offset += max(s.episode for s in d.samples) + 1
    provenance = provenances.pop() if len(provenances) == 1 else "mixed"
    fingerprints = {d.config_fingerprint for d in demos}
    return DemoSet(
        samples=samples, dt=dt, manoeuvre="composite", provenance=provenance,
        subtasks=tuple(specs_by_tag.values()), schema_version=version,
        config_fingerprint=fingerprints.pop() if len(fingerprints) == 1 else None)


def split(d: DemoSet, ratio: float, seed: int) -> tuple[DemoSet, DemoSet]:
    """Seeded uniform partition into (train, validation)."""
    if not d.samples:
        raise ValueError("cannot split an empty demonstration set")
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(d.samples))
    n_train = int(math.floor(ratio * len(d.samples)))
    train = [d.samples[i] for i in perm[:n_train]]
    val = [d.samples[i] for i in perm[n_train:]]
    return (replace(d, samples=train), replace(d, samples=val))


def record_stream(stream, dt: float, manoeuvre: str, provenance: str,
                  subtask: SubTaskSpec | None = None) -> DemoSet:
    """Assemble a DemoSet from a live sample stream (simulator or teleop)."""
    samples = list(stream)
    subtasks = (subtask,) if subtask is not None else ()
    ds = DemoSet(samples=samples, dt=dt, manoeuvre=manoeuvre,
                 provenance=provenance, subtasks=subtasks)
    ds.validate()
    return ds


# ---------------------------------------------------------------------------
# File format: one JSON header line, then one sample per line as decimal text
# (17 significant digits round-trips doubles exactly):
#   t s0 .. s10 a0 a1 a2 a3 episode
# Sub-task tags are run-length encoded in the header, so fused sets keep
# their provenance without widening the sample lines.
# ---------------------------------------------------------------------------

_TOKENS_PER_LINE = 1 + OBSERVATION_DIM + ACTION_DIM + 1


def _tag_segments(samples: list[Sample]) -> list[list]:
    segments: list[list] = []
    for s in samples:
        if segments and segments[-1][0] == s.subtask_tag:
            segments[-1][1] += 1
        else:
            segments.append([s.subtask_tag, 1])
    return segments


def dumps_demoset(ds: DemoSet) -> str:
    header = {
        "format": FORMAT_NAME,
        "version": ds.schema_version,
        "dt": ds.dt,
        "manoeuvre": ds.manoeuvre,
        "provenance": ds.provenance,
        "subtasks": [s.to_dict() for s in ds.subtasks],
    }
    if ds.config_fingerprint:
        header["config_fingerprint"] = ds.config_fingerprint
    segments = _tag_segments(ds.samples)
    # A uniform tag equal to the manoeuvre needs no segment table; such files
    # stay valid when episode lines are appended to them.
    if len(segments) > 1 or (segments and segments[0][0] != ds.manoeuvre):
        header["segments"] = segments
    buf = io.StringIO()
    buf.write(json.dumps(header, sort_keys=True))
    buf.write("\n")
    for s in ds.samples:
        nums = [s.t, *s.state.tolist(), *s.action.tolist()]
        buf.write(" ".join(f"{x:.17g}" for x in nums))
        buf.write(f" {s.episode}\n")
    return buf.getvalue()


def save_demoset(ds: DemoSet, path) -> str:
    """Write the set; returns its content fingerprint."""
    text = dumps_demoset(ds)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return hashlib.sha256(text.encode()).hexdigest()


def loads_demoset(text: str) -> DemoSet:
    lines = text.splitlines()
    if not lines:
        raise DatasetFormatError("empty dataset file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"unreadable header: {e}") from e
    if header.get("format") != FORMAT_NAME:
        raise DatasetFormatError("not a demonstration-set file")
    if header.get("version") != SCHEMA_VERSION:
        raise DatasetFormatError(
            f"schema version {header.get('version')} unsupported "
            f"(expected {SCHEMA_VERSION})")

    body = lines[1:]
    if "segments" in header:
        segments = [(str(tag), int(n)) for tag, n in header["segments"]]
        tags: list[str] = []
        for tag, n in segments:
            tags.extend([tag] * n)
        if len(tags) != len(body):
            raise DatasetFormatError(
                f"header declares {len(tags)} samples but file has {len(body)}")
    else:
        tags = [str(header["manoeuvre"])] * len(body)

    samples = []
    for i, line in enumerate(body):
        tokens = line.split()
        if len(tokens) != _TOKENS_PER_LINE:
            raise DatasetFormatError(
                f"line {i + 2}: expected {_TOKENS_PER_LINE} fields, got {len(tokens)}")
        try:
            nums = [float(tok) for tok in tokens[:-1]]
            episode = int(tokens[-1])
        except ValueError as e:
            raise DatasetFormatError(f"line {i + 2}: {e}") from e
        try:
            samples.append(Sample(
                t=nums[0],
                state=np.array(nums[1:1 + OBSERVATION_DIM]),
                action=np.array(nums[1 + OBSERVATION_DIM:]),
                subtask_tag=tags[i],
                episode=episode,
            ))
        except ValueError as e:
            raise DatasetFormatError(f"line {i + 2}: {e}") from e

    return DemoSet(
        samples=samples,
        dt=float(header["dt"]),
        manoeuvre=str(header["manoeuvre"]),
        provenance=str(header["provenance"]),
        subtasks=tuple(SubTaskSpec.from_dict(d) for d in header.get("subtasks", [])),
        schema_version=int(header["version"]),
        config_fingerprint=header.get("config_fingerprint"),
    )


def load_demoset(path) -> DemoSet:
    with open(path, "r", encoding="utf-8") as f:
        return loads_demoset(f.read())


def dataset_fingerprint(ds: DemoSet) -> str:
    return hashlib.sha256(dumps_demoset(ds).encode()).hexdigest()


def demosets_equal(a: DemoSet, b: DemoSet) -> bool:
    """Exact equality, including float bit patterns."""
    if (len(a) != len(b) or a.dt != b.dt or a.manoeuvre != b.manoeuvre
            or a.provenance != b.provenance or a.subtasks != b.subtasks
            or a.config_fingerprint != b.config_fingerprint):
        return False
    for x, y in zip(a.samples, b.samples):
        if (x.t != y.t or x.episode != y.episode or x.subtask_tag != y.subtask_tag
                or not np.array_equal(x.state, y.state)
                or not np.array_equal(x.action, y.action)):
            return False
    return True
