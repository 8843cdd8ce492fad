"""Feed-forward policy network with hand-written backprop and Adam updates.

Architecture: 11 inputs, two ReLU hidden layers of 300 units, and a tanh
output layer of 4 units, so emitted actions always lie strictly inside
(-1, 1). Training is full-batch mean-squared-error regression. float64 is
the default; float32 halves the wall time of paper-scale runs and is selected
through TrainConfig.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import DemoSet

DEFAULT_DIMS = (11, 300, 300, 4)
MODEL_FORMAT = "fovtrack-model"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    """Corrupt or structurally incompatible model file."""


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10_000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    init_scale: float = 1e-4
    seed: int = 0
    dtype: str = "float64"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.init_scale <= 0:
            raise ValueError("init_scale must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")


@dataclass
class MLPModel:
    dims: tuple[int, ...]
    weights: list[np.ndarray]      # weights[i]: (dims[i], dims[i+1])
    biases: list[np.ndarray]
    input_scale: np.ndarray        # per-component input normalization
    meta: dict = field(default_factory=dict)

    @property
    def dtype(self):
        return self.weights[0].dtype

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def init_model(
    dims: tuple[int, ...] = DEFAULT_DIMS,
    seed: int = 0,
    init_scale: float = 1e-4,
    dtype: str = "float64",
    input_scale=None,
    meta: dict | None = None,
) -> MLPModel:
    """Near-zero start: weights uniform in [-init_scale, init_scale], zero
    biases."""
    if len(dims) < 2:
        raise ValueError("network needs at least one layer")
    rng = np.random.default_rng(seed)
    dt = np.dtype(dtype)
    weights = [rng.uniform(-init_scale, init_scale, size=(a, b)).astype(dt)
               for a, b in zip(dims[:-1], dims[1:])]
    biases = [np.zeros(b, dtype=dt) for b in dims[1:]]
    scale = np.ones(dims[0]) if input_scale is None else np.asarray(input_scale, dtype=np.float64)
    if scale.shape != (dims[0],):
        raise ValueError("input_scale must match the input width")
    m = dict(meta or {})
    m.setdefault("seed", seed)
    m.setdefault("init_scale", init_scale)
    m.setdefault("activations", ["relu"] * (len(dims) - 2) + ["tanh"])
    return MLPModel(dims=tuple(int(d) for d in dims), weights=weights,
                    biases=biases, input_scale=scale, meta=m)


class Workspace:
    """Preallocated buffers so full-batch epochs run allocation free.

    Gradients returned by loss_and_grad alias these buffers; consume them
    before the next call when a workspace is reused.
    """

    def __init__(self, model: MLPModel, n: int):
        dt = model.dtype
        self.n = n
        self.input_scale = model.input_scale.astype(dt)
        self.x_scaled = np.empty((n, model.dims[0]), dtype=dt)
        self.act = [np.empty((n, d), dtype=dt) for d in model.dims[1:]]
        self.delta = [np.empty((n, d), dtype=dt) for d in model.dims[1:]]
        self.mask = [np.empty((n, d), dtype=bool) for d in model.dims[1:-1]]
        self.out_tmp = np.empty((n, model.dims[-1]), dtype=dt)
        self.grads_w = [np.empty_like(w) for w in model.weights]
        self.grads_b = [np.empty_like(b) for b in model.biases]


def _forward_full(model: MLPModel, x: np.ndarray, ws: Workspace):
    """Forward pass keeping hidden activations for backprop."""
    np.multiply(x, ws.input_scale, out=ws.x_scaled)
    h = ws.x_scaled
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        np.matmul(h, w, out=ws.act[i])
        ws.act[i] += b
        if i < last:
            np.maximum(ws.act[i], 0.0, out=ws.act[i])
        else:
            np.tanh(ws.act[i], out=ws.act[i])
        h = ws.act[i]
    return ws.act[last], ws.act[:last]


def forward(model: MLPModel, state) -> np.ndarray:
    """Network output for one state vector or a batch of them."""
    x = np.asarray(state, dtype=model.dtype)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.dims[0]:
        raise ValueError(f"input width {x.shape[1]} != network input {model.dims[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("network input must be finite")
    y, _ = _forward_full(model, x, Workspace(model, x.shape[0]))
    return y[0].copy() if single else y.copy()


def loss_and_grad(model: MLPModel, states: np.ndarray, actions: np.ndarray,
                  ws: Workspace | None = None):
    """Mean squared error over every sample and output dimension, plus its
    gradient for every weight and bias (reverse-mode)."""
    x = np.asarray(states, dtype=model.dtype)
    a = np.asarray(actions, dtype=model.dtype)
    if x.ndim != 2 or a.ndim != 2 or x.shape[0] != a.shape[0] or x.shape[0] == 0:
        raise ValueError("states and actions must be nonempty matching batches")
    if ws is None or ws.n != x.shape[0]:
        ws = Workspace(model, x.shape[0])
    y, hidden = _forward_full(model, x, ws)

    n_layers = len(model.weights)
    top = n_layers - 1
    resid = ws.delta[top]
    np.subtract(y, a, out=resid)
    flat = resid.reshape(-1)
    mse = float(flat @ flat) / resid.size

    # d(mse)/dy, then through the output tanh.
    resid *= 2.0 / resid.size
    np.multiply(y, y, out=ws.out_tmp)
    np.subtract(1.0, ws.out_tmp, out=ws.out_tmp)
    resid *= ws.out_tmp

    delta = resid
    for i in range(top, -1, -1):
        below = hidden[i - 1] if i > 0 else ws.x_scaled
        np.matmul(below.T, delta, out=ws.grads_w[i])
        delta.sum(axis=0, out=ws.grads_b[i])
        if i > 0:
            np.matmul(delta, model.weights[i].T, out=ws.delta[i - 1])
            delta = ws.delta[i - 1]
            np.greater(hidden[i - 1], 0.0, out=ws.mask[i - 1])
            delta *= ws.mask[i - 1]
    return mse, (ws.grads_w, ws.grads_b)


@dataclass
class AdamState:
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    t: int = 0

    @staticmethod
    def for_model(model: MLPModel) -> "AdamState":
        return AdamState(
            m_w=[np.zeros_like(w) for w in model.weights],
            v_w=[np.zeros_like(w) for w in model.weights],
            m_b=[np.zeros_like(b) for b in model.biases],
            v_b=[np.zeros_like(b) for b in model.biases])


def adam_step(model: MLPModel, grads, state: AdamState, cfg: TrainConfig) -> None:
    """One bias-corrected Adam update, in place."""
    grads_w, grads_b = grads
    for g in (*grads_w, *grads_b):
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged(state.t + 1)
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t
    lr = cfg.learning_rate
    for params, gs, ms, vs in (
        (model.weights, grads_w, state.m_w, state.v_w),
        (model.biases, grads_b, state.m_b, state.v_b),
    ):
        for p, g, m, v in zip(params, gs, ms, vs):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p -= lr * (m / corr1) / (np.sqrt(v / corr2) + cfg.epsilon)


@dataclass
class TrainResult:
    model: MLPModel
    train_loss: np.ndarray
    val_loss: np.ndarray | None


def train_arrays(
    states: np.ndarray,
    actions: np.ndarray,
    cfg: TrainConfig,
    val_states: np.ndarray | None = None,
    val_actions: np.ndarray | None = None,
    dims: tuple[int, ...] = DEFAULT_DIMS,
    input_scale=None,
    meta: dict | None = None,
) -> TrainResult:
    """Full-batch training loop; loss histories recorded every epoch."""
    if len(states) < 2:
        raise ValueError("training needs at least two samples")
    model = init_model(dims, seed=cfg.seed, init_scale=cfg.init_scale,
                       dtype=cfg.dtype, input_scale=input_scale, meta=meta)
    x = np.ascontiguousarray(states, dtype=model.dtype)
    a = np.ascontiguousarray(actions, dtype=model.dtype)
    has_val = val_states is not None and len(val_states) > 0
    if has_val:
        xv = np.ascontiguousarray(val_states, dtype=model.dtype)
        av = np.ascontiguousarray(val_actions, dtype=model.dtype)

    opt = AdamState.for_model(model)
    ws = Workspace(model, x.shape[0])
    ws_val = Workspace(model, xv.shape[0]) if has_val else None
    train_hist = np.empty(cfg.epochs)
    val_hist = np.empty(cfg.epochs) if has_val else None
    for epoch in range(cfg.epochs):
        mse, grads = loss_and_grad(model, x, a, ws)
        if not np.isfinite(mse):
            raise TrainingDiverged(epoch)
        train_hist[epoch] = mse
        if has_val:
            yv, _ = _forward_full(model, xv, ws_val)
            np.subtract(yv, av, out=ws_val.delta[-1])
            rv = ws_val.delta[-1].reshape(-1)
            val_hist[epoch] = float(rv @ rv) / rv.size
        adam_step(model, grads, opt, cfg)
    model.meta["epochs"] = cfg.epochs
    model.meta["final_train_mse"] = float(train_hist[-1])
    return TrainResult(model=model, train_loss=train_hist, val_loss=val_hist)


def train(
    demo: DemoSet,
    cfg: TrainConfig,
    validation: DemoSet | None = None,
    input_scale=None,
    meta: dict | None = None,
) -> TrainResult:
    """Train on a demonstration set (optionally tracking a validation set)."""
    m = dict(meta or {})
    m.setdefault("manoeuvre", demo.manoeuvre)
    m.setdefault("provenance", demo.provenance)
    return train_arrays(
        demo.states_matrix(), demo.actions_matrix(), cfg,
        val_states=validation.states_matrix() if validation else None,
        val_actions=validation.actions_matrix() if validation else None,
        input_scale=input_scale, meta=m)


# ---------------------------------------------------------------------------
# Persistence: npz payload with a JSON metadata record. Binary arrays make
# the save/load round trip bit-exact.
# ---------------------------------------------------------------------------

def save_model(model: MLPModel, path) -> None:
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "dims": list(model.dims),
        "dtype": str(model.dtype),
        "meta": model.meta,
    }
    arrays = {"header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
              "input_scale": model.input_scale}
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    np.savez(path, **arrays)


def load_model(path) -> MLPModel:
    try:
        data = np.load(path)
        header = json.loads(bytes(data["header"]).decode())
    except Exception as e:
        raise ModelFormatError(f"unreadable model file: {e}") from e
    if header.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a policy model file")
    if header.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {header.get('version')}")
    dims = tuple(int(d) for d in header["dims"])
    try:
        weights = [data[f"w{i}"] for i in range(len(dims) - 1)]
        biases = [data[f"b{i}"] for i in range(len(dims) - 1)]
        input_scale = data["input_scale"]
    except KeyError as e:
        raise ModelFormatError(f"missing parameter block {e}") from e
    for i, (w, b) in enumerate(zip(weights, biases)):
        if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
            raise ModelFormatError(
                f"layer {i} parameters do not match declared dims {dims}")
    return MLPModel(dims=dims, weights=weights, biases=biases,
                    input_scale=input_scale, meta=header.get("meta", {}))


def save_loss_history(path, train_loss, val_loss=None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("epoch train_mse val_mse\n")
        for i, tr in enumerate(train_loss):
            v = f"{val_loss[i]:.10g}" if val_loss is not None else "nan"
            f.write(f"{i} {tr:.10g} {v}\n")


def policy_from_model(model: MLPModel, expected_in: int = 11, expected_out: int = 4):
    """Wrap a model as an Observation -> Action policy for the episode loop."""
    from .world import Action  # local import keeps the module dependency thin

    if model.dims[0] != expected_in or model.dims[-1] != expected_out:
        raise ModelFormatError(
            f"model dims {model.dims} incompatible with the "
            f"{expected_in}-state/{expected_out}-action runner")

    def policy(obs) -> Action:
        y = forward(model, obs.vector())
        return Action.from_sequence(y)

    return policy
