"""Action-conditioned recurrent disengagement predictor.

Architecture: the flattened one-hot terrain grid passes through a small
fully-connected encoder whose output (projected) becomes the initial hidden
state of a gated recurrent (LSTM) cell; the cell consumes one embedded action
per step and a scalar head emits a per-step disengagement logit.  Forward,
loss, and exact reverse-mode gradients are hand-rolled in numpy so training
is dependency-free and bitwise reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .dataset import Dataset, SequenceSample

MODEL_FORMAT = "land-model.v1"


@dataclass(frozen=True)
class ModelConfig:
    grid_side: int = 24
    channels: int = 5
    encoder_hidden: tuple[int, ...] = (128, 64)
    hidden_dim: int = 32
    action_embed_dim: int = 16
    horizon: int = 8

    def validate(self) -> None:
        sizes = (self.grid_side, self.channels, self.hidden_dim, self.action_embed_dim, self.horizon)
        if any(v < 1 for v in sizes) or any(v < 1 for v in self.encoder_hidden):
            raise ValueError(f"all ModelConfig sizes must be positive: {self}")

    @property
    def input_dim(self) -> int:
        return self.grid_side * self.grid_side * self.channels

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["encoder_hidden"] = list(self.encoder_hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown ModelConfig keys: {sorted(unknown)}")
        d = dict(d)
        if "encoder_hidden" in d:
            d["encoder_hidden"] = tuple(d["encoder_hidden"])
        return cls(**d)


@dataclass(frozen=True)
class DisengagementPrediction:
    probs: np.ndarray    # (H,) in (0, 1)
    logits: np.ndarray   # (H,)


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 500
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def sigmoid(z: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Numerically stable logistic: exp(-|z|) never overflows."""
    z = np.asarray(z)
    t = np.exp(-np.abs(z))
    num = np.where(z >= 0, 1.0, t)
    if out is None:
        return num / (1.0 + t)
    np.divide(num, 1.0 + t, out=out)
    return out


def param_shapes(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Parameter declaration order; checkpoints store arrays in this order."""
    shapes = []
    d_in = config.input_dim
    for li, width in enumerate(config.encoder_hidden):
        shapes.append((f"enc{li}_W", (d_in, width)))
        shapes.append((f"enc{li}_b", (width,)))
        d_in = width
    hid = config.hidden_dim
    emb = config.action_embed_dim
    shapes.append(("proj_W", (d_in, hid)))
    shapes.append(("proj_b", (hid,)))
    shapes.append(("act_W", (1, emb)))
    shapes.append(("act_b", (emb,)))
    shapes.append(("lstm_W", (emb + hid, 4 * hid)))
    shapes.append(("lstm_b", (4 * hid,)))
    shapes.append(("head_w", (hid,)))
    shapes.append(("head_b", (1,)))
    return shapes


def init_params(config: ModelConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) per layer."""
    config.validate()
    params = {}
    for name, shape in param_shapes(config):
        if name.endswith("_b"):
            params[name] = np.zeros(shape, dtype=np.float64)
        else:
            fan_in = shape[0] if len(shape) > 1 else shape[0]
            bound = 1.0 / np.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def _encoder_layers(params: dict) -> list[int]:
    return sorted(int(k[3:-2]) for k in params if k.startswith("enc") and k.endswith("_W"))


def _encode(params: dict, obs: np.ndarray):
    """obs (B, D) -> initial hidden state (B, hid); returns activations for backprop."""
    acts = [obs]
    x = obs
    for li in _encoder_layers(params):
        x = np.tanh(x @ params[f"enc{li}_W"] + params[f"enc{li}_b"])
        acts.append(x)
    h0 = np.tanh(x @ params["proj_W"] + params["proj_b"])
    return h0, acts


def _lstm_forward(params: dict, h0: np.ndarray, actions: np.ndarray, keep_cache: bool = True):
    """Run the gated cell over (B, H) scalar actions.

    Returns logits (B, H) and the per-step tensors needed for backprop
    (None when keep_cache is false; that path reuses buffers across steps).
    Gate layout along the lstm_W columns is input, forget, output, candidate.
    """
    b, horizon = actions.shape
    hid = h0.shape[1]
    emb = params["act_b"].shape[0]
    w_sig = params["lstm_W"][:, : 3 * hid]
    w_cand = params["lstm_W"][:, 3 * hid :]
    b_sig = params["lstm_b"][: 3 * hid]
    b_cand = params["lstm_b"][3 * hid :]
    logits = np.empty((b, horizon))
    zin = np.empty((b, emb + hid))

    if not keep_cache:
        gates = np.empty((b, 3 * hid))
        g = np.empty((b, hid))
        c = np.zeros((b, hid))
        tc = np.empty((b, hid))
        tmp = np.empty((b, hid))
        h = h0.copy()
        for t in range(horizon):
            np.multiply(actions[:, t : t + 1], params["act_W"], out=zin[:, :emb])
            zin[:, :emb] += params["act_b"]
            zin[:, emb:] = h
            np.matmul(zin, w_sig, out=gates)
            gates += b_sig
            sigmoid(gates, out=gates)
            np.matmul(zin, w_cand, out=g)
            g += b_cand
            np.tanh(g, out=g)
            np.multiply(gates[:, hid : 2 * hid], c, out=c)       # f * c
            np.multiply(gates[:, :hid], g, out=tmp)              # i * g
            c += tmp
            np.tanh(c, out=tc)
            np.multiply(gates[:, 2 * hid :], tc, out=h)          # o * tanh(c)
            logits[:, t] = h @ params["head_w"] + params["head_b"][0]
        return logits, None

    h = h0
    c = np.zeros((b, hid))
    steps = []
    for t in range(horizon):
        np.multiply(actions[:, t : t + 1], params["act_W"], out=zin[:, :emb])
        zin[:, :emb] += params["act_b"]
        zin[:, emb:] = h
        gates = sigmoid(zin @ w_sig + b_sig)
        i = gates[:, :hid]
        f = gates[:, hid : 2 * hid]
        o = gates[:, 2 * hid :]
        g = np.tanh(zin @ w_cand + b_cand)
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        logits[:, t] = h_new @ params["head_w"] + params["head_b"][0]
        steps.append((zin.copy(), i, f, g, o, c, c_new, tc, h_new))
        h, c = h_new, c_new
    return logits, steps


def forward(params: dict, obs: np.ndarray, actions: np.ndarray):
    """Batched forward pass: obs (B, D), actions (B, H) -> logits (B, H) + cache."""
    h0, enc_acts = _encode(params, obs)
    logits, steps = _lstm_forward(params, h0, actions)
    return logits, (enc_acts, h0, actions, steps)


def predict(params: dict, obs_flat: np.ndarray, actions) -> DisengagementPrediction:
    """Single-sample prediction of the H future disengagement probabilities."""
    acts = np.asarray(actions, dtype=np.float64).reshape(1, -1)
    logits, _ = forward(params, np.asarray(obs_flat, dtype=np.float64).reshape(1, -1), acts)
    return DisengagementPrediction(probs=sigmoid(logits[0]), logits=logits[0])


def predict_batch(params: dict, obs_flat: np.ndarray, actions: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Many action sequences against one shared observation -> probs (N, H).

    The encoder runs once and its hidden state is broadcast across the
    candidates; the recurrence runs in cache-sized row chunks.
    """
    h0_one, _ = _encode(params, np.asarray(obs_flat, dtype=np.float64).reshape(1, -1))
    actions = np.asarray(actions, dtype=np.float64)
    n = len(actions)
    out = np.empty((n, actions.shape[1]))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        h0 = np.repeat(h0_one, hi - lo, axis=0)
        logits, _ = _lstm_forward(params, h0, actions[lo:hi], keep_cache=False)
        sigmoid(logits, out=out[lo:hi])
    return out


def _bce_from_logits(logits: np.ndarray, labels: np.ndarray) -> float:
    z, y = logits, labels.astype(np.float64)
    return float(np.sum(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))


def _batch_tensors(batch: list[SequenceSample]):
    obs = np.stack([s.observation.flat() for s in batch])
    actions = np.stack([s.actions for s in batch])
    labels = np.stack([s.labels for s in batch])
    return obs, actions, labels


def loss(params: dict, batch: list[SequenceSample]) -> float:
    """Summed binary cross-entropy over every sample and step, in logit form."""
    obs, actions, labels = _batch_tensors(batch)
    logits, _ = forward(params, obs, actions)
    return _bce_from_logits(logits, labels)


def backward(params: dict, cache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Exact reverse-mode gradients for every parameter, given dL/dlogits."""
    enc_acts, h0, actions, steps = cache
    hid = h0.shape[1]
    grads = {k: np.zeros_like(v) for k, v in params.items()}

    dh = np.zeros_like(h0)
    dc = np.zeros_like(h0)
    for t in range(actions.shape[1] - 1, -1, -1):
        zin, i, f, g, o, c_prev, c_new, tc, h_new = steps[t]
        dl = dlogits[:, t : t + 1]
        grads["head_w"] += (dl * h_new).sum(axis=0)
        grads["head_b"] += dl.sum()
        dh = dh + dl * params["head_w"][None, :]

        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        df = dc * c_prev
        di = dc * g
        dg = dc * i
        dc = dc * f  # flows to the previous cell state

        dz = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)], axis=1
        )
        grads["lstm_W"] += zin.T @ dz
        grads["lstm_b"] += dz.sum(axis=0)
        dzin = dz @ params["lstm_W"].T
        de = dzin[:, : dzin.shape[1] - hid]
        dh = dzin[:, dzin.shape[1] - hid :]

        grads["act_W"] += actions[:, t : t + 1].T @ de
        grads["act_b"] += de.sum(axis=0)

    # encoder: dh is now dL/dh0
    dx = dh * (1.0 - h0 * h0)
    grads["proj_W"] += enc_acts[-1].T @ dx
    grads["proj_b"] += dx.sum(axis=0)
    dx = dx @ params["proj_W"].T
    for li in reversed(_encoder_layers(params)):
        a = enc_acts[li + 1]
        dx = dx * (1.0 - a * a)
        grads[f"enc{li}_W"] += enc_acts[li].T @ dx
        grads[f"enc{li}_b"] += dx.sum(axis=0)
        dx = dx @ params[f"enc{li}_W"].T
    return grads


def loss_and_gradient(params: dict, batch: list[SequenceSample]):
    obs, actions, labels = _batch_tensors(batch)
    logits, cache = forward(params, obs, actions)
    value = _bce_from_logits(logits, labels)
    dlogits = sigmoid(logits) - labels.astype(np.float64)
    return value, backward(params, cache, dlogits)


def gradient(params: dict, batch: list[SequenceSample]) -> dict[str, np.ndarray]:
    return loss_and_gradient(params, batch)[1]


class Adam:
    """Adaptive-moment gradient descent, deterministic given update order."""

    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def update(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for k in sorted(params):
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * grads[k]
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * grads[k] ** 2
            params[k] = params[k] - self.lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + self.eps)


def train(
    params: dict,
    dataset: Dataset,
    config: ModelConfig,
    train_config: TrainConfig,
    opt: "Adam | None" = None,
) -> tuple[dict, list[float]]:
    """Minimize the disengagement cross-entropy on rebalanced minibatches.

    Returns fresh parameters and the per-step loss history; the input params
    are not mutated.  Raises InsufficientClassError via the sampler if the
    dataset has no disengagements.  Passing the previous phase's optimizer
    continues its moment estimates instead of restarting them (restarting
    adaptive moments at full learning rate jolts an already-good model).
    """
    rng = np.random.default_rng(train_config.seed)
    params = {k: v.copy() for k, v in params.items()}
    if opt is None:
        opt = Adam(params, train_config.learning_rate, train_config.beta1, train_config.beta2, train_config.eps)
    history = []
    half = train_config.batch_size // 2
    for _ in range(train_config.steps):
        batch = dataset.sample_minibatch(train_config.batch_size, config.horizon, rng)
        n_pos = sum(bool(s.labels.any()) for s in batch)
        assert n_pos == half, f"rebalancing violated: {n_pos} positives in batch of {len(batch)}"
        value, grads = loss_and_gradient(params, batch)
        opt.update(params, grads)
        history.append(value)
    return params, history


# ---------------------------------------------------------------------------
# checkpoints (land-model.v1): JSON header line + raw little-endian float64
# ---------------------------------------------------------------------------

def save_model(path, config: ModelConfig, params: dict) -> None:
    header = {
        "format": MODEL_FORMAT,
        "config": config.to_dict(),
        "arrays": [{"name": n, "shape": list(s)} for n, s in param_shapes(config)],
    }
    blob = bytearray(json.dumps(header, separators=(",", ":")).encode("ascii"))
    blob += b"\n"
    for name, shape in param_shapes(config):
        arr = params[name]
        if arr.shape != shape:
            raise ValueError(f"param {name} has shape {arr.shape}, expected {shape}")
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_model(path) -> tuple[ModelConfig, dict]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl].decode("ascii"))
    if header.get("format") != MODEL_FORMAT:
        raise ValueError(f"expected format {MODEL_FORMAT!r}, got {header.get('format')!r}")
    config = ModelConfig.from_dict(header["config"])
    params = {}
    offset = nl + 1
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        params[entry["name"]] = arr.astype(np.float64)
        offset += count * 8
    if offset != len(raw):
        raise ValueError(f"checkpoint has {len(raw) - offset} trailing bytes")
    return config, params
