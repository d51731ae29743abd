"""Conditioned velocity field v(x_t, t, c, s).

Conditioning follows a token recipe: scalar targets are sinusoidally
embedded, projected into a shared token space (one projection per reward,
one for time, a learned table for the condition label), and the condition
tokens are mean-pooled into the trunk input alongside x_t and the time
stream. The trunk is a stack of affine+gelu layers whose first layer
consumes the three input streams through separate weight blocks (equivalent
to concatenation).

Two forward implementations exist on purpose: ``build_field_graph`` records
the computation on a diffcore tape for training, and ``vector_field`` /
``vector_field_batch`` run the identical arithmetic in plain numpy for
sampling. They follow the same operation order and are cross-checked by
tests.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .diffcore import Graph, _gelu

TIME_EMBED_SCALE = 1000.0
EMBED_MAX_PERIOD = 10_000.0
CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Dims:
    """Network sizes: sinusoidal width, token width, trunk width, layer count."""

    d_sin: int = 64
    d: int = 64
    h: int = 128
    layers: int = 4

    def __post_init__(self):
        if self.d_sin <= 0 or self.d_sin % 2:
            raise ValueError(f"d_sin must be positive and even, got {self.d_sin}")
        if min(self.d, self.h) <= 0 or self.layers < 2:
            raise ValueError(f"bad dims {self}")


@dataclass(frozen=True)
class Mode:
    """Training configuration flag: which conditioning inputs are active."""

    kind: str  # "baseline" | "single" | "multi"
    reward: int | None = None

    def __post_init__(self):
        if self.kind not in ("baseline", "single", "multi"):
            raise ValueError(f"unknown mode kind {self.kind!r}")
        if (self.kind == "single") != (self.reward is not None):
            raise ValueError("single-reward mode needs a reward index, others must not have one")

    @classmethod
    def parse(cls, text: str) -> "Mode":
        if text == "baseline":
            return cls("baseline")
        if text == "multi":
            return cls("multi")
        if text.startswith("single:"):
            return cls("single", int(text.split(":", 1)[1]))
        raise ValueError(f"cannot parse mode {text!r} (expected baseline|single:<j>|multi)")

    def __str__(self) -> str:
        return f"single:{self.reward}" if self.kind == "single" else self.kind

    def active_rewards(self, n_rewards: int) -> tuple[int, ...]:
        if self.kind == "multi":
            return tuple(range(n_rewards))
        if self.kind == "single":
            if not 0 <= self.reward < n_rewards:
                raise ValueError(f"reward index {self.reward} out of range [0, {n_rewards})")
            return (self.reward,)
        return ()


BASELINE = Mode("baseline")
MULTI = Mode("multi")


def embed_scalars(values, d_sin: int, scale: float) -> np.ndarray:
    """Sinusoidal embedding of scaled scalars: [n] -> [n, d_sin].

    Frequencies are geometrically spaced over d_sin/2 (sin, cos) pairs;
    reward targets use scale B-1 (so normalized targets embed as bin
    positions), time uses scale 1000.
    """
    if d_sin <= 0 or d_sin % 2:
        raise ValueError(f"d_sin must be positive and even, got {d_sin}")
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    half = d_sin // 2
    freqs = EMBED_MAX_PERIOD ** (-np.arange(half) / half)
    angles = np.outer(values * scale, freqs)
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


def embed_scalar(u: float, d_sin: int, scale: float) -> np.ndarray:
    """Single-value view of :func:`embed_scalars`."""
    return embed_scalars([u], d_sin, scale)[0]


@dataclass
class VectorFieldParams:
    """All weights of the conditioned velocity network, as named tensors."""

    dims: Dims
    mode: Mode
    n_rewards: int
    n_conditions: int
    bins: int
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def param_count(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    def digest(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.tensors):
            h.update(name.encode())
            h.update(self.tensors[name].astype("<f8").tobytes())
        h.update(str(self.mode).encode())
        h.update(repr((self.dims, self.n_rewards, self.n_conditions, self.bins)).encode())
        return h.hexdigest()

    def with_tensors(self, tensors: dict[str, np.ndarray]) -> "VectorFieldParams":
        return replace(self, tensors=tensors)


def _trunk_widths(dims: Dims) -> list[tuple[int, int]]:
    # first layer input = x_t (2) + time stream (d) + pooled tokens (d)
    widths = [2 + 2 * dims.d] + [dims.h] * (dims.layers - 1) + [2]
    return list(zip(widths[:-1], widths[1:]))


def init_params(seed: int, dims: Dims = Dims(), mode: Mode = MULTI,
                n_rewards: int = 4, n_conditions: int = 8,
                bins: int = 8) -> VectorFieldParams:
    """He-initialized trunk and projections, Normal(0, 0.02) condition table,
    zero-initialized final layer (the initial field is identically zero)."""
    rng = np.random.default_rng(seed)
    t: dict[str, np.ndarray] = {}
    t["cond_embed"] = rng.normal(0.0, 0.02, (n_conditions, dims.d))
    t["time_proj"] = rng.normal(0.0, np.sqrt(2.0 / dims.d_sin), (dims.d_sin, dims.d))
    for j in mode.active_rewards(n_rewards):
        t[f"reward_proj_{j}"] = rng.normal(
            0.0, np.sqrt(2.0 / dims.d_sin), (dims.d_sin, dims.d)
        )
    pairs = _trunk_widths(dims)
    fan0 = pairs[0][0]
    std0 = np.sqrt(2.0 / fan0)
    # first layer split into per-stream blocks; same fan-in as the
    # concatenated form so the init distribution matches
    t["l0_wx"] = rng.normal(0.0, std0, (2, dims.h))
    t["l0_wt"] = rng.normal(0.0, std0, (dims.d, dims.h))
    t["l0_wk"] = rng.normal(0.0, std0, (dims.d, dims.h))
    t["l0_b"] = np.zeros(dims.h)
    for i, (fan_in, fan_out) in enumerate(pairs[1:], start=1):
        if i == len(pairs) - 1:
            t[f"l{i}_w"] = np.zeros((fan_in, fan_out))
            t[f"l{i}_b"] = np.zeros(fan_out)
        else:
            t[f"l{i}_w"] = rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, fan_out))
            t[f"l{i}_b"] = np.zeros(fan_out)
    return VectorFieldParams(
        dims=dims, mode=mode, n_rewards=n_rewards, n_conditions=n_conditions,
        bins=bins, tensors=t,
    )


def _check_targets(params: VectorFieldParams, s_hat) -> np.ndarray | None:
    active = params.mode.active_rewards(params.n_rewards)
    if not active:
        return None
    if s_hat is None:
        raise ValueError(f"mode {params.mode} needs reward targets, got none")
    arr = np.asarray(s_hat, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[1] != params.n_rewards:
        raise ValueError(
            f"expected {params.n_rewards} reward targets, got {arr.shape[1]}"
        )
    if not np.isfinite(arr).all():
        raise ValueError("non-finite reward target")
    return arr


def _pool_order(tokens) -> list[int]:
    # Canonical accumulation order keyed by content: permuting the token
    # list never changes the pooled sum, bit for bit.
    return sorted(range(len(tokens)), key=lambda i: tokens[i].tobytes())


def _tokens_batch(params: VectorFieldParams, cs: np.ndarray,
                  s_hat: np.ndarray | None) -> list[np.ndarray]:
    d_sin = params.dims.d_sin
    tokens = [params.tensors["cond_embed"][cs]]
    for j in params.mode.active_rewards(params.n_rewards):
        emb = embed_scalars(s_hat[:, j], d_sin, params.bins - 1)
        tokens.append(emb @ params.tensors[f"reward_proj_{j}"])
    return tokens


def condition_tokens(params: VectorFieldParams, c: int, s_hat=None) -> list[np.ndarray]:
    """Token list for one sample: [condition token] ++ active reward tokens."""
    if not 0 <= c < params.n_conditions:
        raise ValueError(f"condition {c} out of range [0, {params.n_conditions})")
    arr = _check_targets(params, s_hat)
    cs = np.asarray([c])
    toks = _tokens_batch(params, cs, arr)
    return [t[0] for t in toks]


def _pool(tokens: list[np.ndarray]) -> np.ndarray:
    order = _pool_order(tokens)
    acc = tokens[order[0]]
    for i in order[1:]:
        acc = acc + tokens[i]
    return acc * (1.0 / len(tokens))


def vector_field_batch(params: VectorFieldParams, x_t: np.ndarray, t,
                       cs: np.ndarray, s_hat=None) -> np.ndarray:
    """Velocity prediction for a batch: x_t [n,2], t scalar or [n],
    cs [n] ints, s_hat [N] or [n,N] (ignored in baseline mode)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.ndim != 2 or x_t.shape[1] != 2:
        raise ValueError(f"x_t must be [n, 2], got {x_t.shape}")
    if not np.isfinite(x_t).all():
        raise ValueError("non-finite x_t")
    n = x_t.shape[0]
    cs = np.asarray(cs)
    if ((cs < 0) | (cs >= params.n_conditions)).any():
        raise ValueError(f"condition out of range [0, {params.n_conditions})")
    t_arr = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,))
    if not np.isfinite(t_arr).all():
        raise ValueError("non-finite t")
    s_arr = _check_targets(params, s_hat)
    if s_arr is not None and s_arr.shape[0] == 1:
        s_arr = np.broadcast_to(s_arr, (n, params.n_rewards))

    p = params.tensors
    tokens = _tokens_batch(params, cs, s_arr)
    pooled = _pool(tokens)
    temb = embed_scalars(t_arr, params.dims.d_sin, TIME_EMBED_SCALE)
    tproj = temb @ p["time_proj"]
    # same operation order as the tape path in build_field_graph
    a = x_t @ p["l0_wx"] + p["l0_b"]
    a = a + tproj @ p["l0_wt"]
    a = a + pooled @ p["l0_wk"]
    h = _gelu(a)
    last = params.dims.layers - 1
    for i in range(1, last):
        h = _gelu(h @ p[f"l{i}_w"] + p[f"l{i}_b"])
    return h @ p[f"l{last}_w"] + p[f"l{last}_b"]


def vector_field(params: VectorFieldParams, x_t, t: float, c: int, s_hat=None) -> np.ndarray:
    """Single-sample velocity: returns a length-2 vector."""
    out = vector_field_batch(
        params, np.asarray(x_t, dtype=np.float64).reshape(1, 2), t,
        np.asarray([c]), s_hat,
    )
    return out[0]


def build_field_graph(g: Graph, params: VectorFieldParams, x_t: np.ndarray, t,
                      cs: np.ndarray, s_hat=None) -> tuple[int, dict[str, int]]:
    """Record the batched forward pass on a tape.

    Returns (output node id, parameter-leaf node ids by tensor name) so the
    caller can run backward and collect parameter gradients.
    """
    n = x_t.shape[0]
    t_arr = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,))
    s_arr = _check_targets(params, s_hat)
    if s_arr is not None and s_arr.shape[0] == 1:
        s_arr = np.broadcast_to(s_arr, (n, params.n_rewards))

    param_ids = {name: g.leaf(tensor) for name, tensor in params.tensors.items()}
    x_id = g.leaf(x_t)

    onehot = np.zeros((n, params.n_conditions))
    onehot[np.arange(n), np.asarray(cs)] = 1.0
    token_ids = [g.matmul(g.leaf(onehot), param_ids["cond_embed"])]
    for j in params.mode.active_rewards(params.n_rewards):
        emb = embed_scalars(s_arr[:, j], params.dims.d_sin, params.bins - 1)
        token_ids.append(g.matmul(g.leaf(emb), param_ids[f"reward_proj_{j}"]))

    order = _pool_order([g.value(tid) for tid in token_ids])
    acc = token_ids[order[0]]
    for i in order[1:]:
        acc = g.add(acc, token_ids[i])
    pooled = g.mul(acc, g.leaf(1.0 / len(token_ids)))

    temb = embed_scalars(t_arr, params.dims.d_sin, TIME_EMBED_SCALE)
    tproj = g.matmul(g.leaf(temb), param_ids["time_proj"])

    a = g.affine(x_id, param_ids["l0_wx"], param_ids["l0_b"])
    a = g.add(a, g.matmul(tproj, param_ids["l0_wt"]))
    a = g.add(a, g.matmul(pooled, param_ids["l0_wk"]))
    h = g.gelu(a)
    last = params.dims.layers - 1
    for i in range(1, last):
        h = g.gelu(g.affine(h, param_ids[f"l{i}_w"], param_ids[f"l{i}_b"]))
    out = g.affine(h, param_ids[f"l{last}_w"], param_ids[f"l{last}_b"])
    return out, param_ids


# --- checkpoint persistence -------------------------------------------------


@dataclass
class ModelCheckpoint:
    """Trained params plus provenance: step count and training-config digest."""

    params: VectorFieldParams
    step: int
    config_digest: str

    @property
    def bins(self) -> int:
        return self.params.bins

    @property
    def n_rewards(self) -> int:
        return self.params.n_rewards

    @property
    def n_conditions(self) -> int:
        return self.params.n_conditions

    def digest(self) -> str:
        return self.params.digest()


def _checkpoint_payload(ckpt: ModelCheckpoint) -> dict:
    p = ckpt.params
    return {
        "version": CHECKPOINT_FORMAT_VERSION,
        "kind": "checkpoint",
        "step": ckpt.step,
        "config_digest": ckpt.config_digest,
        "mode": str(p.mode),
        "bins": p.bins,
        "n_rewards": p.n_rewards,
        "n_conditions": p.n_conditions,
        "dims": {"d_sin": p.dims.d_sin, "d": p.dims.d, "h": p.dims.h,
                 "layers": p.dims.layers},
        "tensors": {
            name: {
                "shape": list(arr.shape),
                "data": base64.b64encode(arr.astype("<f8").tobytes()).decode(),
            }
            for name, arr in p.tensors.items()
        },
    }


def save_checkpoint(ckpt: ModelCheckpoint, path) -> str:
    """Write a digest-protected JSON checkpoint; returns the content digest."""
    payload = _checkpoint_payload(ckpt)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(canonical.encode()).hexdigest()
    Path(path).write_text(json.dumps({"digest": digest, **payload}, sort_keys=True) + "\n")
    return digest


def load_checkpoint(path) -> ModelCheckpoint:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(
            f"unsupported checkpoint version {doc.get('version')!r}, "
            f"expected {CHECKPOINT_FORMAT_VERSION}"
        )
    stored = doc.pop("digest", None)
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    actual = hashlib.sha256(canonical.encode()).hexdigest()
    if stored != actual:
        raise ValueError(f"checkpoint digest mismatch: header {stored}, content {actual}")
    dims = Dims(**doc["dims"])
    tensors = {}
    for name, spec in doc["tensors"].items():
        raw = base64.b64decode(spec["data"])
        tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(spec["shape"]).copy()
    params = VectorFieldParams(
        dims=dims,
        mode=Mode.parse(doc["mode"]),
        n_rewards=doc["n_rewards"],
        n_conditions=doc["n_conditions"],
        bins=doc["bins"],
        tensors=tensors,
    )
    return ModelCheckpoint(params=params, step=doc["step"],
                           config_digest=doc["config_digest"])
