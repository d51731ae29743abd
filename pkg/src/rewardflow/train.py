"""Flow-matching training over the enriched dataset.

Per step: draw noise and time, form the interpolant x_t = (1-t)x + t*eps,
regress the conditioned field onto (eps - x) in squared error, and take an
Adam step. Three configurations share the loop: no reward conditioning
(baseline), one reward, or all of them. During training the model is
periodically sampled (omega=0, max targets) and the measured reward means
are logged so runs can be compared for convergence speed.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diffcore import AdamState, Graph, NonFiniteError, adam_step, backward
from .model import (
    MULTI,
    Dims,
    Mode,
    ModelCheckpoint,
    VectorFieldParams,
    build_field_graph,
    init_params,
)
from .rewards import score_batch
from .sample import GuidanceSpec, sample_points
from .synthdata import ScoredRecord

# rng stream tags: batch sampling, noise/time draws, eval sampling, probe batch
_BATCH_STREAM = 101
_NOISE_STREAM = 202
_EVAL_STREAM = 303
_PROBE_STREAM = 404


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    steps: int
    batch_size: int = 256
    lr: float = 1e-3
    seed: int = 0
    mode: Mode = MULTI
    eval_every: int = 1000
    eval_samples: int = 512
    eval_ode_steps: int = 50
    dims: Dims = field(default_factory=Dims)
    bins: int = 8
    n_rewards: int = 4
    n_conditions: int = 8

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.eval_every < 1:
            raise ValueError(f"eval interval must be >= 1, got {self.eval_every}")

    def digest(self) -> str:
        doc = {
            "steps": self.steps, "batch_size": self.batch_size, "lr": self.lr,
            "seed": self.seed, "mode": str(self.mode),
            "eval_every": self.eval_every, "eval_samples": self.eval_samples,
            "eval_ode_steps": self.eval_ode_steps,
            "dims": [self.dims.d_sin, self.dims.d, self.dims.h, self.dims.layers],
            "bins": self.bins, "n_rewards": self.n_rewards,
            "n_conditions": self.n_conditions,
        }
        payload = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(frozen=True)
class MetricRow:
    step: int
    loss: float
    reward_means: tuple[float, ...]


@dataclass
class MetricLog:
    rows: list[MetricRow] = field(default_factory=list)

    def append(self, step: int, loss: float, reward_means) -> None:
        if self.rows and step <= self.rows[-1].step:
            raise ValueError(f"steps must be strictly increasing, got {step}")
        self.rows.append(MetricRow(step, float(loss), tuple(float(v) for v in reward_means)))

    def steps(self) -> list[int]:
        return [r.step for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        n = len(self.rows[0].reward_means) if self.rows else 4
        buf.write("step,loss," + ",".join(f"r{j}" for j in range(n)) + "\n")
        for r in self.rows:
            cells = [str(r.step), repr(r.loss)] + [repr(v) for v in r.reward_means]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "MetricLog":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("step,loss,"):
            raise ValueError("not a metric log: missing 'step,loss,...' header")
        log = cls()
        for ln in lines[1:]:
            cells = ln.split(",")
            log.append(int(cells[0]), float(cells[1]), [float(v) for v in cells[2:]])
        return log

    @classmethod
    def load(cls, path) -> "MetricLog":
        return cls.from_csv(Path(path).read_text())


def interpolate(x: np.ndarray, eps: np.ndarray, t) -> np.ndarray:
    """Linear interpolant x_t = (1-t)x + t*eps, per-sample t."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 1:
        t = t[:, None]
    return (1.0 - t) * x + t * eps


def _targets_for_mode(mode: Mode, records) -> np.ndarray | None:
    """Conditioning matrix per mode. Single-reward mode copies only its own
    column so the other components are provably never read."""
    if mode.kind == "baseline":
        return None
    if mode.kind == "single":
        j = mode.reward
        out = np.zeros((len(records), len(records[0].normalized)))
        out[:, j] = [r.normalized[j] for r in records]
        return out
    return np.asarray([r.normalized for r in records], dtype=np.float64)


def fm_loss(params: VectorFieldParams, batch, rng: np.random.Generator,
            ) -> tuple[float, dict[str, np.ndarray]]:
    """One flow-matching loss evaluation with parameter gradients.

    ``batch`` is a list of scored records; ``rng`` supplies the noise and
    time draws (eps first, then t), which makes the call reproducible from
    the generator state.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    xs = np.asarray([r.x for r in batch], dtype=np.float64)
    cs = np.asarray([r.c for r in batch], dtype=np.int64)
    s_hat = _targets_for_mode(params.mode, batch)

    n = len(batch)
    eps = rng.standard_normal((n, 2))
    t = rng.random(n)
    x_t = interpolate(xs, eps, t)
    target = eps - xs

    g = Graph()
    try:
        out_id, param_ids = build_field_graph(g, params, x_t, t, cs, s_hat)
        diff = g.sub(out_id, g.leaf(target))
        root = g.mul(g.sum(g.mul(diff, diff)), g.leaf(1.0 / n))
    except NonFiniteError as exc:
        raise _diagnose_nonfinite(x_t, exc) from None
    loss = float(g.value(root))
    if not math.isfinite(loss):
        raise _diagnose_nonfinite(x_t, None)
    grads = backward(g, root)
    return loss, {name: grads[nid] for name, nid in param_ids.items()}


def _diagnose_nonfinite(x_t: np.ndarray, cause) -> TrainingDivergedError:
    bad = np.argwhere(~np.isfinite(x_t).all(axis=1)).reshape(-1)
    if bad.size:
        return TrainingDivergedError(f"non-finite loss, offending sample index {bad[0]}")
    return TrainingDivergedError(f"non-finite loss from model state: {cause}")


def _eval_reward_means(params: VectorFieldParams, config: TrainConfig,
                       step: int) -> tuple[float, ...]:
    # omega=0: measure conditioning, not guidance
    guidance = GuidanceSpec(
        (1.0,) * config.n_rewards, (0.0,) * config.n_rewards, omega=0.0
    )
    conditions = np.arange(config.eval_samples) % config.n_conditions
    points = sample_points(
        params, guidance, conditions,
        steps=config.eval_ode_steps, seed=(config.seed, _EVAL_STREAM, step),
    )
    scores = score_batch(points, conditions, config.n_conditions)
    return tuple(float(v) for v in scores.mean(axis=0))


def train(config: TrainConfig, records) -> tuple[ModelCheckpoint, MetricLog]:
    """Run the seeded training loop; returns the final checkpoint and the
    eval-time metric log (rows at step 0, every eval_every steps, and the
    final step)."""
    if not records or not isinstance(records[0], ScoredRecord):
        raise ValueError(f"mode {config.mode}: training needs scored records")
    if config.mode.kind == "single" and not 0 <= config.mode.reward < config.n_rewards:
        raise ValueError(f"mode {config.mode} out of range for {config.n_rewards} rewards")

    m = len(records)
    params = init_params(
        config.seed, config.dims, config.mode,
        config.n_rewards, config.n_conditions, config.bins,
    )
    state = AdamState.for_params(params.tensors)
    batch_rng = np.random.default_rng((config.seed, _BATCH_STREAM))
    noise_rng = np.random.default_rng((config.seed, _NOISE_STREAM))
    probe_rng = np.random.default_rng((config.seed, _PROBE_STREAM))

    log = MetricLog()
    probe_idx = probe_rng.integers(0, m, size=config.batch_size)
    probe_loss, _ = fm_loss(params, [records[i] for i in probe_idx], probe_rng)
    log.append(0, probe_loss, _eval_reward_means(params, config, 0))

    loss = probe_loss
    for step in range(1, config.steps + 1):
        idx = batch_rng.integers(0, m, size=config.batch_size)
        batch = [records[i] for i in idx]
        try:
            loss, grads = fm_loss(params, batch, noise_rng)
        except TrainingDivergedError as exc:
            raise TrainingDivergedError(f"step {step}: {exc}") from None
        tensors, state = adam_step(params.tensors, grads, state, config.lr)
        params = params.with_tensors(tensors)
        if step % config.eval_every == 0 or step == config.steps:
            log.append(step, loss, _eval_reward_means(params, config, step))

    ckpt = ModelCheckpoint(params=params, step=config.steps,
                           config_digest=config.digest())
    return ckpt, log


@dataclass(frozen=True)
class SpeedupResult:
    """Step-ratio at which one run reaches another run's final reward level.

    ``reached`` is False when the candidate log never attains the baseline's
    final value; ``ratio`` is +inf in that case.
    """

    ratio: float
    reached: bool
    baseline_final: float
    reached_step: int | None


def convergence_speedup(baseline_log: MetricLog, candidate_log: MetricLog,
                        reward: int) -> SpeedupResult:
    """(last baseline step) / (first candidate step whose measured reward
    meets the baseline's final value). Step-0 rows are not candidates, so the
    ratio is always positive and finite when reached."""
    if not baseline_log.rows or not candidate_log.rows:
        raise ValueError("empty metric log")
    if baseline_log.steps() != candidate_log.steps():
        raise ValueError(
            f"logs do not share an eval grid: {baseline_log.steps()[:5]}... vs "
            f"{candidate_log.steps()[:5]}..."
        )
    n_rewards = len(baseline_log.rows[0].reward_means)
    if not 0 <= reward < n_rewards:
        raise ValueError(f"reward index {reward} out of range [0, {n_rewards})")
    baseline_final = baseline_log.rows[-1].reward_means[reward]
    last_step = baseline_log.rows[-1].step
    for row in candidate_log.rows:
        if row.step > 0 and row.reward_means[reward] >= baseline_final:
            return SpeedupResult(
                ratio=last_step / row.step, reached=True,
                baseline_final=baseline_final, reached_step=row.step,
            )
    return SpeedupResult(
        ratio=math.inf, reached=False,
        baseline_final=baseline_final, reached_step=None,
    )
