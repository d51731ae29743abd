"""Experiment harness: reward measurement, target-weight sweeps, best-of-N
scaling curves, and machine-readable reports (JSON + CSV siblings).

Every curve embeds its provenance (checkpoint digest, seeds, grids) so a
report can be regenerated bit-identically from its own metadata.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import ModelCheckpoint
from .rewards import score_batch
from .sample import DEFAULT_ODE_STEPS, GuidanceSpec, noise_for, _guided_field, _integrate

REPORT_FORMAT_VERSION = 1
SCALING_CHUNK = 8192


class EmptyRunError(ValueError):
    pass


@dataclass(frozen=True)
class MeasuredRewards:
    """Per-reward statistics over a sample set."""

    mean: tuple[float, ...]
    std: tuple[float, ...]
    minimum: tuple[float, ...]
    maximum: tuple[float, ...]
    count: int


def measure_rewards(points, conditions, n_conditions: int = 8) -> MeasuredRewards:
    points = np.asarray(points, dtype=np.float64)
    if points.size == 0:
        raise EmptyRunError("cannot measure an empty sample set")
    scores = score_batch(points, np.asarray(conditions), n_conditions)
    return MeasuredRewards(
        mean=tuple(float(v) for v in scores.mean(axis=0)),
        std=tuple(float(v) for v in scores.std(axis=0)),
        minimum=tuple(float(v) for v in scores.min(axis=0)),
        maximum=tuple(float(v) for v in scores.max(axis=0)),
        count=int(scores.shape[0]),
    )


@dataclass(frozen=True)
class SweepCurve:
    """One experiment curve: per axis point, mean and standard error of every
    measured reward over ``samples_per_point`` draws."""

    kind: str
    axis: tuple[float, ...]
    mean: tuple[tuple[float, ...], ...]
    se: tuple[tuple[float, ...], ...]
    samples_per_point: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(a >= b for a, b in zip(self.axis, self.axis[1:])) or not self.axis:
            raise ValueError(f"axis must be non-empty and strictly increasing: {self.axis}")
        if self.samples_per_point < 100:
            raise ValueError(
                f"need at least 100 samples per point, got {self.samples_per_point}"
            )
        if len(self.mean) != len(self.axis) or len(self.se) != len(self.axis):
            raise ValueError("per-point statistics do not match the axis length")

    def reward_means(self, j: int) -> list[float]:
        return [row[j] for row in self.mean]

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "axis": list(self.axis),
            "mean": [list(r) for r in self.mean],
            "se": [list(r) for r in self.se],
            "samples_per_point": self.samples_per_point,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SweepCurve":
        return cls(
            kind=doc["kind"],
            axis=tuple(float(v) for v in doc["axis"]),
            mean=tuple(tuple(float(v) for v in r) for r in doc["mean"]),
            se=tuple(tuple(float(v) for v in r) for r in doc["se"]),
            samples_per_point=int(doc["samples_per_point"]),
            provenance=doc.get("provenance", {}),
        )

    def to_csv(self) -> str:
        n = len(self.mean[0])
        header = ["axis"]
        for j in range(n):
            header += [f"mean_r{j}", f"se_r{j}"]
        header.append("n")
        lines = [",".join(header)]
        for a, m, s in zip(self.axis, self.mean, self.se):
            cells = [repr(a)]
            for j in range(n):
                cells += [repr(m[j]), repr(s[j])]
            cells.append(str(self.samples_per_point))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _stats_rows(scores: np.ndarray) -> tuple[tuple, tuple]:
    mean = scores.mean(axis=0)
    se = scores.std(axis=0) / math.sqrt(scores.shape[0])
    return tuple(float(v) for v in mean), tuple(float(v) for v in se)


def sweep_reward_weight(ckpt: ModelCheckpoint, reward: int, grid,
                        samples_per_point: int = 512,
                        omega: float = 2.0,
                        ode_steps: int = DEFAULT_ODE_STEPS,
                        seed: int = 0) -> SweepCurve:
    """Vary one positive-target component over ``grid`` (others pinned to 1,
    negative target all zeros) and measure every reward at each point."""
    grid = [float(g) for g in grid]
    if not grid:
        raise EmptyRunError("empty sweep grid")
    if any(not 0.0 <= g <= 1.0 for g in grid):
        raise ValueError(f"grid values must lie in [0, 1]: {grid}")
    if not 0 <= reward < ckpt.n_rewards:
        raise ValueError(f"reward index {reward} out of range [0, {ckpt.n_rewards})")
    params = ckpt.params
    conditions = np.arange(samples_per_point) % ckpt.n_conditions
    means, ses = [], []
    for pidx, g in enumerate(grid):
        s_plus = [1.0] * ckpt.n_rewards
        s_plus[reward] = g
        spec = GuidanceSpec(tuple(s_plus), (0.0,) * ckpt.n_rewards, omega)
        eps = noise_for((seed, pidx), samples_per_point)
        pts = _integrate(_guided_field(params, conditions, spec), eps, ode_steps)
        m, s = _stats_rows(score_batch(pts, conditions, ckpt.n_conditions))
        means.append(m)
        ses.append(s)
    return SweepCurve(
        kind="reward_weight_sweep",
        axis=tuple(grid),
        mean=tuple(means),
        se=tuple(ses),
        samples_per_point=samples_per_point,
        provenance={
            "checkpoint_digest": ckpt.digest(),
            "config_digest": ckpt.config_digest,
            "reward": reward,
            "omega": omega,
            "ode_steps": ode_steps,
            "seed": seed,
            "grid": grid,
            "conditions": "cycled",
        },
    )


def scaling_curve(ckpt: ModelCheckpoint, ns, selector: int,
                  trials: int = 1000,
                  guidance: GuidanceSpec | None = None,
                  ode_steps: int = DEFAULT_ODE_STEPS,
                  seed: int = 0) -> SweepCurve:
    """Best-of-N curve over ``ns`` (powers of two, ascending).

    Per trial t, the max-N candidate pool is drawn once from the per-sample
    noise streams (seed, t, i); best-of-N for smaller N is the prefix
    maximum. Candidate i never depends on N, so this is distributionally
    identical to independent best_of_n calls per N, and makes the curve's
    monotonicity exact rather than statistical. Trial conditions cycle
    through the label set.
    """
    ns = [int(n) for n in ns]
    if not ns:
        raise EmptyRunError("empty N grid")
    if any(n < 1 or (n & (n - 1)) for n in ns):
        raise ValueError(f"Ns must be powers of two: {ns}")
    if sorted(ns) != ns or len(set(ns)) != len(ns):
        raise ValueError(f"Ns must be strictly increasing: {ns}")
    if not 0 <= selector < ckpt.n_rewards:
        raise ValueError(f"selector {selector} out of range [0, {ckpt.n_rewards})")
    params = ckpt.params
    if guidance is None:
        guidance = GuidanceSpec.default(ckpt.n_rewards)

    max_n = ns[-1]
    total = trials * max_n
    conditions = (np.arange(trials) % ckpt.n_conditions).repeat(max_n)
    eps = np.empty((total, 2))
    for t in range(trials):
        eps[t * max_n:(t + 1) * max_n] = noise_for((seed, t), max_n)
    points = np.empty((total, 2))
    for lo in range(0, total, SCALING_CHUNK):
        hi = min(lo + SCALING_CHUNK, total)
        field_fn = _guided_field(params, conditions[lo:hi], guidance)
        points[lo:hi] = _integrate(field_fn, eps[lo:hi].copy(), ode_steps)
    scores = score_batch(points, conditions, ckpt.n_conditions)
    scores = scores.reshape(trials, max_n, ckpt.n_rewards)

    means, ses = [], []
    sel = scores[:, :, selector]
    for n in ns:
        best_idx = sel[:, :n].argmax(axis=1)
        chosen = scores[np.arange(trials), best_idx]  # [trials, N_rewards]
        m, s = _stats_rows(chosen)
        means.append(m)
        ses.append(s)
    return SweepCurve(
        kind="best_of_n_scaling",
        axis=tuple(float(n) for n in ns),
        mean=tuple(means),
        se=tuple(ses),
        samples_per_point=trials,
        provenance={
            "checkpoint_digest": ckpt.digest(),
            "config_digest": ckpt.config_digest,
            "selector": selector,
            "guidance": {"s_plus": list(guidance.s_plus),
                         "s_minus": list(guidance.s_minus),
                         "omega": guidance.omega},
            "ode_steps": ode_steps,
            "seed": seed,
            "trials": trials,
            "protocol": "nested-prefix candidate pools",
            "conditions": "cycled per trial",
        },
    )


@dataclass(frozen=True)
class Criterion:
    """A recorded pass/fail verdict: value `op` threshold."""

    name: str
    value: float
    threshold: float
    op: str  # "gt" | "ge" | "lt" | "le"
    passed: bool

    @staticmethod
    def evaluate(value: float, threshold: float, op: str) -> bool:
        if op == "gt":
            return value > threshold
        if op == "ge":
            return value >= threshold
        if op == "lt":
            return value < threshold
        if op == "le":
            return value <= threshold
        raise ValueError(f"unknown criterion op {op!r}")

    @classmethod
    def check(cls, name: str, value: float, threshold: float, op: str) -> "Criterion":
        return cls(name, float(value), float(threshold), op,
                   cls.evaluate(value, threshold, op))

    def to_json_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "threshold": self.threshold,
                "op": self.op, "passed": self.passed}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Criterion":
        return cls(doc["name"], float(doc["value"]), float(doc["threshold"]),
                   doc["op"], bool(doc["passed"]))


def emit_report(artifacts: dict, path) -> dict:
    """Write a versioned JSON report plus one CSV sibling per curve.

    ``artifacts`` holds any of: "curves" (name -> SweepCurve), "criteria"
    (list of Criterion), "measurements" (name -> MeasuredRewards), and
    "config"/"seeds" (plain JSON). At least one curve, criterion, or
    measurement is required.
    """
    curves = artifacts.get("curves", {})
    criteria = artifacts.get("criteria", [])
    measurements = artifacts.get("measurements", {})
    if not curves and not criteria and not measurements:
        raise EmptyRunError("refusing to emit a report for an empty run")
    doc = {
        "version": REPORT_FORMAT_VERSION,
        "curves": {name: c.to_json_dict() for name, c in curves.items()},
        "criteria": [c.to_json_dict() for c in criteria],
        "measurements": {
            name: {"mean": list(m.mean), "std": list(m.std),
                   "min": list(m.minimum), "max": list(m.maximum),
                   "count": m.count}
            for name, m in measurements.items()
        },
        "config": artifacts.get("config", {}),
        "seeds": artifacts.get("seeds", {}),
    }
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    for name, curve in curves.items():
        path.with_name(f"{path.stem}.{name}.csv").write_text(curve.to_csv())
    return doc


def load_report(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != REPORT_FORMAT_VERSION:
        raise ValueError(
            f"unsupported report version {doc.get('version')!r}, "
            f"expected {REPORT_FORMAT_VERSION}"
        )
    return {
        "curves": {name: SweepCurve.from_json_dict(c)
                   for name, c in doc.get("curves", {}).items()},
        "criteria": [Criterion.from_json_dict(c) for c in doc.get("criteria", [])],
        "measurements": {
            name: MeasuredRewards(
                mean=tuple(m["mean"]), std=tuple(m["std"]),
                minimum=tuple(m["min"]), maximum=tuple(m["max"]),
                count=int(m["count"]),
            )
            for name, m in doc.get("measurements", {}).items()
        },
        "config": doc.get("config", {}),
        "seeds": doc.get("seeds", {}),
    }


def audit_report(report: dict) -> list[str]:
    """Recompute every stored verdict from its embedded value/threshold; any
    disagreement is returned (empty list = clean)."""
    problems = []
    for crit in report.get("criteria", []):
        expected = Criterion.evaluate(crit.value, crit.threshold, crit.op)
        if expected != crit.passed:
            problems.append(
                f"{crit.name}: stored verdict {crit.passed}, recomputed {expected}"
            )
    return problems
