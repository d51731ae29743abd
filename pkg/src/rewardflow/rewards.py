"""Analytic four-reward suite, quantile bin calibration, and bin assignment.

The rewards score a 2D point ``x`` under a condition label ``c``. They are
deliberately in tension with each other (radius 1 vs radius 1.5, condition
direction vs the x-axis) so that pushing one reward visibly trades off
against another.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

N_REWARDS = 4
DEFAULT_BINS = 8
DEFAULT_CONDITIONS = 8
CALIBRATION_FORMAT_VERSION = 1


@dataclass(frozen=True)
class RewardSpec:
    """One axis of the scoring suite."""

    id: int
    name: str
    description: str
    range_hint: tuple[float, float]


REWARD_SUITE: tuple[RewardSpec, ...] = (
    RewardSpec(0, "radius_fidelity", "negative distance of |x| from the unit circle", (-2.0, 0.0)),
    RewardSpec(1, "condition_alignment", "cosine of the angle between x and its condition direction", (-1.0, 1.0)),
    RewardSpec(2, "axis_preference", "negative distance from the horizontal axis", (-2.0, 0.0)),
    RewardSpec(3, "outer_ring_preference", "negative squared distance of |x| from radius 1.5", (-2.25, 0.0)),
)


@dataclass(frozen=True)
class RewardVector:
    """Raw scores for one sample, one entry per reward."""

    values: tuple[float, float, float, float]

    def __post_init__(self):
        if len(self.values) != N_REWARDS:
            raise ValueError(f"expected {N_REWARDS} scores, got {len(self.values)}")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError(f"non-finite reward values: {self.values}")


def score_batch(xs: np.ndarray, cs: np.ndarray, n_conditions: int = DEFAULT_CONDITIONS) -> np.ndarray:
    """Vectorized scoring: xs [n, 2], cs [n] ints -> [n, 4] float64."""
    xs = np.asarray(xs, dtype=np.float64)
    cs = np.asarray(cs)
    if xs.ndim != 2 or xs.shape[1] != 2:
        raise ValueError(f"expected points of shape [n, 2], got {xs.shape}")
    if not np.isfinite(xs).all():
        raise ValueError("non-finite point in batch")
    if cs.shape != (xs.shape[0],):
        raise ValueError(f"conditions shape {cs.shape} does not match points {xs.shape}")
    if ((cs < 0) | (cs >= n_conditions)).any():
        raise ValueError(f"condition out of range [0, {n_conditions})")

    radius = np.hypot(xs[:, 0], xs[:, 1])
    # atan2(0, 0) == 0 by numpy convention, which is the documented behaviour
    # for the origin
    angle = np.arctan2(xs[:, 1], xs[:, 0])
    target_angle = 2.0 * np.pi * cs / n_conditions
    out = np.empty((xs.shape[0], N_REWARDS))
    out[:, 0] = -np.abs(radius - 1.0)
    out[:, 1] = np.cos(angle - target_angle)
    out[:, 2] = -np.abs(xs[:, 1])
    out[:, 3] = -((radius - 1.5) ** 2)
    return out


def score_sample(x, c: int, n_conditions: int = DEFAULT_CONDITIONS) -> RewardVector:
    """Score one point under condition ``c`` with the fixed analytic suite."""
    xs = np.asarray(x, dtype=np.float64).reshape(1, 2)
    scores = score_batch(xs, np.asarray([c]), n_conditions)[0]
    return RewardVector(tuple(float(v) for v in scores))


@dataclass(frozen=True)
class BinCalibration:
    """Per-reward interior quantile edges defining equal-population bins.

    ``edges[j]`` holds B-1 non-decreasing cut points for reward j; a raw
    score falls into the bin equal to the count of edges strictly below it.
    """

    bins: int
    calibration_size: int
    edges: tuple[tuple[float, ...], ...]
    reward_names: tuple[str, ...]

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError(f"need at least 2 bins, got {self.bins}")
        for j, e in enumerate(self.edges):
            if len(e) != self.bins - 1:
                raise ValueError(f"reward {j}: expected {self.bins - 1} edges, got {len(e)}")
            if any(a > b for a, b in zip(e, e[1:])):
                raise ValueError(f"reward {j}: edges not sorted")

    @property
    def n_rewards(self) -> int:
        return len(self.edges)

    def to_json_dict(self) -> dict:
        return {
            "version": CALIBRATION_FORMAT_VERSION,
            "B": self.bins,
            "calibration_size": self.calibration_size,
            "edges": [list(e) for e in self.edges],
            "reward_names": list(self.reward_names),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "BinCalibration":
        if doc.get("version") != CALIBRATION_FORMAT_VERSION:
            raise ValueError(
                f"unsupported calibration version {doc.get('version')!r}, "
                f"expected {CALIBRATION_FORMAT_VERSION}"
            )
        return cls(
            bins=doc["B"],
            calibration_size=doc["calibration_size"],
            edges=tuple(tuple(float(v) for v in e) for e in doc["edges"]),
            reward_names=tuple(doc["reward_names"]),
        )

    def digest(self) -> str:
        payload = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "BinCalibration":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def calibrate_bins(calibration_scores, bins: int = DEFAULT_BINS) -> BinCalibration:
    """Build equal-population bin edges from per-reward score lists.

    Edge k of reward j is the calibration score at sorted rank
    ``ceil((k+1) * M / B) - 1`` (0-indexed), so assigning the calibration
    set back lands within one sample of M/B per bin.
    """
    if bins < 2:
        raise ValueError(f"need at least 2 bins, got {bins}")
    edges = []
    size = None
    for j, scores in enumerate(calibration_scores):
        arr = np.sort(np.asarray(scores, dtype=np.float64))
        if arr.size < bins:
            raise ValueError(
                f"reward {j}: {arr.size} calibration samples is fewer than {bins} bins"
            )
        if not np.isfinite(arr).all():
            raise ValueError(f"reward {j}: non-finite calibration score")
        if size is None:
            size = arr.size
        elif arr.size != size:
            raise ValueError("calibration score lists differ in length")
        ranks = [math.ceil((k + 1) * arr.size / bins) - 1 for k in range(bins - 1)]
        edge = tuple(float(arr[r]) for r in ranks)
        if edge and edge[0] == edge[-1] == float(arr[0]) == float(arr[-1]):
            logger.warning(
                "reward %d: constant score distribution, all samples will fall in bin 0", j
            )
        edges.append(edge)
    names = tuple(spec.name for spec in REWARD_SUITE[: len(edges)])
    if len(names) < len(edges):
        names = names + tuple(f"reward_{j}" for j in range(len(names), len(edges)))
    return BinCalibration(
        bins=bins, calibration_size=int(size), edges=tuple(edges), reward_names=names
    )


def assign_bin(cal: BinCalibration, j: int, score: float) -> int:
    """Count of edges strictly below the score; ties fall into the lower bin."""
    if not 0 <= j < cal.n_rewards:
        raise ValueError(f"reward index {j} out of range [0, {cal.n_rewards})")
    if not math.isfinite(score):
        raise ValueError(f"non-finite score {score!r}")
    edges = cal.edges[j]
    return int(sum(1 for e in edges if e < score))


def assign_bins_batch(cal: BinCalibration, scores: np.ndarray) -> np.ndarray:
    """Vectorized assignment: scores [n, N] -> bin indices [n, N]."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] != cal.n_rewards:
        raise ValueError(
            f"scores shape {scores.shape} does not match {cal.n_rewards} rewards"
        )
    if not np.isfinite(scores).all():
        raise ValueError("non-finite score in batch")
    out = np.empty(scores.shape, dtype=np.int64)
    for j in range(cal.n_rewards):
        # number of edges strictly less than s == searchsorted side='left'
        out[:, j] = np.searchsorted(np.asarray(cal.edges[j]), scores[:, j], side="left")
    return out


def normalize_target(bin_pos: float, bins: int) -> float:
    """Map a bin index (or fractional bin position) to [0, 1]."""
    if bins < 2:
        raise ValueError(f"need at least 2 bins, got {bins}")
    if not 0 <= bin_pos <= bins - 1:
        raise ValueError(f"bin position {bin_pos} out of range [0, {bins - 1}]")
    return float(bin_pos) / (bins - 1)
