"""Synthetic conditional 2D dataset: generation, reward enrichment, and
line-delimited JSON persistence.

Points are drawn as radius ~ Uniform(0.3, 2.0) around a per-condition
direction with angular noise, wide enough that every reward's score
distribution populates all bins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rewards
from .rewards import BinCalibration, assign_bins_batch, score_batch

DATASET_FORMAT_VERSION = 1
CALIBRATION_SUBSET = 10_000
RADIUS_RANGE = (0.3, 2.0)
ANGLE_NOISE_STD = 0.5


@dataclass(frozen=True)
class RawRecord:
    x: tuple[float, float]
    c: int


@dataclass(frozen=True)
class ScoredRecord:
    x: tuple[float, float]
    c: int
    scores: tuple[float, ...]
    bins: tuple[int, ...]
    normalized: tuple[float, ...]


def generate_dataset(n: int, n_conditions: int = rewards.DEFAULT_CONDITIONS,
                     seed: int = 0) -> list[RawRecord]:
    """Draw n seeded records. Vectorized draw order (conditions, radii,
    angle noise) is part of the determinism contract."""
    if n < 1:
        raise ValueError(f"need at least one record, got n={n}")
    if n_conditions < 1:
        raise ValueError(f"need at least one condition, got {n_conditions}")
    rng = np.random.default_rng(seed)
    cs = rng.integers(0, n_conditions, size=n)
    radii = rng.uniform(*RADIUS_RANGE, size=n)
    angles = 2.0 * np.pi * cs / n_conditions + rng.normal(0.0, ANGLE_NOISE_STD, size=n)
    xs = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
    return [
        RawRecord(x=(float(xs[i, 0]), float(xs[i, 1])), c=int(cs[i])) for i in range(n)
    ]


def records_to_arrays(records) -> tuple[np.ndarray, np.ndarray]:
    xs = np.asarray([r.x for r in records], dtype=np.float64).reshape(len(records), 2)
    cs = np.asarray([r.c for r in records], dtype=np.int64)
    return xs, cs


def scored_to_arrays(records) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(points [n,2], conditions [n], normalized targets [n,N]) for training."""
    xs, cs = records_to_arrays(records)
    norm = np.asarray([r.normalized for r in records], dtype=np.float64)
    return xs, cs, norm


def enrich_dataset(records, cal: BinCalibration,
                   n_conditions: int = rewards.DEFAULT_CONDITIONS) -> list[ScoredRecord]:
    """Score and bin every record, preserving order. Accepts raw or already
    scored records (the latter are re-scored, which makes enrichment
    idempotent)."""
    if cal.n_rewards != rewards.N_REWARDS:
        raise ValueError(
            f"calibration covers {cal.n_rewards} rewards, suite has {rewards.N_REWARDS}"
        )
    if not records:
        return []
    xs, cs = records_to_arrays(records)
    scores = score_batch(xs, cs, n_conditions)
    bins = assign_bins_batch(cal, scores)
    inv = 1.0 / (cal.bins - 1)
    out = []
    for i, rec in enumerate(records):
        out.append(
            ScoredRecord(
                x=(float(xs[i, 0]), float(xs[i, 1])),
                c=int(cs[i]),
                scores=tuple(float(v) for v in scores[i]),
                bins=tuple(int(v) for v in bins[i]),
                normalized=tuple(float(v * inv) for v in bins[i]),
            )
        )
    return out


def calibration_scores(records, subset: int = CALIBRATION_SUBSET,
                       n_conditions: int = rewards.DEFAULT_CONDITIONS) -> np.ndarray:
    """Score the calibration subset (the first ``subset`` records)."""
    head = records[:subset]
    xs, cs = records_to_arrays(head)
    return score_batch(xs, cs, n_conditions)


def build_calibration(records, bins: int = rewards.DEFAULT_BINS,
                      subset: int = CALIBRATION_SUBSET,
                      n_conditions: int = rewards.DEFAULT_CONDITIONS) -> BinCalibration:
    scores = calibration_scores(records, subset, n_conditions)
    return rewards.calibrate_bins([scores[:, j] for j in range(scores.shape[1])], bins)


def check_bin_coverage(records, bins: int) -> None:
    """Every (reward, bin) cell must be populated; asserted at build time for
    datasets of at least the calibration-subset size."""
    counts = np.zeros((rewards.N_REWARDS, bins), dtype=np.int64)
    for rec in records:
        for j, b in enumerate(rec.bins):
            counts[j, b] += 1
    empty = np.argwhere(counts == 0)
    if empty.size:
        pairs = [f"(reward {j}, bin {b})" for j, b in empty]
        raise ValueError(f"uncovered bins: {', '.join(pairs)}")


def _header(records, n_conditions: int, cal: BinCalibration | None) -> dict:
    scored = bool(records) and isinstance(records[0], ScoredRecord)
    return {
        "version": DATASET_FORMAT_VERSION,
        "kind": "scored" if scored else "raw",
        "n_rewards": rewards.N_REWARDS if scored else None,
        "bins": cal.bins if (scored and cal) else None,
        "n_conditions": n_conditions,
        "count": len(records),
        "calibration_digest": cal.digest() if (scored and cal) else None,
    }


def save_dataset(records, path, n_conditions: int = rewards.DEFAULT_CONDITIONS,
                 cal: BinCalibration | None = None) -> dict:
    """One JSON object per line: a header line, then one line per record."""
    header = _header(records, n_conditions, cal)
    path = Path(path)
    with path.open("w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        if header["kind"] == "scored":
            for rec in records:
                fh.write(json.dumps({
                    "x": list(rec.x), "c": rec.c,
                    "scores": list(rec.scores),
                    "bins": list(rec.bins),
                    "normalized": list(rec.normalized),
                }) + "\n")
        else:
            for rec in records:
                fh.write(json.dumps({"x": list(rec.x), "c": rec.c}) + "\n")
    return header


def load_dataset(path) -> tuple[dict, list]:
    """Read and verify a dataset file; returns (header, records)."""
    path = Path(path)
    records = []
    with path.open() as fh:
        first = fh.readline()
        if not first:
            raise ValueError(f"{path}: empty dataset file")
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:1: malformed header: {exc}") from None
        version = header.get("version")
        if version != DATASET_FORMAT_VERSION:
            raise ValueError(
                f"{path}: unsupported dataset version {version!r}, "
                f"expected {DATASET_FORMAT_VERSION}"
            )
        kind = header.get("kind")
        if kind not in ("raw", "scored"):
            raise ValueError(f"{path}: unknown dataset kind {kind!r}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                if kind == "scored":
                    rec = ScoredRecord(
                        x=tuple(float(v) for v in doc["x"]),
                        c=int(doc["c"]),
                        scores=tuple(float(v) for v in doc["scores"]),
                        bins=tuple(int(v) for v in doc["bins"]),
                        normalized=tuple(float(v) for v in doc["normalized"]),
                    )
                else:
                    rec = RawRecord(x=tuple(float(v) for v in doc["x"]), c=int(doc["c"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed record: {exc}") from None
            records.append(rec)
    expected = header.get("count")
    if expected != len(records):
        raise ValueError(
            f"{path}: count mismatch, header says {expected} records, found {len(records)}"
        )
    return header, records
