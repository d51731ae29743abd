import json

import numpy as np
import pytest

from rewardflow.rewards import DEFAULT_BINS, score_sample
from rewardflow.synthdata import (
    CALIBRATION_SUBSET,
    RawRecord,
    ScoredRecord,
    build_calibration,
    check_bin_coverage,
    enrich_dataset,
    generate_dataset,
    load_dataset,
    records_to_arrays,
    save_dataset,
)


@pytest.fixture(scope="module")
def small_dataset():
    records = generate_dataset(12_000, seed=0)
    cal = build_calibration(records, bins=DEFAULT_BINS)
    return records, cal, enrich_dataset(records, cal)


class TestGenerate:
    def test_seeded_regeneration_is_identical(self):
        a = generate_dataset(1000, seed=1234)
        b = generate_dataset(1000, seed=1234)
        assert a == b

    def test_different_seeds_differ(self):
        assert generate_dataset(50, seed=1) != generate_dataset(50, seed=2)

    def test_radius_marginal(self):
        records = generate_dataset(100_000, seed=3)
        xs, _ = records_to_arrays(records)
        radii = np.hypot(xs[:, 0], xs[:, 1])
        assert radii.min() >= 0.3
        assert radii.max() <= 2.0
        # Uniform(0.3, 2.0) has mean 1.15
        assert abs(radii.mean() - 1.15) < 0.02

    def test_condition_histogram(self):
        records = generate_dataset(80_000, n_conditions=8, seed=4)
        _, cs = records_to_arrays(records)
        counts = np.bincount(cs, minlength=8)
        assert (np.abs(counts - 10_000) <= 400).all()

    def test_n_zero_rejected(self):
        with pytest.raises(ValueError):
            generate_dataset(0)


class TestEnrich:
    def test_empty_list(self, small_dataset):
        _, cal, _ = small_dataset
        assert enrich_dataset([], cal) == []

    def test_single_record_composition(self, small_dataset):
        _, cal, _ = small_dataset
        [rec] = enrich_dataset([RawRecord(x=(1.0, 0.0), c=0)], cal)
        assert rec.scores == pytest.approx([0.0, 1.0, 0.0, -0.25])
        for j in range(4):
            assert 0 <= rec.bins[j] < cal.bins
            assert rec.normalized[j] == pytest.approx(rec.bins[j] / (cal.bins - 1))

    def test_scores_self_consistent(self, small_dataset):
        # independent second pass over the whole dataset
        _, _, scored = small_dataset
        for rec in scored[::97]:
            again = score_sample(rec.x, rec.c)
            assert tuple(again.values) == pytest.approx(rec.scores)

    def test_order_preserved(self, small_dataset):
        records, cal, scored = small_dataset
        assert len(scored) == len(records)
        assert all(s.x == r.x and s.c == r.c for s, r in zip(scored[:100], records[:100]))

    def test_idempotent(self, small_dataset):
        _, cal, scored = small_dataset
        again = enrich_dataset(scored[:500], cal)
        assert again == scored[:500]

    def test_bin_coverage(self, small_dataset):
        _, cal, scored = small_dataset
        check_bin_coverage(scored, cal.bins)  # raises on empty cells

    def test_coverage_failure_detected(self, small_dataset):
        _, cal, scored = small_dataset
        top_only = [r for r in scored if r.bins[0] == cal.bins - 1]
        with pytest.raises(ValueError, match="uncovered"):
            check_bin_coverage(top_only, cal.bins)


class TestCalibrationSubset:
    def test_uses_first_10k(self):
        records = generate_dataset(15_000, seed=9)
        cal_full = build_calibration(records)
        cal_head = build_calibration(records[:CALIBRATION_SUBSET])
        assert cal_full == cal_head
        assert cal_full.calibration_size == CALIBRATION_SUBSET


class TestSaveLoad:
    def test_round_trip_scored(self, small_dataset, tmp_path):
        _, cal, scored = small_dataset
        path = tmp_path / "data.jsonl"
        save_dataset(scored[:300], path, cal=cal)
        header, loaded = load_dataset(path)
        assert loaded == scored[:300]
        assert header["kind"] == "scored"
        assert header["count"] == 300
        assert header["bins"] == cal.bins
        assert header["calibration_digest"] == cal.digest()

    def test_round_trip_raw(self, tmp_path):
        records = generate_dataset(100, seed=5)
        path = tmp_path / "raw.jsonl"
        save_dataset(records, path)
        header, loaded = load_dataset(path)
        assert loaded == records
        assert header["kind"] == "raw"
        assert header["n_rewards"] is None

    def test_save_is_deterministic(self, small_dataset, tmp_path):
        _, cal, scored = small_dataset
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_dataset(scored[:200], p1, cal=cal)
        save_dataset(scored[:200], p2, cal=cal)
        assert p1.read_bytes() == p2.read_bytes()

    def test_truncation_detected(self, small_dataset, tmp_path):
        _, cal, scored = small_dataset
        path = tmp_path / "data.jsonl"
        save_dataset(scored[:50], path, cal=cal)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-10]) + "\n")
        with pytest.raises(ValueError) as exc:
            load_dataset(path)
        assert "50" in str(exc.value) and "40" in str(exc.value)

    def test_unknown_version(self, tmp_path):
        path = tmp_path / "data.jsonl"
        header = {"version": 99, "kind": "raw", "count": 0, "n_conditions": 8,
                  "n_rewards": None, "bins": None, "calibration_digest": None}
        path.write_text(json.dumps(header) + "\n")
        with pytest.raises(ValueError, match="version"):
            load_dataset(path)

    def test_malformed_line_reports_number(self, tmp_path):
        records = generate_dataset(5, seed=6)
        path = tmp_path / "raw.jsonl"
        save_dataset(records, path)
        lines = path.read_text().splitlines()
        lines[3] = "{not json"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError, match=":4:"):
            load_dataset(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_dataset(path)
