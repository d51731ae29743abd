import hashlib
import json

import pytest

from rewardflow.cli import main
from rewardflow.evalsuite import load_report
from rewardflow.model import load_checkpoint
from rewardflow.train import MetricLog

DIMS_FLAG = "16,16,32,3"


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """gen -> calibrate -> score -> tiny train, shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    raw = root / "raw.jsonl"
    cal = root / "cal.json"
    scored = root / "scored.jsonl"
    ckpt = root / "ckpt.json"
    log = root / "log.csv"
    assert main(["gen", "--n", "4000", "--seed", "7", "--out", str(raw)]) == 0
    assert main(["calibrate", "--in", str(raw), "--subset", "4000",
                 "--out", str(cal)]) == 0
    assert main(["score", "--in", str(raw), "--cal", str(cal),
                 "--out", str(scored)]) == 0
    assert main(["train", "--data", str(scored), "--steps", "60", "--batch", "64",
                 "--eval-every", "30", "--eval-samples", "32",
                 "--eval-ode-steps", "8", "--dims", DIMS_FLAG,
                 "--ckpt", str(ckpt), "--log", str(log)]) == 0
    return root, raw, cal, scored, ckpt, log


class TestPipeline:
    def test_gen_is_idempotent(self, pipeline, tmp_path):
        _, raw, *_ = pipeline
        again = tmp_path / "again.jsonl"
        assert main(["gen", "--n", "4000", "--seed", "7", "--out", str(again)]) == 0
        assert sha(raw) == sha(again)

    def test_calibrate_populations_balanced(self, pipeline, capsys, tmp_path):
        _, raw, *_ = pipeline
        out = tmp_path / "cal.json"
        assert main(["calibrate", "--in", str(raw), "--subset", "4000",
                     "--out", str(out)]) == 0
        output = capsys.readouterr().out
        assert "populations" in output
        cal = json.loads(out.read_text())
        assert cal["B"] == 8
        # 4000 / 8 = 500 per bin, within one
        parsed = 0
        for line in output.splitlines():
            if ": populations [" in line:
                pops = json.loads(line.split(": populations ")[1])
                assert all(abs(p - 500) <= 1 for p in pops)
                parsed += 1
        assert parsed == 4

    def test_score_requires_calibration_flag(self, pipeline, capsys):
        _, raw, *_ = pipeline
        code = main(["score", "--in", str(raw), "--out", "x.jsonl"])
        assert code == 2
        assert "--cal" in capsys.readouterr().err

    def test_train_wrote_artifacts(self, pipeline):
        *_, ckpt, log = pipeline
        loaded = load_checkpoint(ckpt)
        assert loaded.step == 60
        assert MetricLog.load(log).steps() == [0, 30, 60]

    def test_train_steps_zero_is_validation_error(self, pipeline):
        _, _, _, scored, *_ = pipeline
        code = main(["train", "--data", str(scored), "--steps", "0",
                     "--dims", DIMS_FLAG, "--ckpt", "c.json", "--log", "l.csv"])
        assert code == 2

    def test_train_single_mode(self, pipeline, tmp_path, capsys):
        _, _, _, scored, *_ = pipeline
        ckpt = tmp_path / "single.json"
        assert main(["train", "--data", str(scored), "--mode", "single:2",
                     "--steps", "30", "--batch", "32", "--eval-every", "30",
                     "--eval-samples", "16", "--eval-ode-steps", "5",
                     "--dims", DIMS_FLAG, "--ckpt", str(ckpt),
                     "--log", str(tmp_path / "single.csv")]) == 0
        loaded = load_checkpoint(ckpt)
        assert str(loaded.params.mode) == "single:2"
        assert "mode=single:2" in capsys.readouterr().out

    def test_train_is_deterministic(self, pipeline, tmp_path):
        _, _, _, scored, ckpt, log = pipeline
        c2, l2 = tmp_path / "c2.json", tmp_path / "l2.csv"
        assert main(["train", "--data", str(scored), "--steps", "60",
                     "--batch", "64", "--eval-every", "30", "--eval-samples", "32",
                     "--eval-ode-steps", "8", "--dims", DIMS_FLAG,
                     "--ckpt", str(c2), "--log", str(l2)]) == 0
        assert sha(ckpt) == sha(c2)
        assert sha(log) == sha(l2)


class TestSampleCommand:
    def test_default_targets(self, pipeline, capsys, tmp_path):
        *_, ckpt, _ = pipeline
        report = tmp_path / "report.json"
        assert main(["sample", "--ckpt", str(ckpt), "--n", "64", "--steps", "10",
                     "--out", str(report)]) == 0
        doc = load_report(report)
        assert doc["config"]["s_plus"] == [1.0, 1.0, 1.0, 1.0]
        assert doc["config"]["s_minus"] == [0.0, 0.0, 0.0, 0.0]
        assert doc["measurements"]["sample"].count == 64

    def test_malformed_target_vector(self, pipeline, capsys):
        *_, ckpt, _ = pipeline
        for bad in ("1,1,1", "1,1,1,2", "a,b,c,d"):
            code = main(["sample", "--ckpt", str(ckpt), "--splus", bad, "--n", "8"])
            assert code == 2, bad

    def test_points_csv(self, pipeline, tmp_path):
        *_, ckpt, _ = pipeline
        csv = tmp_path / "pts.csv"
        assert main(["sample", "--ckpt", str(ckpt), "--n", "16", "--steps", "5",
                     "--points-csv", str(csv)]) == 0
        lines = csv.read_text().splitlines()
        assert lines[0] == "x,y,c"
        assert len(lines) == 17

    def test_idempotent_outputs(self, pipeline, tmp_path):
        *_, ckpt, _ = pipeline
        r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
        for r in (r1, r2):
            assert main(["sample", "--ckpt", str(ckpt), "--n", "32", "--steps", "5",
                         "--seed", "3", "--out", str(r)]) == 0
        assert sha(r1) == sha(r2)


class TestExperimentCommands:
    def test_sweep_writes_nine_rows(self, pipeline, tmp_path):
        *_, ckpt, _ = pipeline
        report = tmp_path / "sweep.json"
        assert main(["sweep", "--ckpt", str(ckpt), "--reward", "0", "--grid", "9",
                     "--samples", "100", "--steps", "5", "--out", str(report)]) == 0
        csv_lines = (tmp_path / "sweep.sweep_r0.csv").read_text().splitlines()
        assert len(csv_lines) == 10  # header + 9 rows
        curve = load_report(report)["curves"]["sweep_r0"]
        assert len(curve.axis) == 9

    def test_scale_curve(self, pipeline, tmp_path):
        *_, ckpt, _ = pipeline
        report = tmp_path / "scale.json"
        assert main(["scale", "--ckpt", str(ckpt), "--selector", "0",
                     "--max-n", "4", "--trials", "100", "--steps", "5",
                     "--out", str(report)]) == 0
        curve = load_report(report)["curves"]["scaling_r0"]
        assert list(curve.axis) == [1.0, 2.0, 4.0]
        r0 = curve.reward_means(0)
        assert all(a <= b for a, b in zip(r0, r0[1:]))

    def test_scale_rejects_non_power_of_two(self, pipeline):
        *_, ckpt, _ = pipeline
        assert main(["scale", "--ckpt", str(ckpt), "--max-n", "12",
                     "--trials", "100", "--out", "x.json"]) == 2

    def test_compare(self, pipeline, tmp_path, capsys):
        base = MetricLog()
        fast = MetricLog()
        for step, b, f in [(0, -1.0, -1.0), (100, -0.6, -0.3), (200, -0.4, -0.1),
                           (400, -0.35, -0.05)]:
            base.append(step, 1.0, (b, 0, 0, 0))
            fast.append(step, 1.0, (f, 0, 0, 0))
        pb, pf = tmp_path / "b.csv", tmp_path / "f.csv"
        base.save(pb)
        fast.save(pf)
        report = tmp_path / "cmp.json"
        assert main(["compare", "--baseline-log", str(pb), "--candidate-log", str(pf),
                     "--reward", "0", "--out", str(report)]) == 0
        out = capsys.readouterr().out
        assert "4.00x" in out
        crit = load_report(report)["criteria"][0]
        assert crit.passed and crit.value == pytest.approx(4.0)


class TestCliPlumbing:
    def test_help_documents_defaults(self, capsys):
        for cmd, expected in [
            ("sample", ["2.0", "50"]),
            ("calibrate", ["8"]),
            ("sweep", ["2.0", "50", "9"]),
            ("train", ["20000", "0.001"]),
        ]:
            code = main([cmd, "--help"])
            assert code == 0
            out = capsys.readouterr().out
            for token in expected:
                assert token in out, (cmd, token)

    def test_config_echoed_before_run(self, pipeline, capsys):
        _, raw, *_ = pipeline
        main(["gen", "--n", "10", "--seed", "1", "--out", str(raw) + ".tmp"])
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("config: ")
        assert out[1].startswith("config_digest: ")

    def test_config_file_defaults_and_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n": 25, "seed": 9}))
        out_path = tmp_path / "from-config.jsonl"
        assert main(["--config", str(cfg), "gen", "--seed", "2",
                     "--out", str(out_path)]) == 0
        echoed = json.loads(capsys.readouterr().out.splitlines()[0][len("config: "):])
        assert echoed["n"] == 25      # from config file
        assert echoed["seed"] == 2    # flag wins

    def test_workdir_resolves_relative_paths(self, tmp_path):
        assert main(["--workdir", str(tmp_path), "gen", "--n", "10",
                     "--out", "rel.jsonl"]) == 0
        assert (tmp_path / "rel.jsonl").exists()

    def test_missing_file_is_validation_error(self, capsys):
        code = main(["calibrate", "--in", "/nonexistent/raw.jsonl", "--out", "c.json"])
        assert code == 3
        assert "error" in capsys.readouterr().err

    def test_unknown_command(self):
        assert main(["frobnicate"]) == 2
