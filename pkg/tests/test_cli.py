import json

import pytest

from sonoctl.cli import main


def run_cli(*argv):
    return main(list(argv))


def quick_flags(tmp, extra=()):
    cfg = {
        "tick_rate_hz": 15.0,
        "motions": ["PG", "WP"],
        "metronome": {"beat_period": 1.0, "beats_per_phase": 2, "repetitions": 3},
        "task": {"n_positions": 5, "hold_time_s": 2.0, "trials_per_level": 1},
        "calibration_s": 4.0,
    }
    path = tmp / "config.json"
    path.write_text(json.dumps(cfg))
    return ["--config", str(path), *extra]


class TestSynthTrainCrossval:
    def test_pipeline(self, tmp_path, capsys):
        synth_dir = tmp_path / "synth"
        assert run_cli("synth", *quick_flags(tmp_path), "--seed", "3",
                       "--out", str(synth_dir)) == 0
        assert (synth_dir / "PG.smgf").exists()
        assert (synth_dir / "PG.smgf.json").exists()

        db_dir = tmp_path / "db"
        assert run_cli("train", *quick_flags(tmp_path), "--data", str(synth_dir),
                       "--out", str(db_dir)) == 0
        out = capsys.readouterr().out
        assert "loocv accuracy excluding rest" in out
        assert (db_dir / "manifest.json").exists()

        rep_dir = tmp_path / "cv"
        assert run_cli("crossval", "--db", str(db_dir), "--out", str(rep_dir)) == 0
        body = (rep_dir / "confusion_exclude_rest.csv").read_text()
        assert body.startswith("class,")
        assert (rep_dir / "confusion_include_rest.csv").exists()

    def test_train_without_data_fails_cleanly(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        code = run_cli("train", "--data", str(empty), "--out", str(tmp_path / "db"))
        assert code == 1
        err = capsys.readouterr().err
        parsed = json.loads(err.strip().splitlines()[-1])
        assert parsed["error"] == "EngineError"

    def test_usage_error_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("train")  # missing --data
        assert exc.value.code == 2


class TestRunAndReport:
    def test_run_writes_expected_artifacts(self, tmp_path):
        out = tmp_path / "run"
        assert run_cli("run", *quick_flags(tmp_path), "--seed", "5",
                       "--out", str(out)) == 0
        assert (out / "session.jsonl").exists()
        metrics = (out / "metrics.csv").read_text().strip().splitlines()
        assert len(metrics) == 1 + 5  # header + one trial per level
        assert (out / "summary.csv").exists()
        assert (out / "metrics.json").exists()

    def test_run_trial_count_follows_protocol(self, tmp_path):
        out = tmp_path / "run33"
        assert run_cli("run", *quick_flags(tmp_path), "--seed", "5",
                       "--n-positions", "11", "--trials", "3", "--hold-time", "1.0",
                       "--out", str(out)) == 0
        metrics = (out / "metrics.csv").read_text().strip().splitlines()
        assert len(metrics) == 1 + 33

    def test_report_reproduces_run_outputs_byte_identically(self, tmp_path):
        out = tmp_path / "run"
        assert run_cli("run", *quick_flags(tmp_path), "--seed", "5",
                       "--out", str(out)) == 0
        rep = tmp_path / "rep"
        assert run_cli("report", "--log", str(out / "session.jsonl"),
                       "--out", str(rep)) == 0
        for name in ("metrics.csv", "summary.csv", "fitts_points.csv", "metrics.json"):
            assert (out / name).read_bytes() == (rep / name).read_bytes()

    def test_report_is_idempotent(self, tmp_path):
        out = tmp_path / "run"
        run_cli("run", *quick_flags(tmp_path), "--seed", "5", "--out", str(out))
        rep = tmp_path / "rep"
        run_cli("report", "--log", str(out / "session.jsonl"), "--out", str(rep))
        first = {n: (rep / n).read_bytes() for n in ("metrics.csv", "summary.csv")}
        run_cli("report", "--log", str(out / "session.jsonl"), "--out", str(rep))
        for name, body in first.items():
            assert (rep / name).read_bytes() == body

    def test_same_seed_byte_identical_logs(self, tmp_path):
        logs = []
        for name in ("a", "b"):
            out = tmp_path / name
            run_cli("run", *quick_flags(tmp_path), "--seed", "9", "--out", str(out))
            logs.append((out / "session.jsonl").read_bytes())
        assert logs[0] == logs[1]

    def test_all_motions_study(self, tmp_path):
        out = tmp_path / "study"
        assert run_cli("run", *quick_flags(tmp_path), "--seed", "5", "--all-motions",
                       "--out", str(out)) == 0
        assert (out / "metrics-PG.csv").exists()
        assert (out / "metrics-WP.csv").exists()
        summary = (out / "summary.csv").read_text().strip().splitlines()
        assert len(summary) == 1 + 2


class TestEnvDefaults:
    def test_out_dir_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SONOCTL_OUT", str(tmp_path / "envout"))
        from sonoctl.cli import default_out
        assert default_out() == str(tmp_path / "envout")
