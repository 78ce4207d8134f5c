import csv
import io
import json

import numpy as np
import pytest

from temfri.cli import (ConfigError, ExperimentConfig, Params, aggregate, density_report, main,
                        match_errors, repro_check, reproduction_curves, rows_csv, run_experiment)


def config(text):
    return ExperimentConfig.from_text(text)


class TestConfig:
    def test_parses_keys_and_comments(self):
        cfg = config("scenario = stream_crossing  # three Diracs\ntrials = 5\nseed=7\n\nfs = 1.3\n")
        assert (cfg.scenario, cfg.trials, cfg.seed) == ("stream_crossing", 5, 7)
        assert cfg.params == {"fs": "1.3"}

    @pytest.mark.parametrize("text,message", [
        ("trials = 3", "missing required key"),
        ("scenario = nope", "unknown scenario"),
        ("scenario = single_crossing\nbogus = 1", "unknown keys"),
        ("scenario = single_crossing\ntrials = many", "invalid literal"),
        ("scenario = single_crossing\ntrials = 0", "positive"),
        ("scenario = single_crossing\njust a line", "line 2"),
    ])
    def test_errors(self, text, message):
        with pytest.raises(ConfigError, match=message):
            config(text)

    def test_bad_number_is_config_error(self):
        p = Params({"fs": "__import__('os')"}, {"fs": "1"})
        with pytest.raises(ConfigError, match="fs"):
            p.num("fs")
        assert Params({}, {"fs": "2*pi"}).num("fs") == pytest.approx(2 * np.pi)


class TestRuns:
    def test_clean_stream_is_exact(self):
        report = run_experiment(config("scenario = stream_crossing\ntrials = 20\nseed = 3"), write=False)
        assert report.exit_code == 0
        assert report.aggregates["success_rate"] == 1.0
        assert report.aggregates["max_loc_err"] < 1e-8
        assert report.aggregates["max_amp_err"] < 1e-8

    def test_rerun_is_byte_identical(self, tmp_path):
        text = "scenario = single_if\ntrials = 10\nseed = 11\nout = {}\n"
        a = run_experiment(config(text.format(tmp_path / "a")))
        b = run_experiment(config(text.format(tmp_path / "b")))
        assert a.rows == b.rows
        assert ((tmp_path / "a" / "trials.csv").read_bytes()
                == (tmp_path / "b" / "trials.csv").read_bytes())

    def test_outputs_written(self, tmp_path):
        run_experiment(config(f"scenario = stream_if\ntrials = 3\nout = {tmp_path}"))
        data = json.loads((tmp_path / "report.json").read_text())
        assert data["config"]["threshold"] == "0.11" and len(data["rows"]) == 3
        names = sorted(p.name for p in (tmp_path / "plotdata").iterdir())
        assert names == ["stream_if_parameters.csv", "stream_if_spikes.csv",
                         "stream_if_waveform.csv"]

    def test_aggregates_recomputable_from_csv(self, tmp_path):
        report = run_experiment(config("scenario = single_crossing\ntrials = 15\nseed = 2"), write=False)
        rows = list(csv.DictReader(io.StringIO(rows_csv(report.rows))))
        parsed = [{k: (float(v) if k not in ("decode_error", "precondition") else v)
                   for k, v in r.items()} for r in rows]
        again = aggregate(parsed)
        for key in ("success_rate", "loc_mse", "amp_mse", "eps_t", "mean_spikes"):
            assert again[key] == pytest.approx(report.aggregates[key], rel=1e-12, abs=1e-300)

    def test_precondition_failure_sets_exit_code(self):
        report = run_experiment(config("scenario = stream_if\ntrials = 2\nthreshold = 0.2"),
                                write=False)
        assert report.aggregates["precondition_failures"] == 2
        assert report.exit_code == 1

    def test_trials_are_independent_of_count(self):
        a = run_experiment(config("scenario = single_crossing\ntrials = 3\nseed = 5"), write=False)
        b = run_experiment(config("scenario = single_crossing\ntrials = 6\nseed = 5"), write=False)
        assert a.rows == b.rows[:3]


class TestScoring:
    def test_match_errors_pairs_nearest(self):
        dt, da = match_errors([1.0, 2.0], [1.0, -1.0], [2.1, 0.9], [-1.5, 1.25])
        assert dt == pytest.approx([-0.1, 0.1]) and da == pytest.approx([0.25, -0.5])

    def test_missing_estimate_is_infinite(self):
        dt, _ = match_errors([1.0], [1.0], [], [])
        assert np.isinf(dt).all()


class TestDensity:
    def test_reference_case(self):
        r = density_report(2, 2.0, 0.2, 2.0)
        assert r["uniform_samples"] == pytest.approx(80 / 9)
        assert round(r["uniform_samples"], 2) == 8.89
        assert r["timing_samples"] == 8 and r["timing_fewer"]
        assert r["crossover_S"] == pytest.approx(1.6) and r["crossover_holds"]

    def test_crossing_density(self):
        r = density_report(2, 2.0, 0.2, 2.0, fs=1.25, channels=2)
        assert r["crossing_density_single"] == 2.5
        assert r["crossing_density_multi"] == 5.0

    def test_timing_not_superior_for_dense_bursts(self):
        r = density_report(2, 2.0, 0.0, 1e-3)
        assert not r["timing_fewer"] and "not superior" in r["statement"]

    def test_crossover_matches_counts(self):
        for S in np.linspace(0.1, 4.0, 40):
            r = density_report(3, 2.0, 0.3, S)
            if abs(S - r["crossover_S"]) > 1e-9:
                assert r["timing_fewer"] == (S > r["crossover_S"])

    def test_rejects_bad_geometry(self):
        with pytest.raises(ConfigError):
            density_report(2, 2.0, 1.0, 2.0)


class TestReproductionCurves:
    def test_targets_reproduced(self):
        rows = list(csv.DictReader(io.StringIO(reproduction_curves(100))))
        cases = {r["case"] for r in rows}
        assert cases == {"bspline1_constant", "bspline1_linear", "espline2_cos"}
        assert max(abs(float(r["target"]) - float(r["reproduced"])) for r in rows) < 1e-12
        assert {r["interval"] for r in rows} == {"0.625-1.0", "1.0-1.625"}


class TestMain:
    def test_density_command(self, capsys):
        assert main(["density", "--K", "2", "--L", "2", "--delta", "0.2", "--S", "2"]) == 0
        assert json.loads(capsys.readouterr().out)["timing_samples"] == 8

    def test_run_command(self, tmp_path, capsys):
        cfg = tmp_path / "c.txt"
        cfg.write_text("scenario = single_crossing\ntrials = 2\n")
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        assert json.loads(capsys.readouterr().out)["aggregates"]["trials"] == 2
        assert (tmp_path / "o" / "trials.csv").exists()

    def test_bad_config_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "c.txt"
        cfg.write_text("scenario = nope\n")
        assert main(["run", "--config", str(cfg)]) == 2
        assert "unknown scenario" in capsys.readouterr().err
        assert main(["run", "--config", str(tmp_path / "missing.txt")]) == 2

    def test_repro_check_writes_files(self, tmp_path, capsys):
        code = main(["repro-check", "--trials", "2", "--only", "B-spline reproduction",
                     "--out", str(tmp_path)])
        line = capsys.readouterr().out.strip()
        assert line.startswith("PASS") and code == 0
        assert (tmp_path / "reproduction_curves.csv").exists()
        assert json.loads((tmp_path / "repro_check.json").read_text())[0]["passed"]

    def test_repro_check_selection(self):
        assert repro_check(1, names=["nothing matches"]) == []
