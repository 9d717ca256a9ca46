"""
Tests for the sramdp command line
"""

import json
import math

import pytest

from sramdp.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main

HALF_LSBS = "0,0,0,0,0.5,0.5,0.5,0.5"
MECHANISM = {
    "width": 8,
    "patterns": "default",
    "cells": ["reliable"] * 4 + ["6t"] * 4,
    "voltage": 0.50,
}
CHIP_MECHANISM = {**MECHANISM, "mode": "chip", "chip": {"words": 32, "seed": 3}}


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / "out"


def run(out_dir, *args, seed="7"):
    return main(["--seed", seed, "--out-dir", str(out_dir), *args])


def read_json_output(capsys):
    return json.loads(capsys.readouterr().out)


class TestDataCommands:
    """Test gen-data, perturb and recover"""

    def test_gen_data(self, out_dir):
        """Test the Gaussian dataset file"""
        assert run(out_dir, "gen-data", "--count", "200") == EXIT_OK
        lines = (out_dir / "data.csv").read_text().splitlines()
        assert lines[0] == "value"
        assert len(lines) == 201

    def test_gen_data_reproducible(self, tmp_path):
        """Test that the same seed writes the same bytes"""
        run(tmp_path / "a", "gen-data", "--count", "50")
        run(tmp_path / "b", "gen-data", "--count", "50")
        assert (tmp_path / "a" / "data.csv").read_bytes() == (tmp_path / "b" / "data.csv").read_bytes()

    def test_gen_grid(self, out_dir):
        """Test the location workload file"""
        assert run(out_dir, "gen-data", "--kind", "grid") == EXIT_OK
        assert (out_dir / "checkins.csv").read_text().startswith("x,y\n")

    def test_perturb_then_recover(self, out_dir):
        """Test the data pipeline from generation to recovery"""
        run(out_dir, "gen-data", "--count", "200")
        assert run(
            out_dir, "perturb", "--input", str(out_dir / "data.csv"), "--column", "value"
        ) == EXIT_OK

        rows = (out_dir / "perturbed.csv").read_text().splitlines()
        assert rows[0] == "input,output,pattern_index"
        assert len(rows) == 201
        for row in rows[1:]:
            x, o, _ = (int(v) for v in row.split(","))
            assert x >> 4 == o >> 4

        assert run(
            out_dir, "recover", "--obs", str(out_dir / "perturbed.csv"),
            "--f", "0,0,0,0,0.8157,0.8157,0.8157,0.8157",
        ) == EXIT_OK
        phat = (out_dir / "phat.csv").read_text().splitlines()
        assert phat[0] == "value,probability"
        assert len(phat) == 257
        assert sum(float(line.split(",")[1]) for line in phat[1:]) == pytest.approx(1.0)


class TestAnalysisCommands:
    """Test pmf, ul, calibrate and privacy-report"""

    def test_pmf(self, out_dir):
        """Test the single-bit PMF file"""
        assert run(out_dir, "pmf", "--f", "0.5") == EXIT_OK
        lines = (out_dir / "pmf.csv").read_text().splitlines()
        assert lines == ["a,probability", "-1,0.125", "0,0.75", "1,0.125"]

    def test_ul(self, out_dir, capsys):
        """Test expected loss and the homogeneous bound"""
        assert run(out_dir, "ul", "--f", "0.5") == EXIT_OK
        report = read_json_output(capsys)
        assert report["expected_l1"] == pytest.approx(0.25)
        assert report["l1_bound"] == pytest.approx(1.75)

    def test_calibrate(self, out_dir, capsys):
        """Test the operating point for epsilon = 1.49 over four cells"""
        assert run(out_dir, "calibrate", "--epsilon", "1.49") == EXIT_OK
        report = read_json_output(capsys)
        assert report["nearest_voltage"] == 0.5
        assert report["nearest_rate"] == 0.8157
        # the target rate lies just above the calibrated range
        assert report["interpolated_voltage"] is None

    def test_privacy_report(self, out_dir, capsys):
        """Test the report for one half-failing cell"""
        assert run(out_dir, "privacy-report", "--f", "0.5") == EXIT_OK
        report = read_json_output(capsys)
        assert report["epsilon"] == pytest.approx(math.log(3))

    def test_fault_map(self, out_dir):
        """Test the chip fault map dump"""
        code = run(out_dir, "fault-map", "--words", "64", "--wordline-sigma", "0.15", "--alpha", "1.1")
        assert code == EXIT_OK
        dump = json.loads((out_dir / "fault-map.json").read_text())

        assert dump["voltage"] == 0.5
        assert dump["wordline_sigma"] == 0.15
        assert len(dump["words"]) == 64
        for index in dump["weak_words"]:
            assert dump["words"][index] == [1] * 8

    def test_fault_map_from_chip_config(self, out_dir, tmp_path):
        """Test dumping the chip described by a mechanism config"""
        cfg = tmp_path / "chip.json"
        cfg.write_text(json.dumps({**CHIP_MECHANISM, "voltage": 0.55}))
        assert run(out_dir, "fault-map", "--config", str(cfg), "--out", str(tmp_path / "map.json")) == EXIT_OK
        dump = json.loads((tmp_path / "map.json").read_text())
        assert dump["voltage"] == 0.55
        assert dump["seed"] == 3
        assert len(dump["words"]) == 32

    def test_privacy_report_with_drift(self, out_dir, capsys):
        """Test the droop bound in the report"""
        assert run(out_dir, "privacy-report", "--f", "0.5,0.5", "--alpha", "1.1") == EXIT_OK
        report = read_json_output(capsys)
        assert report["droop_bound"] == pytest.approx(2 * math.log(1.2))


@pytest.mark.integration
class TestExperimentCommands:
    """Test run-experiment and compare-rr"""

    def test_run_experiment(self, out_dir, capsys):
        """Test that a run prints its record and writes artifacts"""
        assert run(out_dir, "run-experiment", "--name", "cli", "--f", HALF_LSBS) == EXIT_OK
        record = read_json_output(capsys)

        assert record["name"] == "cli"
        assert record["z"] == 4
        for name in ("records.csv", "histograms.csv", "result.json"):
            assert (out_dir / "cli" / name).exists()

    def test_compare_rr(self, out_dir, capsys):
        """Test the RR comparison summary file"""
        assert run(out_dir, "compare-rr", "--name", "cmp", "--f", HALF_LSBS) == EXIT_OK
        summary = read_json_output(capsys)
        assert json.loads((out_dir / "cmp" / "compare-rr.json").read_text()) == summary


class TestFlagPlacement:
    """Test global flags given after the subcommand"""

    def test_perturb_with_trailing_flags(self, tmp_path, capsys):
        """Test perturb --config cfg.json --input data.csv --seed S --out file"""
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(MECHANISM))
        data = tmp_path / "data.csv"
        data.write_text("value\n" + "\n".join(str(v) for v in range(0, 256, 8)) + "\n")

        outputs = []
        for name in ("a.csv", "b.csv"):
            code = main([
                "perturb", "--config", str(cfg), "--input", str(data), "--column", "value",
                "--seed", "11", "--out", str(tmp_path / name),
            ])
            assert code == EXIT_OK
            outputs.append((tmp_path / name).read_bytes())
        assert outputs[0] == outputs[1]

        other = main([
            "perturb", "--config", str(cfg), "--input", str(data), "--column", "value",
            "--seed", "12", "--out", str(tmp_path / "c.csv"),
        ])
        assert other == EXIT_OK
        assert (tmp_path / "c.csv").read_bytes() != outputs[0]

    def test_trailing_seed_overrides_leading_seed(self, tmp_path):
        """Test that a flag after the subcommand wins"""
        main(["--seed", "1", "--out-dir", str(tmp_path / "a"), "gen-data", "--count", "20", "--seed", "5"])
        main(["--out-dir", str(tmp_path / "b"), "gen-data", "--count", "20", "--seed", "5"])
        assert (tmp_path / "a" / "data.csv").read_bytes() == (tmp_path / "b" / "data.csv").read_bytes()

    def test_leading_seed_kept_without_trailing_one(self, tmp_path):
        """Test that an unset subcommand flag does not clobber the global one"""
        main(["--seed", "5", "--out-dir", str(tmp_path / "a"), "gen-data", "--count", "20"])
        main(["gen-data", "--count", "20", "--seed", "5", "--out-dir", str(tmp_path / "b")])
        assert (tmp_path / "a" / "data.csv").read_bytes() == (tmp_path / "b" / "data.csv").read_bytes()

    def test_privacy_report_with_trailing_config(self, tmp_path, capsys):
        """Test privacy-report --config cfg.json --alpha 1.01"""
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(MECHANISM))
        assert main(["privacy-report", "--config", str(cfg), "--alpha", "1.01"]) == EXIT_OK
        report = read_json_output(capsys)
        assert report["epsilon"] == pytest.approx(4 * math.log((2 - 0.8157) / 0.8157))
        assert report["droop_bound"] == pytest.approx(4 * math.log(1.02))


class TestExitCodes:
    """Test error handling at the command line"""

    def test_bad_range_is_config_error(self, out_dir, tmp_path):
        """Test that a malformed candidate range exits with 2"""
        obs = tmp_path / "obs.csv"
        obs.write_text("input,output,pattern_index\n5,5,0\n")
        code = run(out_dir, "recover", "--obs", str(obs), "--f", "0,0,0,0,0,0,0,0", "--omega", "abc")
        assert code == EXIT_CONFIG

    def test_impossible_observation_is_numeric_error(self, out_dir, tmp_path, capsys):
        """Test that an observation outside the candidates exits with 3"""
        obs = tmp_path / "obs.csv"
        obs.write_text("input,output,pattern_index\n5,5,0\n")
        code = run(out_dir, "recover", "--obs", str(obs), "--f", "0,0,0,0,0,0,0,0", "--omega", "0:0")
        assert code == EXIT_NUMERIC
        assert "error:" in capsys.readouterr().err

    def test_out_of_range_observation(self, out_dir, tmp_path):
        """Test that an observation outside the word range exits with 2"""
        obs = tmp_path / "obs.csv"
        for value in ("-3", "300"):
            obs.write_text(f"input,output,pattern_index\n5,{value},0\n")
            for algo in ("em", "clr"):
                code = run(out_dir, "recover", "--obs", str(obs), "--algo", algo, "--f", HALF_LSBS)
                assert code == EXIT_CONFIG

    def test_bad_clip(self, out_dir):
        """Test that a malformed clip range exits with 2"""
        assert run(out_dir, "gen-data", "--clip", "abc") == EXIT_CONFIG
        assert run(out_dir, "gen-data", "--clip", "0:300") == EXIT_CONFIG

    def test_drift_past_one(self, out_dir):
        """Test that drift pushing a failure rate past 1 exits with 2"""
        assert run(out_dir, "privacy-report", "--alpha", "1.3") == EXIT_CONFIG

    def test_fault_map_needs_chip_config(self, out_dir, tmp_path):
        """Test fault-map with a stochastic mechanism config"""
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(MECHANISM))
        assert run(out_dir, "fault-map", "--config", str(cfg)) == EXIT_CONFIG

    def test_missing_input_file(self, out_dir):
        """Test a missing dataset file"""
        assert run(out_dir, "perturb", "--input", "nope.csv") == EXIT_CONFIG

    def test_invalid_seed_setting(self, out_dir, monkeypatch):
        """Test a malformed SRAMDP_SEED"""
        monkeypatch.setenv("SRAMDP_SEED", "abc")
        assert main(["--out-dir", str(out_dir), "gen-data", "--count", "5"]) == EXIT_CONFIG

    def test_missing_command(self):
        """Test that argparse rejects a bare invocation"""
        with pytest.raises(SystemExit):
            main([])
