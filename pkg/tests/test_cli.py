import json
import time

import numpy as np
import pytest

from elbreak.cli import (
    EXIT_INPUT,
    EXIT_NUMERICAL,
    EXIT_OK,
    RunReport,
    main,
)


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestDetect:
    def test_change_fixture_rejects(self, capsys, change_csv_path):
        code, out, _ = run_cli(capsys, "detect", change_csv_path, "--format", "json")
        assert code == EXIT_OK
        doc = json.loads(out)
        res = doc["result"]
        assert res["reject"] is True
        assert 85 <= res["k_hat"] <= 115
        assert res["trim"] == [30, 30]
        assert doc["input"]["rows"] == 250
        assert doc["input"]["column"] == "value"

    def test_text_format(self, capsys, change_csv_path):
        code, out, _ = run_cli(capsys, "detect", change_csv_path)
        assert code == EXIT_OK
        assert "change detected" in out
        assert "Z* =" in out

    def test_json_report_roundtrip(self, capsys, change_csv_path):
        code, out, _ = run_cli(capsys, "detect", change_csv_path, "--format", "json")
        report = RunReport.from_json(out)
        assert json.loads(report.to_json()) == json.loads(out)

    def test_report_tolerates_unknown_fields(self, capsys, change_csv_path):
        code, out, _ = run_cli(capsys, "detect", change_csv_path, "--format", "json")
        doc = json.loads(out)
        doc["future_field"] = {"x": 1}
        report = RunReport.from_json(json.dumps(doc))
        assert report.command == "detect"

    def test_profile_out(self, capsys, change_csv_path, tmp_path):
        profile = tmp_path / "profile.csv"
        code, out, _ = run_cli(
            capsys, "detect", change_csv_path, "--profile-out", str(profile)
        )
        assert code == EXIT_OK
        lines = profile.read_text().splitlines()
        assert lines[0] == "k,stat"
        ks = [int(line.split(",")[0]) for line in lines[1:]]
        assert ks[0] == 30 and ks[-1] == 220
        stats = [float(line.split(",")[1]) for line in lines[1:]]
        assert all(s >= 0 for s in stats)

    def test_bootstrap_pvalue_included(self, capsys, change_csv_path):
        code, out, _ = run_cli(
            capsys, "detect", change_csv_path, "--bootstrap", "99",
            "--jobs", "2", "--format", "json",
        )
        assert code == EXIT_OK
        res = json.loads(out)["result"]
        assert 0.0 < res["p_value_bootstrap"] <= 1.0
        assert res["bootstrap_reps"] == 99

    def test_constant_column_clean_error(self, capsys, tmp_path):
        path = tmp_path / "const.csv"
        path.write_text("value\n" + "2.5\n" * 100)
        code, _, err = run_cli(capsys, "detect", str(path))
        assert code == EXIT_NUMERICAL
        assert "DegenerateSegment" in err

    def test_n587_trim(self, capsys, tmp_path):
        from elbreak import NoiseModel, gen_ar_change

        ts = gen_ar_change(587, 300, 0.3, 0.3, NoiseModel.GAUSSIAN, seed=2)
        path = tmp_path / "n587.csv"
        path.write_text("value\n" + "\n".join(f"{v:.17g}" for v in ts.values) + "\n")
        code, out, _ = run_cli(capsys, "detect", str(path), "--format", "json")
        assert code == EXIT_OK
        assert json.loads(out)["result"]["trim"] == [48, 48]

    def test_missing_value_aborts(self, capsys, tmp_path):
        path = tmp_path / "gap.csv"
        rows = ["value"] + [f"{i / 10:.1f}" for i in range(60)]
        rows[30] = "NA"
        path.write_text("\n".join(rows) + "\n")
        code, _, err = run_cli(capsys, "detect", str(path))
        assert code == EXIT_INPUT
        assert "missing value" in err

    def test_drop_missing_warns(self, capsys, nochange_csv_path, tmp_path):
        src = open(nochange_csv_path).read().splitlines()
        src[40] = "NA"
        path = tmp_path / "gap.csv"
        path.write_text("\n".join(src) + "\n")
        code, _, err = run_cli(capsys, "detect", str(path), "--drop-missing")
        assert code == EXIT_OK
        assert "dropped 1 rows" in err

    def test_nonnumeric_column(self, capsys, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("value\n1.0\nbanana\n2.0\n")
        code, _, err = run_cli(capsys, "detect", str(path))
        assert code == EXIT_INPUT
        assert "non-numeric" in err

    def test_unreadable_file(self, capsys):
        code, _, err = run_cli(capsys, "detect", "/no/such/file.csv")
        assert code == EXIT_INPUT

    def test_bad_column_name(self, capsys, change_csv_path):
        code, _, err = run_cli(capsys, "detect", change_csv_path, "--column", "price")
        assert code == EXIT_INPUT
        assert "price" in err

    def test_column_by_index(self, capsys, change_csv_path):
        code, out, _ = run_cli(
            capsys, "detect", change_csv_path, "--column", "0", "--format", "json"
        )
        assert code == EXIT_OK


class TestSegment:
    def test_single_change_fixture(self, capsys, change_csv_path):
        code, out, _ = run_cli(capsys, "segment", change_csv_path, "--format", "json")
        assert code == EXIT_OK
        res = json.loads(out)["result"]
        assert len(res["change_points"]) == 1
        assert 85 <= res["change_points"][0] <= 115

    def test_nochange_fixture(self, capsys, nochange_csv_path):
        code, out, _ = run_cli(capsys, "segment", nochange_csv_path, "--format", "json")
        assert code == EXIT_OK
        res = json.loads(out)["result"]
        assert res["change_points"] == []

    def test_text_tree(self, capsys, change_csv_path):
        code, out, _ = run_cli(capsys, "segment", change_csv_path)
        assert code == EXIT_OK
        assert "change points:" in out
        assert "depth 1" in out


class TestCritval:
    def test_tabled_values_and_runtime(self, capsys):
        t0 = time.perf_counter()
        code, out, _ = run_cli(capsys, "critval", "0.01", "0.05", "0.10")
        elapsed = time.perf_counter() - t0
        assert code == EXIT_OK
        assert elapsed < 1.0
        assert "4.600149" in out
        assert "2.970195" in out
        assert "2.250367" in out

    def test_median_level(self, capsys):
        code, out, _ = run_cli(capsys, "critval", "0.5")
        assert code == EXIT_OK
        assert "0.366513" in out

    def test_raw_thresholds_decreasing(self, capsys):
        code, out, _ = run_cli(
            capsys, "critval", "0.01", "0.05", "0.10", "-n", "250", "--format", "json"
        )
        assert code == EXIT_OK
        rows = json.loads(out)["result"]["rows"]
        raws = [row["raw_threshold"] for row in rows]
        assert raws[0] > raws[1] > raws[2]

    def test_invalid_level(self, capsys):
        code, _, err = run_cli(capsys, "critval", "1.5")
        assert code == EXIT_INPUT


SMOKE_CFG = """\
phi_pre = 0.1
phi_post = 0.5
noise = gaussian
reps = 2
alpha = 0.05
seed = 7
k_100 = 50
"""


class TestPower:
    def test_smoke_and_byte_identical(self, capsys, tmp_path):
        cfg = tmp_path / "smoke.cfg"
        cfg.write_text(SMOKE_CFG)
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        code, _, _ = run_cli(capsys, "power", str(cfg), "--out", str(out1))
        assert code == EXIT_OK
        code, _, _ = run_cli(capsys, "power", str(cfg), "--out", str(out2), "--jobs", "2")
        assert code == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes()
        lines = out1.read_text().splitlines()
        assert lines[0] == "n,k,noise,power,reps,failures"
        assert lines[1].startswith("100,50,gaussian,")

    def test_stdout_csv(self, capsys, tmp_path):
        cfg = tmp_path / "smoke.cfg"
        cfg.write_text(SMOKE_CFG)
        code, out, _ = run_cli(capsys, "power", str(cfg))
        assert code == EXIT_OK
        assert "n,k,noise,power,reps,failures" in out

    def test_config_error_line_number(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("phi_pre = 0.1\nwat = 9\n")
        code, _, err = run_cli(capsys, "power", str(cfg))
        assert code == EXIT_INPUT
        assert ":2:" in err

    def test_missing_config(self, capsys):
        code, _, err = run_cli(capsys, "power", "/no/such.cfg")
        assert code == EXIT_INPUT


class TestShippedConfigs:
    def test_table1_row1_parses(self):
        from elbreak import parse_power_config

        text = open("configs/table1_row1.cfg").read()
        cfg = parse_power_config(text, path="configs/table1_row1.cfg")
        assert cfg.k_values == {100: (20,)}
        assert cfg.reps == 1000
        assert len(cfg.noise_kinds) == 4

    def test_smoke_config_parses(self):
        from elbreak import parse_power_config

        text = open("configs/smoke.cfg").read()
        cfg = parse_power_config(text, path="configs/smoke.cfg")
        assert cfg.reps <= 5
