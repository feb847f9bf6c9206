import json
import re
from pathlib import Path

import pytest
from click.testing import CliRunner

from shockbound.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def read_csv_rows(path):
    lines = Path(path).read_text().splitlines()
    assert lines[0].startswith("# shockbound ")
    header = lines[1].split(",")
    return header, [line.split(",") for line in lines[2:]]


class TestSolve:
    def test_reference_cell(self, runner):
        result = runner.invoke(main, ["solve", "--v", "0.1", "--delta", "0.01"])
        assert result.exit_code == 0
        z = float(re.search(r"z_star=([0-9.e-]+)", result.output).group(1))
        assert z == pytest.approx(0.47492741, abs=1e-6)

    def test_unperturbed(self, runner):
        result = runner.invoke(main, ["solve", "--v", "0.1", "--delta", "0"])
        assert result.exit_code == 0
        z = float(re.search(r"z_star=([0-9.e-]+)", result.output).group(1))
        assert z <= 1e-6

    def test_missing_required_flag_usage_error(self, runner):
        result = runner.invoke(main, ["solve", "--delta", "0.01"])
        assert result.exit_code == 2

    def test_numeric_failure_exit_code(self, runner):
        result = runner.invoke(
            main, ["solve", "--v", "0.1", "--delta", "0.01", "--accept-tol", "1e-30"]
        )
        assert result.exit_code == 1


class TestTable1:
    def test_full_grid(self, runner, tmp_path, table1):
        result = runner.invoke(main, ["table1", "--out-dir", str(tmp_path)])
        assert result.exit_code == 0
        header, rows = read_csv_rows(tmp_path / "table1.csv")
        assert header == ["v", "delta", "z_star", "a", "fit", "status"]
        assert len(rows) == 12
        for row in rows:
            v, delta, z = float(row[0]), float(row[1]), float(row[2])
            assert row[5] == "ok"
            ref = table1[(v, delta)]
            if delta == 0.0:
                assert z <= 1e-6
            else:
                assert z == pytest.approx(ref, abs=1e-6)


class TestMcPipeline:
    def test_sample_cdf_pof(self, runner, tmp_path):
        result = runner.invoke(main, [
            "mc-sample", "--out-dir", str(tmp_path), "--v", "0.1", "--eps", "0.1",
            "--n", "300", "--seed", "5", "--workers", "1", "--out", "run.csv",
        ])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "run.csv").exists()
        assert (tmp_path / "run.json").exists()

        result = runner.invoke(main, [
            "cdf", "--out-dir", str(tmp_path), "--input", str(tmp_path / "run.csv"),
            "--lo", "0",
        ])
        assert result.exit_code == 0, result.output
        header, rows = read_csv_rows(tmp_path / "cdf.csv")
        ys = [float(r[1]) for r in rows]
        assert ys[0] == 0.0 and ys[-1] == 1.0
        assert all(a <= b for a, b in zip(ys, ys[1:]))

        result = runner.invoke(main, [
            "pof", "--out-dir", str(tmp_path), "--input", str(tmp_path / "run.csv"),
            "--dx", "0", "--dx", "15",
        ])
        assert result.exit_code == 0, result.output
        header, rows = read_csv_rows(tmp_path / "pof.csv")
        assert header == ["dx", "p_success"]
        assert float(rows[0][1]) >= float(rows[1][1])

    def test_cdf_exact_step_points(self, runner, tmp_path):
        sample = tmp_path / "three.csv"
        sample.write_text("z,delta,fit\n1.0,0.0,0.0\n2.0,0.0,0.0\n3.0,0.0,0.0\n")
        result = runner.invoke(main, [
            "cdf", "--out-dir", str(tmp_path), "--input", str(sample),
            "--lo", "0", "--hi", "3",
        ])
        assert result.exit_code == 0, result.output
        _, rows = read_csv_rows(tmp_path / "cdf.csv")
        xs = [float(r[0]) for r in rows]
        ys = [float(r[1]) for r in rows]
        assert xs == [0.0, 1.0, 2.0, 3.0]
        assert ys == pytest.approx([0.0, 1 / 3, 2 / 3, 1.0])

    def test_pof_all_below_threshold(self, runner, tmp_path):
        sample = tmp_path / "flat.csv"
        rows = "\n".join(f"{z},0.0,0.0" for z in (0.50, 0.51, 0.52))
        sample.write_text("z,delta,fit\n" + rows + "\n")
        result = runner.invoke(main, [
            "pof", "--out-dir", str(tmp_path), "--input", str(sample), "--dx", "15",
        ])
        assert result.exit_code == 0
        _, out_rows = read_csv_rows(tmp_path / "pof.csv")
        assert float(out_rows[0][1]) == 0.0

    def test_cdf_empty_window_numeric_failure(self, runner, tmp_path):
        sample = tmp_path / "w.csv"
        sample.write_text("z,delta,fit\n5.0,0.0,0.0\n")
        result = runner.invoke(main, [
            "cdf", "--out-dir", str(tmp_path), "--input", str(sample),
            "--lo", "0", "--hi", "1",
        ])
        assert result.exit_code == 1

    def test_mc_bounds(self, runner, tmp_path):
        result = runner.invoke(main, [
            "mc-bounds", "--out-dir", str(tmp_path), "--v", "0.1", "--eps", "0.1",
            "--n", "120", "--repeats", "3", "--dx", "0", "--seed", "2",
            "--workers", "1",
        ])
        assert result.exit_code == 0, result.output
        header, rows = read_csv_rows(tmp_path / "mc_bounds.csv")
        assert header == ["dx", "min", "mean", "max"]
        lo, mid, hi = (float(x) for x in rows[0][1:])
        assert lo <= mid <= hi


class TestOuqCommand:
    def test_bounds_measures_checkpoints(self, runner, tmp_path, v01_eps01_targets):
        targets_file = tmp_path / "targets.json"
        targets_file.write_text(json.dumps(v01_eps01_targets))
        args = [
            "ouq", "--out-dir", str(tmp_path), "--v", "0.1", "--eps", "0.1",
            "--constraints", "mean_delta", "--dx", "0",
            "--targets-file", str(targets_file), "--seed", "4",
            "--npop", "16", "--maxiter", "120",
        ]
        result = runner.invoke(main, args)
        assert result.exit_code == 0, result.output
        header, rows = read_csv_rows(tmp_path / "ouq_bounds.csv")
        assert header == ["dx", "lower", "upper", "evals_lower", "evals_upper"]
        lower, upper = float(rows[0][1]), float(rows[0][2])
        assert 0.0 <= lower <= upper <= 1.0
        for direction in ("lower", "upper"):
            mpath = tmp_path / f"ouq_measure_dx0_{direction}.json"
            doc = json.loads(mpath.read_text())
            weights = doc["components"][0]["weights"]
            assert sum(weights) == pytest.approx(1.0, abs=1e-10)
            assert (tmp_path / f"ouq_solver_dx0_{direction}.json").exists()

    def test_worker_count_does_not_change_output(self, runner, tmp_path,
                                                 v01_eps01_targets):
        targets_file = tmp_path / "targets.json"
        targets_file.write_text(json.dumps(v01_eps01_targets))
        for sub, workers in (("w1", "1"), ("w2", "2")):
            result = runner.invoke(main, [
                "ouq", "--out-dir", str(tmp_path / sub), "--v", "0.1",
                "--eps", "0.1", "--constraints", "mean_delta",
                "--dx", "0", "--dx", "15",
                "--targets-file", str(targets_file), "--seed", "4",
                "--npop", "12", "--maxiter", "80", "--workers", workers,
            ])
            assert result.exit_code == 0, result.output
        assert (tmp_path / "w1" / "ouq_bounds.csv").read_bytes() == (
            tmp_path / "w2" / "ouq_bounds.csv"
        ).read_bytes()

    def test_config_sidecar_written(self, runner, tmp_path):
        sample = tmp_path / "s.csv"
        sample.write_text("z,delta,fit\n0.2,0.0,0.0\n0.4,0.0,0.0\n")
        result = runner.invoke(main, [
            "pof", "--out-dir", str(tmp_path), "--input", str(sample), "--dx", "0",
        ])
        assert result.exit_code == 0
        doc = json.loads((tmp_path / "pof.csv.config.json").read_text())
        assert doc["command"] == "pof" and doc["dx"] == [0]

    def test_single_direction(self, runner, tmp_path, v01_eps01_targets):
        targets_file = tmp_path / "targets.json"
        targets_file.write_text(json.dumps(v01_eps01_targets))
        result = runner.invoke(main, [
            "ouq", "--out-dir", str(tmp_path), "--v", "0.1", "--eps", "0.1",
            "--constraints", "mean_delta", "--direction", "upper", "--dx", "0",
            "--targets-file", str(targets_file), "--seed", "4",
            "--npop", "12", "--maxiter", "60",
        ])
        assert result.exit_code == 0, result.output
        _, rows = read_csv_rows(tmp_path / "ouq_bounds.csv")
        assert rows[0][1] == "nan"
        assert 0.0 <= float(rows[0][2]) <= 1.0


class TestDeterminism:
    def test_mc_sample_rerun_byte_identical(self, runner, tmp_path):
        for sub in ("a", "b"):
            result = runner.invoke(main, [
                "mc-sample", "--out-dir", str(tmp_path / sub), "--v", "0.1",
                "--eps", "0.01", "--n", "200", "--seed", "9", "--workers", "1",
                "--out", "run.csv",
            ])
            assert result.exit_code == 0, result.output
        assert (tmp_path / "a" / "run.csv").read_bytes() == (
            tmp_path / "b" / "run.csv"
        ).read_bytes()

    def test_ouq_rerun_byte_identical(self, runner, tmp_path, v01_eps01_targets):
        targets_file = tmp_path / "targets.json"
        targets_file.write_text(json.dumps(v01_eps01_targets))
        for sub in ("a", "b"):
            result = runner.invoke(main, [
                "ouq", "--out-dir", str(tmp_path / sub), "--v", "0.1",
                "--eps", "0.1", "--constraints", "mean_delta", "--dx", "0",
                "--targets-file", str(targets_file), "--seed", "4",
                "--npop", "10", "--maxiter", "60",
            ])
            assert result.exit_code == 0, result.output
        assert (tmp_path / "a" / "ouq_bounds.csv").read_bytes() == (
            tmp_path / "b" / "ouq_bounds.csv"
        ).read_bytes()
