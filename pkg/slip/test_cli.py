"""
Tests for the command-line interface and its artifacts.
"""

import json
import math

import numpy as np
import pytest

from slip.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, build_parser, config_from_args, main, parse_range
from slip.errors import DomainError, SingularityError
from slip.output_utils import plain, read_artifact, read_table
from slip.reproduce_all import STEPS
from slip.reproduce_all import main as reproduce_main


def table(path):
    header, rows = read_table(str(path))
    return header, [[float(v) for v in row] for row in rows]


class TestParseRange:
    """lo:hi:n, lists and single values."""

    def test_linear(self):
        assert parse_range("0.2:0.8:7") == pytest.approx([0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])

    def test_log(self):
        assert parse_range("1e2:1e4:3", log=True) == pytest.approx([1e2, 1e3, 1e4])

    def test_list_and_single(self):
        assert parse_range("0.05,0.1") == [0.05, 0.1]
        assert parse_range("0.4") == [0.4]

    @pytest.mark.parametrize("text", ["0.2:0.8:0", "", "a:b:c", "1:2"])
    def test_invalid(self, text):
        with pytest.raises(DomainError):
            parse_range(text)


class TestSimulate:
    """Trajectory tables."""

    def test_first_row_and_monotone_time(self, tmp_path):
        out = tmp_path / "sim.csv"
        assert main(["simulate", "--alpha", "0.4", "--U", "1", "--V", "0.1", "--K", "12", "--T", "1", "--out", str(out)]) == EXIT_OK
        header, rows = table(out)
        assert header[:7] == ["t", "tau_plus", "theta", "theta_dot", "L", "L_dot", "energy"]
        first = rows[0]
        assert first[:2] == [0.0, 0.0]
        assert first[2] == -0.4
        assert first[3] == pytest.approx(0.8821192, abs=1e-6)
        assert first[4] == 1.0
        assert first[5] == pytest.approx(-0.4815244, abs=1e-6)
        assert first[6] == pytest.approx(0.505 + math.cos(0.4), rel=1e-12)
        times = [row[0] for row in rows]
        assert all(b > a for a, b in zip(times, times[1:]))
        assert times[-1] == 1.0

    def test_zero_horizon(self, tmp_path):
        out = tmp_path / "sim.csv"
        assert main(["simulate", "--T", "0", "--out", str(out)]) == EXIT_OK
        _, rows = table(out)
        assert len(rows) == 1

    def test_zero_stiffness_is_validation_error(self, capsys):
        assert main(["simulate", "--K", "0"]) == EXIT_VALIDATION
        payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert payload["error"] == "DomainError"

    def test_stdout_when_no_out(self, capsys):
        assert main(["simulate", "--T", "0"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("# slip simulate\n# config: ")

    def test_json_format(self, tmp_path):
        out = tmp_path / "sim.json"
        assert main(["simulate", "--T", "0.01", "--format", "json", "--out", str(out)]) == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["command"] == "simulate"
        assert payload["result"]["params"]["K"] == 12.0

    def test_rerun_is_bit_identical(self, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--K", "37.5", "--T", "0.2", "--out", str(first)]) == EXIT_OK
        assert main(["rerun", str(first), "--out", str(second)]) == EXIT_OK
        assert first.read_text() == second.read_text()
        command, config = read_artifact(str(first))
        assert command == "simulate"
        assert config["K"] == 37.5

    def test_output_under_a_file(self, tmp_path, capsys):
        blocker = tmp_path / "f.txt"
        blocker.write_text("x")
        assert main(["simulate", "--T", "0", "--out", str(blocker / "x.csv")]) == EXIT_VALIDATION
        payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert payload["error"] in ("FileExistsError", "NotADirectoryError")
        assert payload["path"] is not None

    def test_rerun_missing_file(self, tmp_path, capsys):
        assert main(["rerun", str(tmp_path / "missing.csv")]) == EXIT_VALIDATION
        payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert payload["error"] == "FileNotFoundError"
        assert payload["path"].endswith("missing.csv")

    def test_error_line_with_numpy_context(self):
        e = SingularityError("leg collapsed", time=np.float64(1.0), state=np.array([0.1, 0.2]), K=np.float64(12.0))
        payload = json.loads(json.dumps(plain(e.to_dict())))
        assert payload == {
            "error": "SingularityError",
            "message": "leg collapsed",
            "time": 1.0,
            "state": [0.1, 0.2],
            "K": 12.0,
        }


class TestSolve:
    """Stiffness solutions."""

    def test_approx_only(self, tmp_path):
        out = tmp_path / "solve.json"
        assert main(["solve", "--approx-only", "--out", str(out)]) == EXIT_OK
        result = json.loads(out.read_text())["result"]
        assert set(result) == {"K_approx"}
        assert result["K_approx"] == pytest.approx(11.9997, rel=1e-4)

    def test_solve(self, tmp_path):
        out = tmp_path / "solve.json"
        assert main(["solve", "--alpha", "0.4", "--U", "1", "--V", "0.1", "--out", str(out)]) == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["result"]["residual"] < 1e-10
        assert "K_star" in payload["result"]
        assert payload["config"]["tol"] == 1e-10

    def test_zero_alpha(self):
        assert main(["solve", "--alpha", "0"]) == EXIT_VALIDATION

    def test_numerical_failure_exit_code(self, capsys):
        assert main(["solve", "--max-iter", "1", "--tol", "1e-300"]) == EXIT_NUMERICAL
        payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert payload["error"] in ("IterationBudgetError", "ConvergenceError")


class TestApprox:
    """Closed-form evaluation surface."""

    def test_table(self, tmp_path):
        out = tmp_path / "approx.csv"
        assert main(["approx", "--K", "400", "--points", "11", "--out", str(out)]) == EXIT_OK
        header, rows = table(out)
        assert header == ["tau_plus", "L_tilde", "theta_tilde"]
        assert len(rows) == 11
        assert rows[0][1:] == pytest.approx([1.0, -0.4], abs=1e-15)
        assert "K_approx" in out.read_text()


class TestSweepAndVerify:
    """Grid runs with summaries."""

    def test_sweep_decreasing(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--alpha", "0.2:0.6:3", "--U", "1", "--V", "0.1", "--out", str(out)]) == EXIT_OK
        header, rows = read_table(str(out))
        K = [float(row[header.index("K_star")]) for row in rows]
        assert len(rows) == 3
        assert K[0] > K[1] > K[2]
        summary = json.loads((tmp_path / "sweep.summary.json").read_text())
        assert summary["result"]["K_star_decreasing_in_alpha"] is True

    def test_empty_grid(self):
        assert main(["sweep", "--alpha", "0.2:0.8:0"]) == EXIT_VALIDATION

    def test_all_rows_failed(self):
        assert main(["sweep", "--alpha", "0.4", "--U", "0.1", "--V", "1.0"]) == EXIT_NUMERICAL

    def test_verify_fast(self, tmp_path):
        out = tmp_path / "fast.csv"
        assert main(["verify", "fast", "--out", str(out)]) == EXIT_OK
        summary = json.loads((tmp_path / "fast.summary.json").read_text())["result"]
        assert -1.65 <= summary["fast-L"]["slope"] <= -1.35
        assert -1.65 <= summary["fast-theta"]["slope"] <= -1.35
        _, config = read_artifact(str(out))
        assert config["T"] == pytest.approx(math.pi)
        header, rows = read_table(str(out))
        assert len(rows) == 18
        assert "drift_bound" in header
        assert isinstance(summary["fast-L"]["drift_flagged"], list)


class TestReproduceAll:
    """Sequential regeneration of the datasets."""

    def test_every_step_parses(self):
        parser = build_parser()
        names = [filename for _, filename, _ in STEPS]
        assert len(set(names)) == len(names) == 7
        for _, _, argv in STEPS:
            assert config_from_args(parser.parse_args(argv))["format"] == "csv"

    def test_single_step(self, tmp_path):
        assert reproduce_main(["--out-dir", str(tmp_path), "--only", "sweep_alpha.csv"]) == 0
        header, rows = read_table(str(tmp_path / "sweep_alpha.csv"))
        assert len(rows) == 7
        assert (tmp_path / "sweep_alpha.summary.json").exists()
