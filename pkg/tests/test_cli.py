import io
import json
import subprocess
import sys

import numpy as np
import pytest

from equimarginal.cli import (
    CliConfig,
    emit_solution,
    main,
    parse_args,
    read_instance_csv,
    run_verify,
)
from equimarginal.closed_form import solve
from equimarginal.model import DomainError, ProblemInstance

from conftest import TWO_CUP_F, TWO_CUP_X


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestParseArgs:
    def test_inline(self):
        cfg = parse_args(["solve", "-a", "0.8,0.25"])
        assert cfg.command == "solve"
        assert cfg.coefficients == (0.8, 0.25)
        assert cfg.input_path is None

    def test_file(self):
        cfg = parse_args(["solve", "--input", "cups.csv", "--format", "json"])
        assert str(cfg.input_path) == "cups.csv"
        assert cfg.output_format == "json"

    def test_verify_grid(self):
        cfg = parse_args(["verify", "-a", "0.8,0.4,0.25", "--oracle", "grid", "--resolution", "1e-3"])
        assert cfg.command == "verify"
        assert cfg.oracles == ("grid",)
        assert cfg.resolution == 1e-3

    def test_bench(self):
        cfg = parse_args(["bench", "--n", "10", "--reps", "2", "--seed", "7"])
        assert (cfg.n, cfg.reps, cfg.seed) == (10, 2, 7)

    @pytest.mark.parametrize(
        "argv",
        [
            ["solve"],
            ["solve", "-a", "1", "--input", "x.csv"],
            ["solve", "-a", "1", "--bogus"],
            ["bench", "--n", "10"],
            ["bench", "--n", "0", "--seed", "1"],
            ["verify", "-a", "1", "--oracle", "simplex"],
            [],
        ],
    )
    def test_usage_errors(self, argv):
        with pytest.raises(SystemExit) as exc:
            parse_args(argv)
        assert exc.value.code == 2

    @pytest.mark.parametrize("token", ["abc", "nan", "1e", "0.8;0.2", "inf", "1_0"])
    def test_malformed_number_named(self, capsys, token):
        code, _, err = run(capsys, "solve", "-a", f"0.5,{token}")
        assert code == 2
        assert repr(token) in err


class TestReadCsv:
    def test_one_per_line(self, tmp_path):
        f = tmp_path / "c.csv"
        f.write_text("0.8\n0.4\n0.25\n")
        assert read_instance_csv(f).a.tolist() == [0.8, 0.4, 0.25]

    def test_comment_and_row(self, tmp_path):
        f = tmp_path / "c.csv"
        f.write_text("# cups\n0.8,0.25\n")
        assert read_instance_csv(f).a.tolist() == [0.8, 0.25]

    def test_blank_lines(self, tmp_path):
        f = tmp_path / "c.csv"
        f.write_text("\n0.8\n\n  \n0.25\n")
        assert read_instance_csv(f).a.tolist() == [0.8, 0.25]

    def test_negative_line_number(self, tmp_path):
        f = tmp_path / "c.csv"
        f.write_text("0.8\n-1\n")
        with pytest.raises(DomainError, match=":2:"):
            read_instance_csv(f)

    def test_empty(self, tmp_path):
        f = tmp_path / "c.csv"
        f.write_text("# nothing\n\n")
        with pytest.raises(DomainError):
            read_instance_csv(f)

    def test_malformed(self, tmp_path):
        f = tmp_path / "c.csv"
        f.write_text("0.8\n0,25\n")
        # "0,25" splits into 0 and 25; 0 is rejected
        with pytest.raises(DomainError, match=":2:"):
            read_instance_csv(f)


class TestEmit:
    def test_two_cup_json(self):
        p = ProblemInstance([0.8, 0.25])
        doc = json.loads(emit_solution(p, solve(p), "json"))
        assert set(doc) == {"input", "allocation", "active_count", "objective", "lambda", "kkt"}
        assert set(doc["kkt"]) == {"max_active_deviation", "max_inactive_violation", "passed"}
        assert doc["active_count"] == 2
        assert doc["objective"] == pytest.approx(TWO_CUP_F, abs=1e-12)
        assert doc["kkt"]["passed"] is True

    def test_three_cup_table(self):
        p = ProblemInstance([0.8, 0.4, 0.25])
        lines = emit_solution(p, solve(p), "table").splitlines()
        assert lines[0].split() == ["index", "a", "x", "marginal"]
        assert lines[3].split()[:3] == ["3", "0.25", "0"]
        assert len({len(l) for l in lines[:4]}) == 1

    def test_single_json(self):
        p = ProblemInstance([0.5])
        doc = json.loads(emit_solution(p, solve(p), "json"))
        assert doc["allocation"] == [1.0]
        assert doc["objective"] == 0.25

    def test_csv(self):
        p = ProblemInstance([0.8, 0.25])
        rows = emit_solution(p, solve(p), "csv").splitlines()
        assert rows[0] == "index,a,x,marginal"
        assert len(rows) == 3

    def test_twelve_digits(self):
        p = ProblemInstance([0.8, 0.25])
        doc = json.loads(emit_solution(p, solve(p), "json"))
        for v in doc["allocation"] + [doc["objective"], doc["lambda"]]:
            assert len(repr(v).replace("0.", "", 1).lstrip("0")) <= 12

    def test_round_trip(self, rng):
        for _ in range(100):
            a = rng.uniform(0.01, 1, int(rng.integers(1, 12)))
            p = ProblemInstance(a)
            r = solve(p)
            doc = json.loads(emit_solution(p, r, "json"))
            np.testing.assert_allclose(doc["allocation"], r.allocation.x, atol=1e-12, rtol=0)

    def test_original_order(self, capsys):
        code, out, _ = run(capsys, "solve", "-a", "0.25,0.8")
        assert code == 0
        np.testing.assert_allclose(json.loads(out)["allocation"], TWO_CUP_X[::-1], atol=1e-12)


class TestCommands:
    def test_solve_file(self, capsys, tmp_path):
        f = tmp_path / "cups.csv"
        f.write_text("0.8\n0.25\n")
        code, out, _ = run(capsys, "solve", "--input", str(f), "--format", "json")
        assert code == 0
        assert json.loads(out)["active_count"] == 2

    def test_solve_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "solve", "--input", str(tmp_path / "nope.csv"))
        assert code == 2
        assert "error" in err

    def test_solve_bad_value(self, capsys):
        code, _, _ = run(capsys, "solve", "-a", "0.8,0")
        assert code == 2

    def test_verify_two_cup(self, capsys):
        code, out, _ = run(capsys, "verify", "-a", "0.8,0.25")
        assert code == 0
        doc = json.loads(out)
        assert doc["passed"] is True
        assert set(doc["methods"]) == {"closed_form", "lambda_bisection", "projected_gradient", "grid_search"}

    def test_verify_grid_too_large(self, capsys):
        code, _, err = run(capsys, "verify", "-a", "1,0.9,0.8,0.7,0.6", "--oracle", "grid")
        assert code == 2
        assert "n <= 4" in err

    def test_verify_boundary(self, capsys):
        code, out, _ = run(capsys, "verify", "-a", "1,0.2")
        assert code == 0
        for m in json.loads(out)["methods"].values():
            np.testing.assert_allclose(m["allocation"], [1, 0], atol=1e-8)

    def test_verify_failure_exit(self, capsys):
        code, out, _ = run(capsys, "verify", "-a", "0.8,0.25", "--oracle", "grid",
                           "--resolution", "0.1", "--tol", "1e-12")
        assert code == 1
        assert json.loads(out)["passed"] is False

    @pytest.mark.parametrize("fmt", ["table", "csv"])
    def test_verify_formats(self, capsys, fmt):
        code, out, _ = run(capsys, "verify", "-a", "0.8,0.4,0.25", "--format", fmt)
        assert code == 0
        assert "grid_search" in out

    def test_run_verify_direct(self):
        buf = io.StringIO()
        cfg = CliConfig(command="verify", coefficients=(0.8, 0.25), oracles=("bisection",))
        assert run_verify(cfg, buf) == 0
        assert set(json.loads(buf.getvalue())["methods"]) == {"closed_form", "lambda_bisection"}

    @pytest.mark.parametrize("fmt", ["json", "csv"])
    def test_bench(self, capsys, fmt):
        code, out, _ = run(capsys, "bench", "--n", "100", "--reps", "2", "--seed", "3", "--format", fmt)
        assert code == 0
        if fmt == "csv":
            rows = out.splitlines()
            assert rows[0] == "n,rep,phase,nanoseconds"
            assert len(rows) == 1 + 2 * 5
        else:
            doc = json.loads(out)
            assert doc["n"] == 100 and doc["reps"] == 2

    @pytest.mark.parametrize(
        "argv",
        [
            ["solve", "-a", "0.8,0.4,0.25", "--format", "table"],
            ["solve", "-a", "0.3,0.9,0.9,0.01"],
            ["verify", "-a", "0.8,0.4,0.25"],
        ],
    )
    def test_deterministic(self, capsys, argv):
        outs = {run(capsys, *argv)[1] for _ in range(3)}
        assert len(outs) == 1

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "equimarginal", "solve", "-a", "0.8,0.25"],
            capture_output=True, text=True, check=False,
        )
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["active_count"] == 2

    def test_entry_point_usage_exit(self):
        proc = subprocess.run(
            [sys.executable, "-m", "equimarginal", "solve", "--nope"],
            capture_output=True, text=True, check=False,
        )
        assert proc.returncode == 2
