import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from tailcte import HeavyTailModel, sample, true_cte
from tailcte.cli import ESTIMATE_COLUMNS, EXIT_ESTIMATION, EXIT_OK, EXIT_USAGE, main, read_losses
from tailcte.montecarlo import DEFAULT_SEED, REPORT_COLUMNS


def _write(path, values, header=None):
    lines = ([header] if header else []) + [repr(float(v)) for v in values]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def frechet_file(tmp_path):
    s = sample(HeavyTailModel.frechet(1.75), 2000, DEFAULT_SEED)
    return _write(tmp_path / "losses.txt", s.values)


class TestReadLosses:
    def test_header_and_blank_lines(self, tmp_path):
        p = tmp_path / "x.txt"
        p.write_text("loss\n1.5\n\n2.5\n  3\n")
        assert read_losses(str(p)).tolist() == [1.5, 2.5, 3.0]

    def test_bad_line_is_named(self, tmp_path):
        from tailcte.cli import UsageError

        p = tmp_path / "x.txt"
        p.write_text("1.0\n2.0\nabc\n")
        with pytest.raises(UsageError, match="line 3"):
            read_losses(str(p))

    def test_non_finite(self, tmp_path):
        from tailcte.cli import UsageError

        p = tmp_path / "x.txt"
        p.write_text("1.0\ninf\n")
        with pytest.raises(UsageError, match="line 2"):
            read_losses(str(p))


class TestEstimate:
    def test_output_schema(self, frechet_file, capsys):
        assert main(["estimate", frechet_file, "--t", "0.9,0.95"]) == EXIT_OK
        rows = _rows(capsys.readouterr().out)
        assert len(rows) == 2 and tuple(rows[0]) == ESTIMATE_COLUMNS
        assert rows[0]["n"] == "2000" and rows[0]["k"] == "299"
        assert rows[0]["status"] == "ok"

    @pytest.mark.xfail(strict=True, reason=(
        "single-sample spread: about 58% of samples land within 10% of the truth; "
        "the default-seed sample gives 10.33 (+19.8%)"))
    def test_single_sample_example(self, frechet_file, capsys):
        # one sample drawn with the documented default seed, chosen before looking
        assert main(["estimate", frechet_file, "--t", "0.9", "--epsilon", "0.25"]) == EXIT_OK
        row = _rows(capsys.readouterr().out)[0]
        assert float(row["cte_new"]) == pytest.approx(8.6207, rel=0.10)

    def test_json(self, frechet_file, capsys):
        assert main(["estimate", frechet_file, "--format", "json"]) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert list(data[0]) == list(ESTIMATE_COLUMNS)

    def test_output_file(self, frechet_file, tmp_path, capsys):
        out = tmp_path / "o.csv"
        assert main(["estimate", frechet_file, "-o", str(out)]) == EXIT_OK
        assert capsys.readouterr().out == ""
        assert out.read_text().startswith("n,k,t,")

    def test_single_observation(self, tmp_path, capsys):
        path = _write(tmp_path / "one.txt", [3.0])
        assert main(["estimate", path]) == EXIT_USAGE
        assert "at least 3 observations" in capsys.readouterr().err

    def test_k_range(self, frechet_file, capsys):
        assert main(["estimate", frechet_file, "--k", "2000"]) == EXIT_USAGE
        assert "k=2000" in capsys.readouterr().err

    def test_too_few_positive(self, tmp_path, capsys):
        path = _write(tmp_path / "neg.txt", [-1.0] * 20 + [1.0, 2.0, 3.0])
        assert main(["estimate", path, "--k", "5"]) == EXIT_USAGE
        assert "positive" in capsys.readouterr().err

    def test_parse_error(self, tmp_path, capsys):
        p = tmp_path / "bad.txt"
        p.write_text("x\n1\n2\nthree\n")
        assert main(["estimate", str(p)]) == EXIT_USAGE
        assert "line 4" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["estimate", str(tmp_path / "absent.txt")]) == EXIT_USAGE

    def test_estimation_failure_and_fallback(self, tmp_path, capsys):
        # exact squares: the CML system has no admissible root at k=10
        path = _write(tmp_path / "p.txt", np.arange(1.0, 41.0) ** 2)
        assert main(["estimate", path, "--k", "10"]) == EXIT_ESTIMATION
        captured = capsys.readouterr()
        assert _rows(captured.out)[0]["status"] == "failed"
        assert "did not converge" in captured.err
        assert main(["estimate", path, "--k", "10", "--fallback"]) == EXIT_OK
        row = _rows(capsys.readouterr().out)[0]
        assert row["status"] == "fallback" and row["cte_new"] == row["cte_old"]

    def test_forced_failure_exit_code(self, tmp_path, capsys):
        # Hill below one: both estimators refuse, no fallback possible
        path = _write(tmp_path / "h.txt", np.exp(np.arange(1.0, 31.0) * 2))
        assert main(["estimate", path, "--k", "10", "--fallback"]) == EXIT_ESTIMATION
        assert _rows(capsys.readouterr().out)[0]["status"] == "failed"

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            main(["estimate"])
        assert exc.value.code == EXIT_USAGE

    def test_hill_round_trip(self, tmp_path, capsys):
        alphas = []
        for seed in range(5):
            s = sample(HeavyTailModel.frechet(1.5), 10_000, seed)
            path = _write(tmp_path / f"r{seed}.txt", s.values)
            main(["estimate", path])
            alphas.append(float(_rows(capsys.readouterr().out)[0]["alpha_hill"]))
        assert 1.2 <= np.mean(alphas) <= 1.9
        assert all(1.2 <= a <= 1.9 for a in alphas)


class TestSimulate:
    ARGS = ["simulate", "--model", "frechet", "--alpha", "1.5", "--n", "250,500,1000,2000",
            "--t", "0.9,0.95", "--reps", "1000", "--seed", "42"]

    @pytest.mark.slow
    def test_example_rows_and_rerun(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(self.ARGS + ["-o", str(a)]) == EXIT_OK
        assert main(self.ARGS + ["-o", str(b)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()
        rows = _rows(a.read_text())
        assert len(rows) == 16
        assert tuple(rows[0]) == REPORT_COLUMNS

    def test_burr_true_cte_column(self, capsys):
        args = ["simulate", "--model", "burr", "--lambda", "1.75", "--tau", "1", "--n", "300",
                "--t", "0.9,0.95", "--reps", "3", "--seed", "1"]
        assert main(args) == EXIT_OK
        model = HeavyTailModel.burr(1.75, 1.0)
        for row in _rows(capsys.readouterr().out):
            assert float(row["true_cte"]) == pytest.approx(true_cte(model, float(row["t"])), rel=1e-9)
            assert row["model"] == "burr"

    def test_ten_significant_digits(self, capsys):
        main(["simulate", "--model", "pareto", "--alpha", "1.5", "--n", "300", "--t", "0.9",
              "--reps", "2"])
        row = _rows(capsys.readouterr().out)[0]
        assert row["true_cte"] == "%.10g" % true_cte(HeavyTailModel.pareto(1.5), 0.9)

    @pytest.mark.parametrize("extra", [
        ["--model", "frechet"],
        ["--model", "frechet", "--alpha", "-1"],
        ["--model", "burr", "--lambda", "1.5", "--tau", "0"],
        ["--model", "frechet", "--alpha", "1.5", "--t", "1.2"],
    ])
    def test_invalid_model(self, extra, capsys):
        assert main(["simulate", "--reps", "2", "--n", "100"] + extra) == EXIT_USAGE


class TestKSweep:
    def test_header_and_rows(self, capsys):
        args = ["ksweep", "--model", "frechet", "--alpha", "1.75", "--n", "1000", "--reps", "2",
                "--kmin", "50", "--kmax", "850", "--step", "50"]
        assert main(args) == EXIT_OK
        text = capsys.readouterr().out
        assert text.splitlines()[0] == "k,mean_old,mean_new,true_cte"
        assert len(_rows(text)) == 17

    @pytest.mark.parametrize("grid", [["--kmin", "1"], ["--kmin", "100", "--kmax", "100"],
                                      ["--kmax", "1000"], ["--step", "0"]])
    def test_invalid_grid(self, grid, capsys):
        args = ["ksweep", "--model", "frechet", "--alpha", "1.5", "--n", "1000", "--reps", "1"]
        assert main(args + grid) == EXIT_USAGE

    def test_strict_level_marks_rows(self, capsys):
        args = ["ksweep", "--model", "frechet", "--alpha", "1.5", "--n", "1000", "--reps", "1",
                "--t", "0.8", "--kmin", "50", "--kmax", "350", "--step", "100", "--strict-level"]
        assert main(args) == EXIT_OK
        captured = capsys.readouterr()
        rows = _rows(captured.out)
        assert [r["mean_old"] for r in rows[2:]] == ["nan", "nan"]
        assert "invalid" in captured.err


def test_console_script_entry_point(tmp_path):
    path = _write(tmp_path / "s.txt", sample(HeavyTailModel.frechet(1.5), 500, 3).values)
    proc = subprocess.run([sys.executable, "-m", "tailcte.cli", "estimate", path],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_OK
    assert proc.stdout.startswith("n,k,t,")
