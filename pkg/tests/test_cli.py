"""Command-line surface: subcommands, outputs, and exit codes."""

import re

import numpy as np
import pandas as pd
import pytest

from megpd import ModelFile, megpd_simulate
from megpd.cli import main
from test_pipeline import river_truth


def write_synthetic_csv(path, n=200, seed=0, d=3):
    x = megpd_simulate(n, river_truth(d), seed=seed)
    frame = pd.DataFrame(x + 0.5, columns=["a", "b", "c"][:d])
    frame.to_csv(path, index=False)
    return path


@pytest.fixture(scope="module")
def fitted(tmp_path_factory):
    """A model fitted through the CLI, shared by downstream subcommands."""
    workdir = tmp_path_factory.mktemp("cli")
    csv = write_synthetic_csv(workdir / "data.csv")
    code = main(["fit", str(csv), "--K", "6", "--m", "8", "--seed", "0",
                 "--output-dir", str(workdir)])
    assert code == 0
    return workdir, csv, workdir / "model.json"


class TestFit:
    def test_writes_model_and_report(self, fitted, capsys):
        workdir, csv, model_path = fitted
        assert model_path.exists()
        model = ModelFile.load(model_path)
        assert model.d == 3
        assert model.preprocess is not None
        code = main(["fit", str(csv), "--K", "6", "--m", "8",
                     "--output-dir", str(workdir), "--model-name", "m2.json"])
        out = capsys.readouterr().out
        assert code == 0
        assert "step 1 (radial):  kappa=" in out
        assert "step 2 (angular): rho=" in out
        assert "model written to" in out

    def test_reference_column_flag(self, fitted, tmp_path):
        _, csv, _ = fitted
        code = main(["fit", str(csv), "--K", "6", "--m", "8",
                     "--ref-column", "a", "--output-dir", str(tmp_path)])
        assert code == 0
        assert ModelFile.load(tmp_path / "model.json").columns == ("b", "c", "a")

    def test_lambda_grid_forms(self, fitted, tmp_path):
        _, csv, _ = fitted
        for grid in ("1e-4:1e2:8", "0.1,1,10"):
            code = main(["fit", str(csv), "--K", "6", "--m", "8",
                         "--lambda-grid", grid, "--output-dir", str(tmp_path)])
            assert code == 0

    def test_no_preprocess_flag(self, fitted, tmp_path):
        _, csv, _ = fitted
        code = main(["fit", str(csv), "--K", "6", "--m", "8",
                     "--no-preprocess", "--output-dir", str(tmp_path)])
        assert code == 0
        assert ModelFile.load(tmp_path / "model.json").preprocess is None


class TestExitCodes:
    def test_usage_errors_exit_1(self):
        for argv in ([], ["frobnicate"], ["simulate"], ["fit"]):
            with pytest.raises(SystemExit) as exc:
                main(argv)
            assert exc.value.code == 1

    def test_missing_file_exits_2(self, tmp_path, capsys):
        code = main(["fit", str(tmp_path / "absent.csv")])
        assert code == 2
        assert "data error" in capsys.readouterr().err

    def test_wrong_column_exits_2(self, fitted, capsys):
        _, csv, _ = fitted
        code = main(["fit", str(csv), "--columns", "a,zz"])
        assert code == 2
        assert "available" in capsys.readouterr().err

    def test_missing_model_file_exits_2(self, fitted):
        _, csv, _ = fitted
        assert main(["diagnose", str(csv), "--model", "no-such-model.json"]) == 2

    def test_chi_without_source_exits_2(self, capsys):
        assert main(["chi"]) == 2
        assert "chi needs" in capsys.readouterr().err

    def test_degenerate_fit_exits_3(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        col = rng.gamma(2.0, 1.0, 60)
        pd.DataFrame({"a": col, "b": col}).to_csv(tmp_path / "same.csv",
                                                  index=False)
        code = main(["fit", str(tmp_path / "same.csv"), "--K", "6",
                     "--output-dir", str(tmp_path)])
        assert code == 3
        err = capsys.readouterr().err
        assert "fitting failed" in err
        assert "step 2 (angular fit)" in err
        assert "degenerate log-ratios" in err


class TestSimulate:
    def test_from_copula(self, tmp_path, capsys):
        code = main(["simulate", "-n", "500", "--copula", "gaussian",
                     "--alpha", "0.5", "--seed", "1",
                     "--output-dir", str(tmp_path)])
        assert code == 0
        frame = pd.read_csv(tmp_path / "samples.csv")
        assert list(frame.columns) == ["x1", "x2"]
        assert len(frame) == 500
        assert frame.to_numpy().min() > 0.0
        assert frame.to_numpy().max() < 1.0

    def test_copula_with_margins(self, tmp_path):
        code = main(["simulate", "-n", "300", "--copula", "symmetric-logistic",
                     "--with-margins", "--seed", "2",
                     "--output-dir", str(tmp_path), "--output", "m.csv"])
        assert code == 0
        frame = pd.read_csv(tmp_path / "m.csv")
        assert frame.to_numpy().max() > 1.0

    def test_from_model_deterministic(self, fitted, tmp_path):
        _, _, model_path = fitted
        for name in ("s1.csv", "s2.csv"):
            code = main(["simulate", "-n", "100", "--model", str(model_path),
                         "--seed", "3", "--output-dir", str(tmp_path),
                         "--output", name])
            assert code == 0
        assert ((tmp_path / "s1.csv").read_bytes()
                == (tmp_path / "s2.csv").read_bytes())
        frame = pd.read_csv(tmp_path / "s1.csv")
        assert list(frame.columns) == ["a", "b", "c"]


class TestDiagnose:
    def test_writes_tables(self, fitted, tmp_path, capsys):
        _, csv, model_path = fitted
        code = main(["diagnose", str(csv), "--model", str(model_path),
                     "--output-dir", str(tmp_path), "--seed", "0"])
        assert code == 0
        out = capsys.readouterr().out
        for name in ("radial_qq", "delta_grid", "chi_empirical"):
            assert name in out
            assert (tmp_path / f"{name}.csv").exists()


class TestBootstrap:
    def test_intervals_in_reporting_format(self, fitted, tmp_path, capsys):
        _, _, model_path = fitted
        code = main(["bootstrap", "--model", str(model_path), "--nboot", "100",
                     "--seed", "4", "--output-dir", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out.strip().splitlines()
        pattern = re.compile(
            r"^(kappa|xi|rho)\s+-?\d+\.\d{3} \(-?\d+\.\d{3}, -?\d+\.\d{3}\)$")
        assert len(out) == 3
        for line in out:
            assert pattern.match(line), line
        table = pd.read_csv(tmp_path / "intervals.csv")
        assert set(table["parameter"]) == {"kappa", "xi", "rho"}
        assert (tmp_path / "qq_band.csv").exists()
        assert (tmp_path / "delta_band.csv").exists()


class TestChi:
    def test_empirical_from_csv(self, fitted, tmp_path):
        _, csv, _ = fitted
        code = main(["chi", str(csv), "--p-grid", "0.7,0.8,0.85",
                     "--output-dir", str(tmp_path)])
        assert code == 0
        frame = pd.read_csv(tmp_path / "chi.csv")
        assert len(frame) == 6
        assert set(frame["side"]) == {"upper", "lower"}

    def test_exact_copula_curve(self, tmp_path):
        code = main(["chi", "--copula", "gaussian", "--alpha", "1.0",
                     "--p-grid", "0.9", "--mc-size", "50000", "--seed", "5",
                     "--output-dir", str(tmp_path), "--output", "c.csv"])
        assert code == 0
        frame = pd.read_csv(tmp_path / "c.csv")
        assert list(frame.columns) == ["p", "chi_upper", "chi_lower", "se"]
        assert frame.loc[0, "chi_upper"] == pytest.approx(0.1, abs=0.02)

    def test_model_curve_with_errors(self, fitted, tmp_path):
        _, _, model_path = fitted
        code = main(["chi", "--model", str(model_path), "--p-grid", "0.9",
                     "--mc-size", "20000", "--seed", "6",
                     "--output-dir", str(tmp_path), "--output", "mc.csv"])
        assert code == 0
        frame = pd.read_csv(tmp_path / "mc.csv")
        assert {"p", "side", "chi", "se"} <= set(frame.columns)
        assert len(frame) == 2
        assert (frame["se"] > 0.0).all()
