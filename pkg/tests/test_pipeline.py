"""Two-step pipeline, parametric bootstrap, and diagnostic tables."""

import numpy as np
import pandas as pd
import pytest

from megpd import (
    DataError,
    Dataset,
    EgpdParams,
    EquicorrMatrix,
    FitConfig,
    MegpdModel,
    PipelineError,
    UniformDensity,
    build_basis,
    diagnostics,
    fit_pipeline,
    megpd_simulate,
    parametric_bootstrap,
)
from megpd.pipeline import format_report
from megpd.splines import DeltaFunction


def bump_delta():
    """Smooth bump on log-scale: delta(r) = 0.5 + 0.3 exp(-(r-2)^2 / 0.8)."""
    basis = build_basis(np.linspace(0.0, 10.0, 60), 9)
    log_d = np.log(0.5 + 0.3 * np.exp(-(basis.knots - 2.0) ** 2 / 0.8))
    return DeltaFunction(basis=basis, gamma=np.concatenate([[0.0], log_d]),
                         lam=0.0)


def river_truth(d=3):
    return MegpdModel(radial=EgpdParams(2.23, 0.37, UniformDensity()),
                      delta=bump_delta(),
                      corr=EquicorrMatrix(max(d - 1, 1), 0.67), d=d)


def synthetic_dataset(n, seed, d=3):
    x = megpd_simulate(n, river_truth(d), seed=seed)
    return Dataset(values=x, columns=("a", "b", "c")[:d], provenance={})


@pytest.fixture(scope="module")
def small_model():
    ds = synthetic_dataset(250, seed=42)
    return fit_pipeline(ds, FitConfig(K=6, m=8, seed=42), report=False), ds


@pytest.fixture(scope="module")
def small_bootstrap(small_model):
    model, _ = small_model
    return parametric_bootstrap(model, nboot=100, seed=1, components="all")


@pytest.fixture(scope="module")
def diag_outputs(small_model, small_bootstrap, tmp_path_factory):
    model, ds = small_model
    out = tmp_path_factory.mktemp("diag")
    paths = diagnostics(model, ds, output_dir=out, bootstrap=small_bootstrap,
                        seed=3)
    return model, ds, paths


class TestFitPipeline:
    def test_river_style_recovery(self):
        # intervals of Table-1 width centered at the simulation truth
        hits = 0
        for seed in range(10):
            ds = synthetic_dataset(1131, seed=seed)
            rep = fit_pipeline(ds, FitConfig(K=12), report=False).report
            hits += ((0.435 < rep["kappa"] < 4.025)
                     and (0.27 < rep["xi"] < 0.47)
                     and (0.635 < rep["rho"] < 0.705))
        assert hits >= 8

    def test_report_fields(self, small_model):
        model, ds = small_model
        rep = model.report
        for key in ("n", "d", "kappa", "xi", "m", "rho", "lambda", "K",
                    "radial_loglik", "penalized_loglik", "radial_converged",
                    "angular_converged"):
            assert key in rep
        assert rep["n"] == ds.n
        assert rep["d"] == 3
        assert model.seeds == {"fit": 42}
        text = format_report(rep)
        assert "step 1 (radial)" in text
        assert "step 2 (angular)" in text

    def test_two_columns_have_no_dependence_parameter(self, capsys):
        ds = synthetic_dataset(300, seed=5, d=2)
        model = fit_pipeline(ds, FitConfig(K=6, m=8), report=True)
        assert model.rho is None
        assert "rho=n/a (d=2)" in capsys.readouterr().out

    def test_too_few_rows_refused_with_guidance(self):
        ds = synthetic_dataset(15, seed=6)
        with pytest.raises(DataError, match="reduce K or add data"):
            fit_pipeline(ds, FitConfig(K=6), report=False)

    def test_non_positive_data_refused(self):
        values = np.abs(np.random.default_rng(7).normal(size=(100, 3))) + 0.1
        values[3, 1] = 0.0
        ds = Dataset(values=values, columns=("a", "b", "c"), provenance={})
        with pytest.raises(DataError, match="strictly positive"):
            fit_pipeline(ds, report=False)

    def test_single_column_refused(self):
        ds = Dataset(values=np.ones((50, 1)) + np.arange(50)[:, None] * 0.1,
                     columns=("a",), provenance={})
        with pytest.raises(DataError, match="at least 2 columns"):
            fit_pipeline(ds, report=False)

    def test_reference_column_moves_to_denominator(self):
        ds = synthetic_dataset(200, seed=8)
        model = fit_pipeline(ds, FitConfig(K=6, m=8, ref_column="a"),
                             report=False)
        assert model.columns == ("b", "c", "a")
        with pytest.raises(DataError, match="reference column"):
            fit_pipeline(ds, FitConfig(K=6, ref_column="zz"), report=False)

    def test_step1_failures_carry_stage_label(self, monkeypatch):
        ds = synthetic_dataset(200, seed=9)

        def boom(*args, **kwargs):
            raise RuntimeError("synthetic radial failure")

        monkeypatch.setattr("megpd.pipeline.fit_radial", boom)
        with pytest.raises(PipelineError, match=r"step 1 \(radial fit\)"):
            fit_pipeline(ds, FitConfig(K=6, m=8), report=False)

    def test_step2_failures_carry_stage_label(self):
        rng = np.random.default_rng(10)
        col = rng.gamma(2.0, 1.0, 80)
        ds = Dataset(values=np.column_stack([col, col]), columns=("a", "b"),
                     provenance={})
        with pytest.raises(PipelineError,
                           match=r"step 2 \(angular fit\).*degenerate log-ratios"):
            fit_pipeline(ds, FitConfig(K=6, m=8), report=False)


class TestParametricBootstrap:
    def test_requires_enough_replicates(self, small_model):
        model, _ = small_model
        with pytest.raises(ValueError, match="at least 100"):
            parametric_bootstrap(model, nboot=50, seed=0)
        with pytest.raises(ValueError, match="components"):
            parametric_bootstrap(model, nboot=100, components="angular")

    def test_interval_table_and_estimates(self, small_bootstrap, small_model):
        model, _ = small_model
        res = small_bootstrap
        table = res.table()
        assert set(table["parameter"]) == {"kappa", "xi", "rho"}
        assert res.estimates["kappa"] == model.params.kappa
        assert res.estimates["xi"] == model.params.xi
        assert res.estimates["rho"] == model.rho
        for _, row in table.iterrows():
            assert row["lower"] < row["upper"]

    def test_pivotal_construction(self, small_bootstrap):
        # endpoints are 2*estimate - bootstrap quantiles, so the interval
        # straddles the estimate exactly when the bootstrap draws do
        res = small_bootstrap
        draws = {"kappa": res.boot_kappa, "xi": res.boot_xi, "rho": res.boot_rho}
        for name, (lo, hi) in res.intervals.items():
            est = res.estimates[name]
            qlo, qhi = np.quantile(draws[name], [0.025, 0.975])
            assert lo == pytest.approx(2.0 * est - qhi)
            assert hi == pytest.approx(2.0 * est - qlo)
            if qlo < est < qhi:
                assert lo < est < hi

    def test_fixed_seed_reproducible(self, small_model):
        model, _ = small_model
        a = parametric_bootstrap(model, nboot=100, seed=11, components="radial")
        b = parametric_bootstrap(model, nboot=100, seed=11, components="radial")
        assert a.intervals == b.intervals
        np.testing.assert_array_equal(a.boot_kappa, b.boot_kappa)
        np.testing.assert_array_equal(a.boot_xi, b.boot_xi)

    def test_radial_only_skips_angular_outputs(self, small_model):
        model, _ = small_model
        res = parametric_bootstrap(model, nboot=100, seed=12,
                                   components="radial")
        assert "rho" not in res.intervals
        assert res.delta_grid is None
        assert res.qq_probs is not None
        assert res.qq_lo.shape == res.qq_hi.shape == (model.n,)

    def test_full_bootstrap_bands(self, small_bootstrap, small_model):
        model, _ = small_model
        res = small_bootstrap
        assert res.delta_grid is not None
        assert np.all(res.delta_lo <= res.delta_hi)
        assert np.all(res.delta_lo > 0.0)
        assert res.delta_hat == pytest.approx(
            np.exp(model.delta.log_delta(res.delta_grid)))
        assert np.all(np.diff(res.qq_model) >= 0.0)

    def test_qq_band_calibrated_on_well_specified_data(self, small_bootstrap,
                                                       small_model):
        _, ds = small_model
        res = small_bootstrap
        emp = np.sort(ds.values.sum(axis=1))
        inside = np.mean((emp >= res.qq_lo) & (emp <= res.qq_hi))
        assert inside >= 0.90

    def test_failure_fraction_warns(self, small_model, monkeypatch):
        model, _ = small_model
        import megpd.pipeline as pl
        real_fit = pl.fit_radial
        calls = {"k": 0}

        def flaky(*args, **kwargs):
            calls["k"] += 1
            if calls["k"] % 5 == 0:
                raise RuntimeError("synthetic refit failure")
            return real_fit(*args, **kwargs)

        monkeypatch.setattr(pl, "fit_radial", flaky)
        with pytest.warns(UserWarning, match="bootstrap refits failed"):
            res = parametric_bootstrap(model, nboot=100, seed=13,
                                       components="radial")
        assert res.n_failed == 20
        assert res.notes
        assert res.boot_kappa.size == 80


class TestDiagnostics:
    def test_file_set(self, diag_outputs):
        _, _, paths = diag_outputs
        expected = {"radial_qq", "radial_qq_lower", "delta_grid",
                    "cond_quantiles", "log_ratios", "chi_empirical",
                    "pairwise_density_0_1", "pairwise_density_0_2",
                    "pairwise_density_1_2"}
        assert set(paths) == expected

    def test_qq_tables_monotone_with_n_rows(self, diag_outputs):
        _, ds, paths = diag_outputs
        for name in ("radial_qq", "radial_qq_lower"):
            frame = pd.read_csv(paths[name])
            assert len(frame) == ds.n
            assert frame["empirical"].is_monotonic_increasing
            assert frame["model"].is_monotonic_increasing

    def test_delta_grid_covers_radius_range(self, diag_outputs):
        _, ds, paths = diag_outputs
        frame = pd.read_csv(paths["delta_grid"])
        r = ds.values.sum(axis=1)
        assert frame["r"].iloc[0] == pytest.approx(r.min())
        assert frame["r"].iloc[-1] == pytest.approx(r.max())
        assert len(frame) == 101
        assert frame["q97_marker"].sum() == 1
        marked = frame.loc[frame["q97_marker"] == 1, "r"].iloc[0]
        assert marked == pytest.approx(np.quantile(r, 0.97),
                                       abs=(r.max() - r.min()) / 100)
        assert np.all(frame["band_lower"] <= frame["band_upper"])

    def test_conditional_quantile_fan(self, diag_outputs):
        _, _, paths = diag_outputs
        frame = pd.read_csv(paths["cond_quantiles"])
        np.testing.assert_allclose(frame["q50"], 0.0, atol=1e-12)
        np.testing.assert_allclose(frame["q05"], -frame["q95"], rtol=1e-12)
        assert np.all(frame["q95"] > 0.0)

    def test_log_ratio_table(self, diag_outputs):
        _, ds, paths = diag_outputs
        frame = pd.read_csv(paths["log_ratios"])
        assert len(frame) == ds.n
        assert list(frame.columns) == ["r", "log_a_over_c", "log_b_over_c"]
        np.testing.assert_allclose(frame["log_a_over_c"],
                                   np.log(ds.values[:, 0] / ds.values[:, 2]))

    def test_chi_table_layout(self, diag_outputs):
        _, _, paths = diag_outputs
        frame = pd.read_csv(paths["chi_empirical"])
        assert set(frame["side"]) == {"upper", "lower"}
        # 3 pairs x 2 sides x 20 default levels
        assert len(frame) == 3 * 2 * 20
        assert frame["chi"].between(0.0, 1.0 + 1e-9).all()

    def test_pairwise_density_positive_grid(self, diag_outputs):
        _, _, paths = diag_outputs
        frame = pd.read_csv(paths["pairwise_density_0_1"])
        assert {"a", "b", "density"} <= set(frame.columns)
        assert np.all(frame["a"] > 0.0)
        assert np.all(frame["density"] >= 0.0)

    def test_exact_density_grid_for_two_columns(self, tmp_path):
        ds = synthetic_dataset(200, seed=21, d=2)
        model = fit_pipeline(ds, FitConfig(K=6, m=8), report=False)
        paths = diagnostics(model, ds, output_dir=tmp_path, grid_size=31,
                            pairwise_grid=12)
        frame = pd.read_csv(paths["pairwise_density_0_1"])
        assert len(frame) == 12 * 12
        assert np.all(frame["density"] > 0.0)

    def test_deterministic_outputs(self, small_model, tmp_path):
        model, ds = small_model
        a = diagnostics(model, ds, output_dir=tmp_path / "a", seed=3)
        b = diagnostics(model, ds, output_dir=tmp_path / "b", seed=3)
        for name in a:
            with open(a[name], "rb") as fa, open(b[name], "rb") as fb:
                assert fa.read() == fb.read()
