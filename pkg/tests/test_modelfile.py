"""Versioned model persistence: lossless round trips and reuse."""

import json

import numpy as np
import pytest

from megpd import (
    BernsteinDensity,
    EgpdParams,
    ModelFile,
    UniformDensity,
    build_basis,
    megpd_simulate,
)
from megpd.splines import DeltaFunction


def make_model(rho=0.55, d=3):
    rng = np.random.default_rng(0)
    density = BernsteinDensity(m=6, weights=rng.dirichlet(np.ones(6)))
    params = EgpdParams(kappa=1.7321, xi=0.2345, b=density)
    basis = build_basis(np.linspace(0.1, 9.3, 40), 6)
    delta = DeltaFunction(basis=basis,
                          gamma=rng.normal(scale=0.3, size=basis.K + 1),
                          lam=12.5)
    return ModelFile(params=params, delta=delta, rho=rho, d=d, n=321,
                     columns=("a", "b", "c")[:d],
                     preprocess={"columns": ["a", "b", "c"][:d],
                                 "median": [1.2] * d, "min": [0.0] * d,
                                 "eps": [0.05] * d},
                     seeds={"fit": 7})


class TestRoundTrip:
    def test_lossless_numeric_fields(self, tmp_path):
        model = make_model()
        path = tmp_path / "model.json"
        model.save(path)
        loaded = ModelFile.load(path)
        assert loaded.to_dict() == model.to_dict()
        assert loaded.params.kappa == model.params.kappa
        assert loaded.params.xi == model.params.xi
        np.testing.assert_array_equal(loaded.params.b.weights,
                                      model.params.b.weights)
        np.testing.assert_array_equal(loaded.delta.basis.knots,
                                      model.delta.basis.knots)
        np.testing.assert_array_equal(loaded.delta.gamma, model.delta.gamma)
        assert loaded.delta.lam == model.delta.lam
        assert loaded.rho == model.rho
        assert loaded.columns == model.columns
        assert loaded.preprocess == model.preprocess

    def test_second_save_is_byte_identical(self, tmp_path):
        model = make_model()
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        model.save(p1)
        ModelFile.load(p1).save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_simulate_from_loaded_model_matches(self, tmp_path):
        model = make_model()
        path = tmp_path / "model.json"
        model.save(path)
        loaded = ModelFile.load(path)
        a = megpd_simulate(200, model.megpd_model(), seed=3)
        b = megpd_simulate(200, loaded.megpd_model(), seed=3)
        np.testing.assert_array_equal(a, b)

    def test_two_component_model(self, tmp_path):
        model = make_model(rho=None, d=2)
        path = tmp_path / "model2.json"
        model.save(path)
        loaded = ModelFile.load(path)
        assert loaded.rho is None
        assert loaded.d == 2
        sample = megpd_simulate(50, loaded.megpd_model(), seed=1)
        assert sample.shape == (50, 2)


class TestValidation:
    def test_unsupported_version(self, tmp_path):
        model = make_model()
        path = tmp_path / "model.json"
        model.save(path)
        payload = json.loads(path.read_text())
        payload["format_version"] = 99
        path.write_text(json.dumps(payload))
        with pytest.raises(ValueError, match="unsupported model file version"):
            ModelFile.load(path)

    def test_missing_version(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"d": 2}))
        with pytest.raises(ValueError, match="unsupported model file version"):
            ModelFile.load(path)

    def test_only_bernstein_carriers_persist(self):
        model = make_model()
        bad = ModelFile(params=EgpdParams(2.0, 0.1, UniformDensity()),
                        delta=model.delta, rho=0.5, d=3, n=10,
                        columns=("a", "b", "c"))
        with pytest.raises(TypeError, match="Bernstein"):
            bad.to_dict()

    def test_megpd_model_dimensions(self):
        model = make_model()
        mdl = model.megpd_model()
        assert mdl.d == 3
        assert mdl.corr.d_minus_1 == 2
        assert mdl.corr.rho == model.rho
