import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsewishart import io
from sparsewishart.covglasso import PenaltySpec, build_penalty_allones
from sparsewishart.em import Dataset, fit_em
from sparsewishart.errors import DimMismatch, ValidationError

from conftest import random_spd


@pytest.mark.parametrize("layout", ["per-matrix", "stacked"])
def test_dataset_round_trip_exact(tmp_path, layout):
    rng = np.random.default_rng(0)
    mats = [random_spd(rng, 4) / 7 for _ in range(5)]
    data = Dataset.from_matrices(mats)
    io.save_dataset(data, tmp_path / "d", layout)
    back = io.load_dataset(tmp_path / "d")
    np.testing.assert_array_equal(back.matrices, data.matrices)
    assert back.ids == data.ids
    io.save_dataset(back, tmp_path / "e", layout)
    again = io.load_dataset(tmp_path / "e")
    np.testing.assert_array_equal(again.matrices, data.matrices)


@settings(max_examples=100, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_seventeen_digits_lossless(x):
    assert float(io.fmt(x)) == x


def test_manifest_fields(tmp_path):
    data = Dataset.from_matrices([np.eye(2), np.ones((2, 2))])
    io.save_dataset(data, tmp_path)
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["n"] == 2 and m["p"] == 2 and m["jittered"] == [False, True]
    assert m["format_version"] == io.FORMAT_VERSION
    assert (tmp_path / f"{m['ids'][0]}.csv").exists()


def test_bad_matrix_shape(tmp_path):
    data = Dataset.from_matrices([np.eye(2)])
    io.save_dataset(data, tmp_path)
    (tmp_path / f"{data.ids[0]}.csv").write_text("1,0,0\n0,1,0\n0,0,1\n")
    with pytest.raises(DimMismatch):
        io.load_dataset(tmp_path)


def test_asymmetric_file_rejected(tmp_path):
    data = Dataset.from_matrices([np.eye(2)])
    io.save_dataset(data, tmp_path)
    (tmp_path / f"{data.ids[0]}.csv").write_text("1,0.5\n0.2,1\n")
    with pytest.raises(ValidationError):
        io.load_dataset(tmp_path)


def test_missing_manifest(tmp_path):
    with pytest.raises(ValidationError):
        io.load_dataset(tmp_path)


def test_fit_round_trip(tmp_path, seed12):
    data, _, _ = seed12
    fit = fit_em(data, 2, PenaltySpec(1.0, build_penalty_allones(3), "allones"))
    io.write_fit(tmp_path / "fit.json", fit, data)
    back = io.read_fit(tmp_path / "fit.json")
    np.testing.assert_array_equal(back.params.sigmas, fit.params.sigmas)
    np.testing.assert_array_equal(back.labels, fit.labels)
    assert back.bic == fit.bic and back.d0 == fit.d0
    obj = json.loads((tmp_path / "fit.json").read_text())
    assert min(obj["labels"]) == 1


class TestConfig:
    def test_defaults(self):
        cfg = io.load_config()
        assert cfg["lambda_grid"] == ("auto", 100)
        assert cfg["epsilon"] == 1e-6

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"k_grid": [2], "lamda_grid": [0]}))
        with pytest.raises(ValidationError, match="lamda_grid"):
            io.load_config(path)

    def test_overrides_and_parsing(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"k_grid": [3, 2], "lambda_grid": "auto:10"}))
        cfg = io.load_config(path, {"lambda_grid": "0,1.5", "seed": 4})
        assert cfg["k_grid"] == [2, 3]
        assert cfg["lambda_grid"] == [0.0, 1.5]
        assert cfg["seed"] == 4

    @pytest.mark.parametrize("bad", [{"epsilon": 0}, {"k_grid": [0]}, {"lambda_grid": [-1]}, {"workers": 0}])
    def test_invalid_values(self, tmp_path, bad):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(bad))
        with pytest.raises(ValidationError):
            io.load_config(path)


class TestPenaltyChoice:
    def test_allones(self):
        w, pid = io.resolve_penalty("allones", 3)
        np.testing.assert_array_equal(w, build_penalty_allones(3))
        assert pid == "allones"

    def test_prior(self, tmp_path):
        W = np.array([[0, 4, 1], [4, 0, 2], [1, 2, 0]], dtype=float)
        io.write_matrix_csv(tmp_path / "w.csv", W)
        w, pid = io.resolve_penalty(f"prior:{tmp_path / 'w.csv'}", 3)
        assert w[0, 1] == 0 and w[0, 2] == pytest.approx(0.75)
        assert pid.startswith("prior:")

    def test_explicit_dim(self, tmp_path):
        io.write_matrix_csv(tmp_path / "p.csv", np.ones((2, 2)))
        with pytest.raises(DimMismatch):
            io.resolve_penalty(f"explicit:{tmp_path / 'p.csv'}", 3)

    def test_unknown(self):
        with pytest.raises(ValidationError):
            io.resolve_penalty("lasso", 3)
