import json
import os
import pathlib

import jsonschema
import numpy as np
import pytest

import pacverify

ROOT = pathlib.Path(os.environ.get("PACVERIFY_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))
TOY = str(ROOT / "models" / "toy.json")

REPORT_SCHEMA = {
    "type": "object",
    "required": ["verdict", "label", "mode", "margin", "eta", "epsilon", "components", "queries", "provenance"],
    "properties": {
        "verdict": {"enum": ["pac_model_robust", "not_verified"]},
        "margin": {"type": "number", "minimum": 0},
        "components": {
            "type": "array",
            "items": {"type": "object", "required": ["label", "max_point", "max_value", "candidate"]},
        },
    },
}


def test_formulas():
    assert pacverify.required_samples_full(0.01, 0.001, 2, 2) == 2182
    assert pacverify.required_samples_margin(0.01, 0.001) == 1582
    assert pacverify.max_key_features(8000, 0.01, 0.001) == 32
    assert pacverify.baseline_sample_count(0.01, 0.001) == 688
    with pytest.raises(pacverify.ParameterError):
        pacverify.required_samples_full(0.0, 0.001, 2, 2)


def test_model_forward_and_classify():
    model = pacverify.Model.load(TOY)
    assert (model.input_dim, model.output_dim) == (2, 2)
    out = model.forward(np.array([[0.0, 0.0], [1.0, -1.0]]))
    assert out.shape == (2, 2)
    assert out[1, 0] == out[1, 1]
    assert model.classify([0.0, 0.0]) == 0
    with pytest.raises(pacverify.ModelFormatError):
        pacverify.Model.parse("{}")


def test_maximize_and_lp():
    point, value = pacverify.maximize_affine_on_ball(np.array([-22.4051, 2.8, -9.095]), np.zeros(2), 1.0)
    assert list(point) == [1.0, -1.0]
    assert value == pytest.approx(-10.5101)
    coeffs, margin = pacverify.solve_chebyshev_lp(np.array([[0.0]]), np.array([5.0]))
    assert list(coeffs) == pytest.approx([5.0, 0.0])
    assert margin == pytest.approx(0.0, abs=1e-9)


def test_verify_report():
    report = pacverify.verify(TOY, [0.0, 0.0], 1.0, k1=300, k2=2182, kappa=3, seed=2)
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["verdict"] == "pac_model_robust"
    assert report["components"][0]["max_point"] == [1.0, -1.0]
    with pytest.raises(TypeError):
        pacverify.verify(TOY, [0.0, 0.0], 1.0, bogus=1)


def test_cli_roundtrip():
    code, out, err = pacverify.run_cli(["calc", "--m", "2", "--n", "2"])
    assert code == 0
    assert json.loads(out)["K_full"] == 2182
    assert "K=2182" in err
    code, _, _ = pacverify.run_cli(["verify", "--nope"])
    assert code == 2
