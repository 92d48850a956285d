import json

import pytest

from geoxray import config
from geoxray.errors import ConfigError


def test_defaults_resolve_and_seed_flows_to_phantom():
    cfg = config.resolve({}, seed=11, output="x")
    assert cfg["seed"] == 11 and cfg["phantom"]["seed"] == 11 and cfg["output"] == "x"
    assert cfg["grids"]["n_x"] == config.DEFAULTS["grids"]["n_x"]


def test_partial_nested_override_keeps_other_defaults():
    cfg = config.resolve({"grids": {"n_x": 20}})
    assert cfg["grids"]["n_x"] == 20 and cfg["grids"]["n_omega"] == config.DEFAULTS["grids"]["n_omega"]


def test_defaults_are_not_mutated():
    config.resolve({"grids": {"n_x": 20}})
    assert config.DEFAULTS["grids"]["n_x"] == 64


@pytest.mark.parametrize("doc, match", [
    ({"nope": 1}, "unknown configuration key"),
    ({"grids": {"n_xx": 1}}, "grids.n_xx"),
    ({"grids": 3}, "must be an object"),
    ({"grids": {"n_x": "64"}}, "n_x"),
    ({"grids": {"n_x": True}}, "integer"),
    ({"grids": {"n_omega": 30}}, "divisible by 4"),
    ({"grids": {"n_beta": 4}}, "at least 8"),
    ({"grids": {"n_theta": 3}}, "n_theta"),
    ({"transform": "I1"}, "transform"),
    ({"solver": {"method": "cg"}}, "solver.method"),
    ({"seed": -1}, "unsigned"),
    ({"connection_scale": "1+"}, "complex"),
    ({"phantom": {"center": [0.1]}}, "center"),
    ({"validate": {"groups": ["structure", "magic"]}}, "magic"),
])
def test_invalid_documents_are_rejected(doc, match):
    with pytest.raises(ConfigError, match=match):
        config.resolve(doc)


def test_integers_accepted_for_floats():
    assert config.resolve({"ode": {"rtol": 1}})["ode"]["rtol"] == 1


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        config.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="valid JSON"):
        config.load(bad)
    bad.write_text("[1]")
    with pytest.raises(ConfigError, match="object"):
        config.load(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"metric": "hyperbolic(1, 0.5)"}))
    assert config.load(good, seed=3)["metric"] == "hyperbolic(1, 0.5)"
