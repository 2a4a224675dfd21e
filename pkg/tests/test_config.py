import json
from pathlib import Path

import pytest

from simsat.harness.config import OUTPUT_ENV, ConfigError, load_config, output_dir, validate_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def base():
    return json.loads((CONFIGS / "bilinear_d2.json").read_text())


@pytest.mark.parametrize("name", ["bilinear_d2", "curved_endpoint_d2", "flat_control_d2", "trilinear_d3"])
def test_shipped_configs_validate(name):
    cfg = load_config(CONFIGS / f"{name}.json")
    assert cfg["family"]["random_draws"] >= 1
    assert "slack" in cfg


@pytest.mark.parametrize("mutate", [
    lambda c: c.pop("lambdas"),
    lambda c: c.update(lambdas=[16, 32]),
    lambda c: c.update(lambdas=[64, 32, 16]),
    lambda c: c.update(d=4),
    lambda c: c.update(k=3),
    lambda c: c.update(unknown=1),
    lambda c: c["norm"].update(outer=[0]),
    lambda c: c["surfaces"][0].update(type="sphere"),
    lambda c: c["surfaces"][0].update(axis=5),
    lambda c: c.update(grid={"n": [10]}),
])
def test_invalid_configs(mutate):
    cfg = base()
    mutate(cfg)
    with pytest.raises(ConfigError):
        validate_config(cfg)


def test_d3_desk_scale_caps():
    cfg = json.loads((CONFIGS / "trilinear_d3.json").read_text())
    cfg["lambdas"] = [16, 32, 64]
    with pytest.raises(ConfigError):
        validate_config(cfg)
    cfg["lambdas"] = [8, 16, 32]
    cfg["grid"] = {"n": [32, 64, 128]}
    with pytest.raises(ConfigError):
        validate_config(cfg)


def test_defaults_and_output_override(monkeypatch, tmp_path):
    cfg = validate_config(base())
    assert cfg["quadrature"]["oversampling"] == 8.0
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    assert output_dir(cfg) == Path("runs")
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    assert output_dir(cfg) == tmp_path


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
