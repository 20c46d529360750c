import json

import pytest

from spoofgeo.config import DEFAULTS, ConfigError, dump, load, resolve

EMITTER = {"scenario": {"emitter": {"lat_deg": -31.95, "lon_deg": 115.86}}}


def test_defaults_resolve_without_emitter_requirement():
    cfg = resolve(None, require_emitter=False)
    assert cfg["noise"]["clock"] == "TCXO"
    assert cfg["scenario"]["emitter"]["alt_m"] == 0.0


def test_missing_emitter_names_field():
    with pytest.raises(ConfigError) as e:
        resolve({})
    assert e.value.field == "scenario.emitter"
    with pytest.raises(ConfigError) as e:
        resolve({"scenario": {"emitter": {"lat_deg": 1.0}}})
    assert e.value.field == "scenario.emitter.lon_deg"


@pytest.mark.parametrize("patch,field", [
    ({"noise": {"sigma_a_mps": -1}}, "noise.sigma_a_mps"),
    ({"scenario": {"emitter": {"lat_deg": 120, "lon_deg": 0}}}, "scenario.emitter.lat_deg"),
    ({"noise": {"clock": "rubidium"}}, "noise.clock"),
    ({"montecarlo": {"n_trials": 10.5}}, "montecarlo.n_trials"),
    ({"scenario": {"ascending": "yes"}}, "scenario.ascending"),
    ({"bogus": 1}, "bogus"),
    ({"sweep": {"clocks": []}}, "sweep.clocks"),
    ({"sweep": {"sigma_a_values_mps": [0.1, -2]}}, "sweep.sigma_a_values_mps[1]"),
    ({"adversary": {"sign": 0}}, "adversary.sign"),
    ({"scenario": {"orbit_alt_m": 500}}, "scenario.orbit_alt_m"),
])
def test_bad_values_name_their_field(patch, field):
    raw = json.loads(json.dumps(EMITTER))
    for k, v in patch.items():
        if isinstance(v, dict) and k in raw:
            for kk, vv in v.items():
                raw[k][kk] = vv
        else:
            raw[k] = v
    with pytest.raises(ConfigError) as e:
        resolve(raw)
    assert e.value.field == field


def test_resolved_config_round_trips(tmp_path):
    cfg = resolve(EMITTER)
    dump(cfg, tmp_path / "c.json")
    again = resolve(load(tmp_path / "c.json"))
    assert again == cfg
    assert set(cfg) == set(DEFAULTS)


def test_yaml_and_errors(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("scenario:\n  emitter: {lat_deg: 10, lon_deg: 20}\nseed: 5\n")
    assert resolve(load(p))["seed"] == 5
    p.write_text("- a\n- b\n")
    with pytest.raises(ConfigError):
        load(p)
    p.write_text("a: [1,\n")
    with pytest.raises(ConfigError):
        load(p)


def test_yaml_exponent_without_point_is_a_number(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("scenario:\n  emitter: {lat_deg: 0, lon_deg: 0}\nnoise:\n  h_minus_2: 3e-21\n")
    assert resolve(load(p))["noise"]["h_minus_2"] == 3e-21


def test_shipped_config_resolves():
    from pathlib import Path

    p = Path(__file__).resolve().parents[1] / "configs" / "canonical.yaml"
    cfg = resolve(load(p))
    assert cfg["scenario"]["orbit_alt_m"] == 500e3 and cfg["constellation"]["per_prn"] is True
