"""Run configuration: YAML or JSON with units spelled out in the key names.

Every key has a default except ``scenario.emitter`` when a file is given.
Unknown keys, wrong types and out-of-range values raise :class:`ConfigError`
carrying the dotted path of the offending field.  :func:`resolve` returns the
fully populated tree, which is what gets echoed next to the outputs and can be
fed back in unchanged.
"""

from __future__ import annotations

import copy
import json
import math
import re
from pathlib import Path

import yaml

from .clocks import PRESETS


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


_LATLON = {"lat_deg": None, "lon_deg": None, "alt_m": 0.0}

DEFAULTS: dict = {
    "seed": 0,
    "output_dir": "spoofgeo-out",
    "scenario": {
        "emitter": {"lat_deg": -31.95, "lon_deg": 115.86, "alt_m": 0.0},
        "spoofed_position": {"lat_deg": 30.2862, "lon_deg": -97.7366, "alt_m": 170.0},
        "orbit_alt_m": 500e3,
        "inclination_deg": 97.4,
        "max_elevation_deg": 70.0,
        "duration_s": 20.0,
        "delta_t_s": 1.0,
        "ascending": True,
        "emitter_left_of_track": True,
        "ephemeris_file": None,
    },
    "noise": {
        "clock": "TCXO",
        "h_minus_2": None,
        "sigma_a_mps": 0.1,
        "b0_mps": 0.0,
    },
    "estimator": {
        "alt0_m": 0.0,
        "sigma_alt_m": 100.0,
        "init": "nadir",
        "R_mode": "full",
        "sigma_a_model_mps": None,
        "confidence": 0.95,
    },
    "montecarlo": {
        "n_trials": 1000,
        "max_divergence": 0.01,
        "init_mode": "truth",
        "workers": None,
    },
    "sweep": {
        "clocks": list(PRESETS),
        "n_trials": 1000,
        "sigma_a_values_mps": [0.1, 0.15, 0.2, 0.3, 0.4, 0.6, 0.8],
    },
    "correlation": {
        "h_minus_2_values": [3e-25, 3e-23, 3e-21, 3e-19, 3e-17],
        "delta_t_values_s": [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0],
        "pseudorange_sigma_m": 1.0,
        "doppler_sigma_mps": 0.5,
    },
    "detector": {
        "sigma_m_mps": 0.05,
        "h_minus_2_rx": 3e-21,
        "delta_t_s": 1.0,
        "p_false_alarm": 1e-3,
        "drift_csv": None,
    },
    "adversary": {
        "p_detect_budgets": [0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9],
        "sign": 1,
        "n_victims": 10000,
    },
    "constellation": {
        "seed": 3,
        "n_sats": 8,
        "spoofed_rx_drift": 1.6e-5,
        "per_prn": False,
    },
}

# (kind, lo, hi) per dotted path; kind in {"num", "int", "bool", "str", "path", "list", "clock"}
_RULES: dict = {
    "seed": ("int", 0, 2**63 - 1),
    "output_dir": ("path",),
    "scenario.emitter.lat_deg": ("num", -90.0, 90.0),
    "scenario.emitter.lon_deg": ("num", -180.0, 180.0),
    "scenario.emitter.alt_m": ("num", -500.0, 9000.0),
    "scenario.spoofed_position.lat_deg": ("num", -90.0, 90.0),
    "scenario.spoofed_position.lon_deg": ("num", -180.0, 180.0),
    "scenario.spoofed_position.alt_m": ("num", -500.0, 9000.0),
    "scenario.orbit_alt_m": ("num", 150e3, 3e6),
    "scenario.inclination_deg": ("num", 0.0, 180.0),
    "scenario.max_elevation_deg": ("num", 5.0, 90.0),
    "scenario.duration_s": ("num", 4.0, 3600.0),
    "scenario.delta_t_s": ("num", 1e-3, 60.0),
    "scenario.ascending": ("bool",),
    "scenario.emitter_left_of_track": ("bool",),
    "scenario.ephemeris_file": ("path",),
    "noise.clock": ("clock",),
    "noise.h_minus_2": ("num", 0.0, 1e-14),
    "noise.sigma_a_mps": ("num", 0.0, 100.0),
    "noise.b0_mps": ("num", -1e5, 1e5),
    "estimator.alt0_m": ("num", -500.0, 9000.0),
    "estimator.sigma_alt_m": ("num", 1e-3, 1e5),
    "estimator.init": ("str", ("nadir", "two-sided")),
    "estimator.R_mode": ("str", ("full", "awgn_only")),
    "estimator.sigma_a_model_mps": ("num", 1e-6, 100.0),
    "estimator.confidence": ("num", 0.0, 0.999999),
    "montecarlo.n_trials": ("int", 100, 10**7),
    "montecarlo.max_divergence": ("num", 0.0, 1.0),
    "montecarlo.init_mode": ("str", ("truth", "nadir", "two-sided")),
    "montecarlo.workers": ("int", 1, 1024),
    "sweep.clocks": ("list", "clock"),
    "sweep.n_trials": ("int", 100, 10**7),
    "sweep.sigma_a_values_mps": ("list", "num", 1e-6, 100.0),
    "correlation.h_minus_2_values": ("list", "num", 0.0, 1e-14),
    "correlation.delta_t_values_s": ("list", "num", 1e-4, 600.0),
    "correlation.pseudorange_sigma_m": ("num", 1e-6, 1e3),
    "correlation.doppler_sigma_mps": ("num", 1e-6, 1e3),
    "detector.sigma_m_mps": ("num", 0.0, 1e3),
    "detector.h_minus_2_rx": ("num", 0.0, 1e-14),
    "detector.delta_t_s": ("num", 1e-3, 600.0),
    "detector.p_false_alarm": ("num", 1e-15, 0.999999),
    "detector.drift_csv": ("path",),
    "adversary.p_detect_budgets": ("list", "num", 0.0, 0.999999),
    "adversary.sign": ("int", -1, 1),
    "adversary.n_victims": ("int", 1, 10**8),
    "constellation.seed": ("int", 0, 2**63 - 1),
    "constellation.n_sats": ("int", 4, 64),
    "constellation.spoofed_rx_drift": ("num", -1e-3, 1e-3),
    "constellation.per_prn": ("bool",),
}


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``3e-21`` (no decimal point) as a float, as YAML 1.2 does."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def load(path) -> dict:
    """Parse a ``.json`` file with the JSON parser, anything else as YAML."""
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text) if path.suffix.lower() == ".json" else yaml.load(text, Loader=_Loader)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError("<file>", f"not valid YAML/JSON: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<root>", "top level must be a mapping")
    return data


def _merge(defaults: dict, given: dict, prefix: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(path, "unknown field")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(path, "expected a mapping")
            out[key] = _merge(defaults[key], value, path + ".")
        else:
            out[key] = value
    return out


def _check_scalar(path: str, value, rule):
    kind = rule[0]
    if value is None:
        return None
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(path, "expected true or false")
        return value
    if kind in ("path", "str"):
        if not isinstance(value, str):
            raise ConfigError(path, "expected a string")
        if kind == "str" and value not in rule[1]:
            raise ConfigError(path, f"must be one of {list(rule[1])}")
        return value
    if kind == "clock":
        if not isinstance(value, str) or value not in PRESETS:
            raise ConfigError(path, f"unknown clock preset {value!r}; choose from {list(PRESETS)}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, "expected a number")
    if kind == "int":
        if float(value) != int(value):
            raise ConfigError(path, "expected an integer")
        value = int(value)
    else:
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(path, "must be finite")
    lo, hi = rule[1], rule[2]
    if not lo <= value <= hi:
        raise ConfigError(path, f"{value} outside [{lo:g}, {hi:g}] (check units)")
    return value


def _walk(tree: dict, prefix: str = ""):
    for key, value in tree.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _walk(value, path + ".")
        else:
            yield path, tree, key, value


def resolve(raw: dict | None = None, *, require_emitter: bool = True) -> dict:
    """Defaults filled in and every field validated."""
    raw = {} if raw is None else raw
    if require_emitter:
        scn = raw.get("scenario")
        if not isinstance(scn, dict) or "emitter" not in scn:
            raise ConfigError("scenario.emitter", "required field is missing")
    emitter = (raw.get("scenario") or {}).get("emitter")
    if isinstance(emitter, dict):
        for k in ("lat_deg", "lon_deg"):
            if k not in emitter:
                raise ConfigError(f"scenario.emitter.{k}", "required field is missing")
    cfg = _merge(DEFAULTS, raw, "")
    for path, parent, key, value in _walk(cfg):
        rule = _RULES[path]
        if rule[0] == "list":
            if not isinstance(value, (list, tuple)) or not value:
                raise ConfigError(path, "expected a non-empty list")
            parent[key] = [_check_scalar(f"{path}[{i}]", v, rule[1:]) for i, v in enumerate(value)]
        else:
            parent[key] = _check_scalar(path, value, rule)
    if cfg["adversary"]["sign"] not in (-1, 1):
        raise ConfigError("adversary.sign", "must be +1 or -1")
    if cfg["seed"] is None:
        raise ConfigError("seed", "required")
    return cfg


def dump(cfg: dict, path) -> None:
    Path(path).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
