"""Command-line entry point: ``spoofgeo <subcommand> [--config FILE] [--output-dir DIR]``.

Each run writes ``summary.json``, CSV tables, PNG figures and
``resolved_config.json`` (all defaults filled) into the output directory.
Failures exit nonzero and print a one-line JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .adversary import attack_trajectory, build_error_map, error_vs_budget, realized_detection_rate, solve_zeta
from .clocks import ClockModel, DriftNoiseParams, preset, sigma_v
from .detector import DetectorConfig, detect, normalized_increments
from .export import DopplerBundle, export_plot_data
from .geodesy import Geodetic
from .geolocator import estimate, estimate_per_prn
from .montecarlo import TrialConfig, equal_area_sigma_a, run_study, sweep_clock_quality, sweep_sigma_a_inflation, theoretical_area
from .observables import measurement_covariance, synthesize_gamma, synthesize_prn_doppler
from .plotting import error_scatter_figure, geolocation_figure, table_figure, trajectory_figure
from .pvt_correlation import correlation_curve
from .scenario import build_circular_pass, build_spoofed_constellation, read_ephemeris_file

SUBCOMMANDS = ("geolocate", "montecarlo", "correlation", "detect", "adversary", "sweep")

EXIT_RUNTIME = 1
EXIT_CONFIG = 2

log = logging.getLogger("spoofgeo")


class CliError(RuntimeError):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


def _geodetic(d: dict) -> Geodetic:
    return Geodetic.from_degrees(d["lat_deg"], d["lon_deg"], d["alt_m"])


def build_scenario(cfg: dict):
    s = cfg["scenario"]
    emitter = _geodetic(s["emitter"])
    spoofed = _geodetic(s["spoofed_position"])
    if s["ephemeris_file"]:
        return read_ephemeris_file(s["ephemeris_file"], emitter, spoofed)
    return build_circular_pass(
        emitter, s["orbit_alt_m"], math.radians(s["inclination_deg"]),
        math.radians(s["max_elevation_deg"]), s["duration_s"], s["delta_t_s"],
        ascending=s["ascending"], emitter_left_of_track=s["emitter_left_of_track"],
        spoofed_position=spoofed,
    )


def clock_model(cfg: dict) -> ClockModel:
    n = cfg["noise"]
    if n["h_minus_2"] is not None:
        return ClockModel(n["h_minus_2"], "custom")
    return preset(n["clock"])


def trial_config(cfg: dict, scn, n_trials: int | None = None) -> TrialConfig:
    e, m = cfg["estimator"], cfg["montecarlo"]
    return TrialConfig(
        scenario=scn, clock=clock_model(cfg), sigma_a=cfg["noise"]["sigma_a_mps"],
        n_trials=n_trials or m["n_trials"], estimator_R_mode=e["R_mode"],
        estimator_sigma_a_model=e["sigma_a_model_mps"], base_seed=cfg["seed"],
        b0=cfg["noise"]["b0_mps"], alt_constraint=(e["alt0_m"], e["sigma_alt_m"]),
        confidence=e["confidence"], max_divergence=m["max_divergence"], workers=m["workers"],
        init_mode=m["init_mode"],
    )


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# --- subcommands -------------------------------------------------------------------


def cmd_geolocate(cfg: dict, out: Path) -> dict:
    scn = build_scenario(cfg)
    clock = clock_model(cfg)
    e = cfg["estimator"]
    sa = cfg["noise"]["sigma_a_mps"]
    sv = sigma_v(clock, scn.delta_t)
    noise = DriftNoiseParams(sa, sv, scn.delta_t)
    gamma = synthesize_gamma(scn, cfg["noise"]["b0_mps"], noise, rng_seed=cfg["seed"])
    sa_model = e["sigma_a_model_mps"] or (sa if sa > 0 else 1.0)
    R = measurement_covariance(sa_model, sv if e["R_mode"] == "full" else 0.0, scn.n_epochs)
    alt = (e["alt0_m"], e["sigma_alt_m"])
    est = estimate(gamma, scn, R, alt, e["init"], confidence=e["confidence"])
    gamma.write_csv(out / "gamma.csv")
    res = est.residuals[: scn.n_epochs]
    (out / "residuals.csv").write_text(
        "t_s,residual_mps\n" + "".join(f"{t!r},{r!r}\n" for t, r in zip(map(float, scn.times), map(float, res))))
    geolocation_figure(est, scn, gamma, out / "geolocate.png")
    summary = {
        "estimate": est.to_dict(),
        "horizontal_error_m": est.horizontal_error(scn.emitter_truth),
        "b0_error_mps": est.state.b0 - cfg["noise"]["b0_mps"],
        "chi2": est.chi2,
        "dof": est.dof,
        "residual_std_mps": float(np.std(res)),
        "contains_truth": est.contains(scn.emitter_truth),
        "message": est.message,
    }
    if cfg["constellation"]["per_prn"]:
        c = cfg["constellation"]
        con = build_spoofed_constellation(c["seed"], c["n_sats"], scn.spoofed_position)
        series = synthesize_prn_doppler(scn, con, c["spoofed_rx_drift"], noise, rng_seed=cfg["seed"])
        fixes = estimate_per_prn(series, scn, R, alt, e["init"])
        lines = ["prn,horizontal_error_m,b0_mps,converged"]
        per = {}
        for prn, f in fixes.items():
            eh = f.horizontal_error(scn.emitter_truth)
            per[str(prn)] = {"horizontal_error_m": eh, "b0_mps": f.state.b0}
            lines.append(f"{prn},{eh!r},{f.state.b0!r},{f.converged}")
        (out / "per_prn.csv").write_text("\n".join(lines) + "\n")
        bundle = DopplerBundle(gamma, series, scn.carrier_wavelength)
        export_plot_data(bundle, "doppler_series", out / "doppler_series.csv")
        table_figure(bundle, "doppler_series", out / "doppler_series.png")
        summary["per_prn"] = per
    return summary


def cmd_montecarlo(cfg: dict, out: Path) -> dict:
    scn = build_scenario(cfg)
    res = run_study(trial_config(cfg, scn))
    res.write_csv(out / "trials.csv")
    error_scatter_figure(res.records, out / "errors.png")
    return res.summary()


def cmd_correlation(cfg: dict, out: Path) -> dict:
    c = cfg["correlation"]
    curves = [correlation_curve(h, c["delta_t_values_s"], pseudorange_sigma=c["pseudorange_sigma_m"],
                                doppler_sigma=c["doppler_sigma_mps"]) for h in c["h_minus_2_values"]]
    export_plot_data(curves, "correlation_curve", out / "correlation_curve.csv")
    table_figure(curves, "correlation_curve", out / "correlation_curve.png")
    return {"curves": [{"h_minus_2": cv.h_minus_2, "delta_t_s": cv.delta_t.tolist(),
                        "pearson": cv.pearson.tolist()} for cv in curves]}


def read_drift_csv(path) -> np.ndarray:
    """Last column of a CSV with a header row, e.g. ``t_s,drift_mps``."""
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read drift CSV: {exc}", "detector.drift_csv") from None
    if data.shape[0] < 2:
        raise CliError("drift CSV needs at least two rows", "detector.drift_csv")
    return data[:, -1]


def _detector(cfg: dict, K: int) -> DetectorConfig:
    d = cfg["detector"]
    return DetectorConfig(d["sigma_m_mps"], d["h_minus_2_rx"], d["delta_t_s"], d["p_false_alarm"], K)


def cmd_detect(cfg: dict, out: Path) -> dict:
    path = cfg["detector"]["drift_csv"]
    if not path:
        raise CliError("detect needs detector.drift_csv", "detector.drift_csv")
    drift = read_drift_csv(path)
    det = _detector(cfg, len(drift) - 1)
    theta = normalized_increments(drift, det.sigma_u)
    res = detect(theta, det)
    (out / "increments.csv").write_text(
        "k,theta\n" + "".join(f"{k + 1},{float(t)!r}\n" for k, t in enumerate(theta)))
    return {"statistic": res.statistic, "threshold": res.threshold, "decision": res.decision,
            "K": det.K, "sigma_u_mps": det.sigma_u, "p_false_alarm": det.p_false_alarm}


def cmd_adversary(cfg: dict, out: Path) -> dict:
    scn = build_scenario(cfg)
    tc = trial_config(cfg, scn, n_trials=100)
    R = tc.true_R()
    emap = build_error_map(scn, R)
    det = _detector(cfg, scn.n_epochs - 1)
    a = cfg["adversary"]
    budgets = [p for p in a["p_detect_budgets"] if p > det.p_false_alarm]
    if not budgets:
        raise CliError("every P_D budget is at or below p_false_alarm", "adversary.p_detect_budgets")
    rows = error_vs_budget(emap, det, budgets)
    designs = []
    for i, row in enumerate(rows):
        d = attack_trajectory(emap, row["zeta_mps"], a["sign"], det)
        d.write_csv(out / f"trajectory_pd{row['p_detect']:.3f}.csv", scn.times)
        row["realized_p_detect"] = realized_detection_rate(d, det, a["n_victims"], cfg["seed"] + i)
        row["degenerate"] = d.degenerate
        designs.append(d)
    export_plot_data(rows, "worst_case_vs_pd", out / "worst_case_vs_pd.csv")
    table_figure(rows, "worst_case_vs_pd", out / "worst_case_vs_pd.png")
    trajectory_figure(designs, scn.times, out / "trajectories.png")
    return {"sigma_u_mps": det.sigma_u, "threshold": det.threshold, "grid": rows}


def cmd_sweep(cfg: dict, out: Path) -> dict:
    scn = build_scenario(cfg)
    sw = cfg["sweep"]
    tc = trial_config(cfg, scn, n_trials=sw["n_trials"])
    rows = sweep_clock_quality(sw["clocks"], tc)
    export_plot_data(rows, "rmse_vs_h2", out / "rmse_vs_h2.csv")
    table_figure(rows, "rmse_vs_h2", out / "rmse_vs_h2.png")
    infl = sweep_sigma_a_inflation(sw["sigma_a_values_mps"], tc)
    export_plot_data(infl, "containment_vs_sigma_a", out / "containment_vs_sigma_a.csv")
    table_figure(infl, "containment_vs_sigma_a", out / "containment_vs_sigma_a.png")
    full_area = theoretical_area(replace(tc, estimator_R_mode="full", estimator_sigma_a_model=None))
    summary = {"clock_sweep": [r.as_dict() for r in rows],
               "inflation": [vars(r) for r in infl],
               "full_R_area_m2": full_area}
    try:
        summary["equal_area_sigma_a_mps"] = equal_area_sigma_a(tc, full_area)
    except ValueError as exc:
        summary["equal_area_sigma_a_mps"] = None
        log.warning("equal-area sigma_a not found: %s", exc)
    return summary


_COMMANDS = {
    "geolocate": cmd_geolocate,
    "montecarlo": cmd_montecarlo,
    "correlation": cmd_correlation,
    "detect": cmd_detect,
    "adversary": cmd_adversary,
    "sweep": cmd_sweep,
}


def run(config_path, subcommand: str, *, output_dir=None, overrides: dict | None = None) -> int:
    """Execute one subcommand; returns the process exit code."""
    try:
        if subcommand not in _COMMANDS:
            raise cfgmod.ConfigError("subcommand", f"must be one of {list(SUBCOMMANDS)}")
        raw = cfgmod.load(config_path) if config_path else {}
        for path, value in (overrides or {}).items():
            node = raw
            *parents, leaf = path.split(".")
            for p in parents:
                node = node.setdefault(p, {})
            node[leaf] = value
        cfg = cfgmod.resolve(raw, require_emitter=config_path is not None)
        if output_dir is not None:
            cfg["output_dir"] = str(output_dir)
        out = Path(cfg["output_dir"])
        out.mkdir(parents=True, exist_ok=True)
        cfgmod.dump(cfg, out / "resolved_config.json")
        summary = _COMMANDS[subcommand](cfg, out)
        summary = {"subcommand": subcommand, "seed": cfg["seed"], **summary}
        _write_json(out / "summary.json", summary)
        print(json.dumps({"status": "ok", "subcommand": subcommand, "output_dir": str(out)}))
        return 0
    except cfgmod.ConfigError as exc:
        _report_error("config", str(exc), exc.field)
        return EXIT_CONFIG
    except CliError as exc:
        _report_error("input", str(exc), exc.field)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        _report_error("input", str(exc), None)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001  report everything machine-readably
        log.debug("failure", exc_info=True)
        _report_error(type(exc).__name__, str(exc), None)
        return EXIT_RUNTIME


def _report_error(kind: str, message: str, field: str | None) -> None:
    print(json.dumps({"status": "error", "error": {"type": kind, "field": field, "message": message}}),
          file=sys.stderr)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="spoofgeo", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", "-c", help="YAML or JSON run configuration")
    parser.add_argument("--output-dir", "-o", help="overrides output_dir from the config")
    parser.add_argument("--seed", type=int, help="overrides the top-level seed")
    parser.add_argument("--trials", type=int, help="overrides montecarlo.n_trials and sweep.n_trials")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["montecarlo.n_trials"] = args.trials
        overrides["sweep.n_trials"] = args.trials
    return run(args.config, args.subcommand, output_dir=args.output_dir, overrides=overrides)


if __name__ == "__main__":
    sys.exit(main())
