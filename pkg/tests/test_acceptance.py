"""Acceptance suite on the canonical pass: Perth emitter, 500 km orbit, 70 deg peak, 20 s at 1 s.

Each test prints one ``CRITERION n PASS/FAIL`` line; the full list is repeated
in the pytest terminal summary.
"""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate, special

from spoofgeo.adversary import (
    attack_trajectory,
    build_error_map,
    realized_detection_rate,
    realized_error,
    solve_zeta,
    worst_case_perturbation,
)
from spoofgeo.clocks import DriftNoiseParams, preset, sigma_v
from spoofgeo.detector import (
    DetectorConfig,
    chi2_cdf,
    detect_many,
    marcum_q,
    noncentral_chi2_cdf,
    normalized_increments,
    prob_detection,
    prob_detection_lambda,
)
from spoofgeo.geodesy import Geodetic, ecef_to_geodetic, geodetic_to_ecef, range_rates
from spoofgeo.geolocator import (
    DEFAULT_ALT_CONSTRAINT,
    altitude_jacobian_row,
    estimate,
    estimate_per_prn,
    range_rate_jacobian_row,
)
from spoofgeo.montecarlo import TrialConfig, clock_only_axes, run_study
from spoofgeo.observables import measurement_covariance, synthesize_gamma, synthesize_prn_doppler
from spoofgeo.pvt_correlation import (
    correlation_curve,
    default_config,
    sample_pearson,
    sequential_error_correlation,
    simulate_drift_errors,
)
from spoofgeo.scenario import build_spoofed_constellation, canonical_scenario

N_MC = 10_000
TABLE_CLOCKS = ("low-quality TCXO", "TCXO", "low-quality OCXO", "OCXO")
DET = DetectorConfig(sigma_m=0.05, h_minus_2_rx=3e-21, delta_t=1.0, p_false_alarm=1e-3, K=20)


@pytest.fixture(scope="module")
def scn():
    return canonical_scenario()


@pytest.fixture(scope="module")
def R_tcxo(scn):
    return measurement_covariance(0.1, sigma_v(preset("TCXO"), scn.delta_t), scn.n_epochs)


@pytest.fixture(scope="module")
def tcxo_full(scn):
    return run_study(TrialConfig(scenario=scn, clock=preset("TCXO"), sigma_a=0.1, n_trials=N_MC))


def test_c01_noiseless_recovery(scn, R_tcxo, verdict):
    z = synthesize_gamma(scn, 2.5, DriftNoiseParams(0.0, 0.0))
    est = estimate(z, scn, R_tcxo)
    eh = est.horizontal_error(scn.emitter_truth)
    db = abs(est.state.b0 - 2.5)
    ok = est.converged and est.iterations <= 15 and eh < 1.0 and db < 1e-3
    verdict(1, ok, f"{est.iterations} iterations, e_h={eh:.2e} m, |b0 err|={db:.2e} m/s")


def test_c02_jacobians(verdict):
    rng = np.random.default_rng(2)
    worst_rr = worst_alt = 0.0
    for _ in range(100):
        g = Geodetic(rng.uniform(-1.4, 1.4), rng.uniform(-3.0, 3.0), rng.uniform(-100.0, 3e3))
        tx = geodetic_to_ecef(g)
        p = tx + (tx / np.linalg.norm(tx)) * rng.uniform(3e5, 2e6) + rng.normal(0, 5e5, 3)
        v = rng.normal(0, 5e3, 3)
        a = range_rate_jacobian_row(tx, p, v)
        fd = np.array([(range_rates(tx + e, p[None], v[None])[0]
                        - range_rates(tx - e, p[None], v[None])[0]) / 2.0 for e in np.eye(3)])
        worst_rr = max(worst_rr, np.linalg.norm(a - fd) / np.linalg.norm(a))
        row = altitude_jacobian_row(g)[:3]
        fd_alt = np.array([(ecef_to_geodetic(tx + e).alt - ecef_to_geodetic(tx - e).alt) / 2.0
                           for e in np.eye(3)])
        worst_alt = max(worst_alt, np.linalg.norm(row - fd_alt) / np.linalg.norm(fd_alt))
    ok = worst_rr < 1e-6 and worst_alt < 1e-6
    verdict(2, ok, f"worst relative mismatch range-rate {worst_rr:.1e}, altitude {worst_alt:.1e}")


def test_c03_covariance_kernel(scn, R_tcxo, verdict):
    noise = DriftNoiseParams(0.1, sigma_v(preset("TCXO"), scn.delta_t))
    rr = range_rates(scn.emitter_truth, scn.rx_pos, scn.rx_vel)
    X = np.array([synthesize_gamma(scn, 0.0, noise, rng_seed=k).z - rr for k in range(N_MC)])
    rel = np.abs(np.cov(X, rowvar=False) / R_tcxo - 1.0)
    diag = float(np.diag(rel).max())
    off = float(rel[~np.eye(scn.n_epochs, dtype=bool)].max())
    verdict(3, diag < 0.05 and off < 0.10, f"max relative error diagonal {diag:.3f}, off-diagonal {off:.3f}")


def test_c04_crlb_attainment(tcxo_full, verdict):
    ratio = tcxo_full.rmse_h / tcxo_full.crlb_rmse
    verdict(4, 0.95 <= ratio <= 1.10,
            f"RMSE {tcxo_full.rmse_h:.1f} m / CRLB {tcxo_full.crlb_rmse:.1f} m = {ratio:.3f}")


def test_c05_containment(tcxo_full, verdict):
    c = tcxo_full.containment
    verdict(5, abs(c - 0.95) <= 0.007, f"containment {100 * c:.2f}% over {tcxo_full.n_used} trials")


def test_c06_misspecification(scn, verdict):
    base = TrialConfig(scenario=scn, clock=preset("low-quality TCXO"), sigma_a=0.1, n_trials=N_MC)
    full = run_study(base)
    awgn = run_study(replace(base, estimator_R_mode="awgn_only"))
    ratio = awgn.rmse_h / full.rmse_h
    tcxo_ra = run_study(replace(base, clock=preset("TCXO"), estimator_R_mode="awgn_only"))
    ok = ratio >= 1.2 and tcxo_ra.containment < 0.5
    verdict(6, ok, f"low-quality TCXO RMSE ratio R_a/R = {ratio:.3f} (need >= 1.2); "
                   f"TCXO with R_a containment {100 * tcxo_ra.containment:.1f}% (need < 50%)")


def test_c07_sqrt_h_scaling(scn, verdict):
    axes = [clock_only_axes(scn, preset(k)).semi_major for k in TABLE_CLOCKS]
    ratios = [a / b for a, b in zip(axes, axes[1:])]
    ok = all(abs(r - 10.0) <= 0.2 for r in ratios)
    verdict(7, ok, "semi-major " + " -> ".join(f"{a:.1f}" for a in axes)
            + " m, ratios " + ", ".join(f"{r:.3f}" for r in ratios))


def test_c08_detector_calibration(verdict):
    rng = np.random.default_rng(8)
    n, K = 100_000, 20
    notes, ok = [], True
    for pf in (0.1, 0.01):
        cfg = replace(DET, p_false_alarm=pf, K=K)
        drift = np.cumsum(cfg.sigma_u * rng.standard_normal((n, K + 1)), axis=1)
        theta = np.diff(drift, axis=1) / cfg.sigma_u
        rate = float(np.mean(detect_many(theta, cfg)))
        tol = 3.0 * math.sqrt(pf * (1.0 - pf) / n)
        ok &= abs(rate - pf) <= tol
        notes.append(f"P_F {pf}: {rate:.4f} (+/-{tol:.4f})")
        direction = rng.standard_normal(K)
        direction /= np.linalg.norm(direction)
        for lam in (1.0, 10.0, 30.0):
            mu = math.sqrt(lam) * direction
            emp = float(np.mean(detect_many(mu + rng.standard_normal((n, K)), cfg)))
            pd = prob_detection(mu, cfg)
            ok &= abs(emp - pd) <= 0.01
            notes.append(f"lam {lam:g}: {pd:.4f} vs {emp:.4f}")
    verdict(8, bool(ok), "; ".join(notes))


def _marcum_quad(m, a, b):
    """Independent Marcum Q by quadrature of the noncentral chi density in the radius."""
    def f(x):
        return x * (x / a) ** (m - 1) * math.exp(-0.5 * (x - a) ** 2) * special.ive(m - 1, a * x)
    return integrate.quad(f, b, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)[0]


def test_c09_special_functions(verdict):
    central = max(abs(noncentral_chi2_cdf(x, k, 0.0) - chi2_cdf(x, k))
                  for x in np.linspace(0.05, 60, 20) for k in (1, 2, 5, 10, 20))
    rng = np.random.default_rng(9)
    worst_id = worst_quad = 0.0
    for _ in range(100):
        k = float(rng.integers(1, 41))
        a, b = rng.uniform(0.1, 8.0), rng.uniform(0.0, 10.0)
        q = marcum_q(k / 2, a, b)
        worst_id = max(worst_id, abs(q - (1.0 - noncentral_chi2_cdf(b * b, k, a * a))))
        worst_quad = max(worst_quad, abs(q - _marcum_quad(k / 2, a, b)))
    ok = central < 1e-9 and worst_id < 1e-9 and worst_quad < 1e-9
    verdict(9, ok, f"lambda=0 vs central {central:.1e}; Marcum identity {worst_id:.1e}; "
                   f"vs quadrature {worst_quad:.1e}")


def test_c10_adversary_optimality(scn, R_tcxo, verdict):
    emap = build_error_map(scn, R_tcxo)
    zeta = 0.7
    eps, eh, _ = worst_case_perturbation(emap, zeta)
    rng = np.random.default_rng(10)
    r = rng.standard_normal((N_MC, scn.n_epochs))
    r *= zeta / np.linalg.norm(r, axis=1)[:, None]
    best_random = float(np.max(np.einsum("ij,jk,ik->i", r, emap.A, r)))
    opt = float(eps @ emap.A @ eps)
    rel = abs(emap.horizontal_error(eps) - zeta * math.sqrt(emap.d1)) / (zeta * math.sqrt(emap.d1))
    round_trip = 0.0
    for pd in (0.01, 0.05, 0.1, 0.5, 0.9):
        z = solve_zeta(emap, DET, pd)
        round_trip = max(round_trip, abs(attack_trajectory(emap, z, 1, DET).p_detect - pd))
    ok = opt >= best_random and rel < 1e-9 and round_trip < 1e-8
    verdict(10, ok, f"eps*'A eps* = {opt:.4g} >= random max {best_random:.4g}; "
                    f"e_h relative mismatch {rel:.1e}; P_D round trip {round_trip:.1e}")


def test_c11_adversary_end_to_end(scn, R_tcxo, verdict):
    emap = build_error_map(scn, R_tcxo)
    notes, ok = [], True
    for i, pd in enumerate((0.01, 0.1, 0.5)):
        design = attack_trajectory(emap, solve_zeta(emap, DET, pd), 1, DET)
        eh, _ = realized_error(scn, design, R_tcxo, DEFAULT_ALT_CONSTRAINT)
        rate = realized_detection_rate(design, DET, N_MC, seed=100 + i)
        ratio = eh / design.predicted_eh
        ok &= abs(ratio - 1.0) <= 0.05 and abs(rate - pd) <= 0.02
        notes.append(f"P_D {pd}: e_h {eh:.0f} m (x{ratio:.4f}), detected {rate:.4f}")
    verdict(11, bool(ok), "; ".join(notes))


def test_c12_correlation(verdict):
    dts = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0]
    hs = [3e-25, 3e-23, 3e-21, 3e-19]
    curves = np.array([correlation_curve(h, dts).pearson for h in hs])
    mono_dt = bool(np.all(np.diff(curves, axis=1) < 0))
    mono_h = bool(np.all(np.diff(curves, axis=0) < 0))
    cfg = default_config(3e-19, 0.1)
    analytic = sequential_error_correlation(cfg)
    sim = sample_pearson(simulate_drift_errors(cfg, 5000, n_steps=10, seed=12))
    ok = mono_dt and mono_h and abs(analytic) < 0.1 and abs(analytic - sim) <= 0.02
    verdict(12, ok, f"monotone in dt {mono_dt}, in h {mono_h}; pearson(3e-19, 0.1 s) = {analytic:.4f} "
                    f"(need |.| < 0.1); simulation {sim:.4f}")


def test_c13_per_prn(scn, R_tcxo, verdict):
    con = build_spoofed_constellation(3, 8, scn.spoofed_position)
    noise = DriftNoiseParams(0.1, sigma_v(preset("TCXO"), scn.delta_t))
    series = synthesize_prn_doppler(scn, con, 1.6e-5, noise, rng_seed=13)
    fixes = estimate_per_prn(series, scn, R_tcxo)
    errs = {p: f.horizontal_error(scn.emitter_truth) for p, f in fixes.items()}
    biases = {p: f.state.b0 for p, f in fixes.items()}
    ok = (len(fixes) >= 4 and all(abs(b) > 1.0 for b in biases.values())
          and all(e < 5e3 for e in errs.values()) and all(f.converged for f in fixes.values()))
    verdict(13, ok, f"{len(fixes)} PRNs, errors {min(errs.values()):.0f}-{max(errs.values()):.0f} m, "
                    f"|b0| {min(map(abs, biases.values())):.0f}-{max(map(abs, biases.values())):.0f} m/s")


def test_c14_determinism(scn, verdict):
    cfg = TrialConfig(scenario=scn, n_trials=400, base_seed=77)
    a, b = run_study(cfg), run_study(cfg)
    par = run_study(replace(cfg, workers=2))
    same = a.records.tobytes() == b.records.tobytes()
    agree = a.records.tobytes() == par.records.tobytes()
    cfg_p = default_config(3e-21, 0.5)
    sims = [simulate_drift_errors(cfg_p, 200, seed=3) for _ in range(2)]
    same_sim = np.array_equal(*sims)
    ok = same and agree and same_sim
    verdict(14, ok, f"rerun identical {same}, parallel equals serial {agree}, filter simulation {same_sim}")
