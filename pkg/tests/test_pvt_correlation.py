import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spoofgeo.constants import C
from spoofgeo.pvt_correlation import (
    DRIFT,
    correlation_curve,
    default_config,
    lag_one_covariance,
    measurement_matrices,
    process_noise,
    sample_pearson,
    sequential_error_correlation,
    simulate_drift_errors,
    steady_state_filter,
    transition,
)


def scalar_drift_correlation(h, dt, doppler_sigma, n_sats):
    """Scalar Kalman filter on a random-walk drift seen through n averaged Doppler rows."""
    q = 2 * math.pi**2 * h * dt * C**2
    r = doppler_sigma**2 / n_sats
    # steady-state prior variance solves Pm = (Pm r / (Pm + r)) + q
    pm = 0.5 * (q + math.sqrt(q * q + 4 * q * r))
    return 1.0 - pm / (pm + r)


def test_transition_and_noise_shapes():
    F = transition(0.5)
    assert F[3, 4] == 0.5 and np.allclose(np.diag(F), 1.0)
    cfg = default_config(3e-21, 0.1)
    Q = process_noise(cfg)
    assert np.allclose(Q, Q.T) and np.linalg.eigvalsh(Q).min() >= -1e-20
    H, R = measurement_matrices(cfg)
    assert H.shape == (14, 5) and np.allclose(H[7:, DRIFT], 1.0)


def test_steady_state_is_a_fixed_point():
    ss = steady_state_filter(default_config(3e-19, 0.1))
    Pm = ss.F @ ss.P @ ss.F.T + ss.Q
    S = ss.H @ Pm @ ss.H.T + ss.R
    W = np.linalg.solve(S, ss.H @ Pm).T
    P = (np.eye(5) - W @ ss.H) @ Pm
    assert np.allclose(P, ss.P, rtol=1e-6, atol=1e-12)
    assert np.allclose(lag_one_covariance(ss), (np.eye(5) - ss.W @ ss.H) @ ss.F @ ss.P)


@pytest.mark.parametrize("h,dt", [(3e-19, 0.1), (3e-21, 1.0), (3e-23, 0.05)])
def test_matches_scalar_oracle_when_pseudoranges_are_uninformative(h, dt):
    cfg = default_config(h, dt, pseudorange_sigma=1e4)
    n = int(cfg.constellation.visible(cfg.site).sum())
    rho = sequential_error_correlation(cfg)
    assert rho == pytest.approx(scalar_drift_correlation(h, dt, cfg.doppler_sigma, n), abs=1e-4)


def test_analytic_matches_simulation():
    cfg = default_config(3e-19, 0.1)
    sim = sample_pearson(simulate_drift_errors(cfg, 4000, n_steps=10, seed=1))
    assert sim == pytest.approx(sequential_error_correlation(cfg), abs=0.02)


@settings(max_examples=10)
@given(st.floats(-24.0, -17.0))
def test_correlation_decreases_with_spacing(log_h):
    c = correlation_curve(10**log_h, [0.01, 0.1, 1.0])
    assert np.all(np.diff(c.pearson) < 0)
    assert np.all(np.abs(c.pearson) <= 1.0)


def test_correlation_decreases_with_clock_noise():
    rho = [sequential_error_correlation(default_config(h, 0.1)) for h in (3e-25, 3e-23, 3e-21, 3e-19)]
    assert np.all(np.diff(rho) < 0)


def test_curve_csv(tmp_path):
    c = correlation_curve(3e-21, [0.5, 0.1])
    assert list(c.delta_t) == [0.1, 0.5]
    c.write_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().startswith("delta_t_s,pearson\n")


def test_config_validation():
    cfg = default_config(3e-21, 0.1)
    with pytest.raises(ValueError):
        cfg.replace(delta_t=0.0)
    with pytest.raises(ValueError):
        cfg.replace(doppler_sigma=0.0)
    assert cfg.replace(delta_t=0.2).delta_t == 0.2
