import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spoofgeo.clocks import DriftNoiseParams
from spoofgeo.geodesy import Geodetic, ecef_to_geodetic, geodetic_to_ecef, range_rates
from spoofgeo.geolocator import (
    GeoState,
    SingularGeometryError,
    altitude_jacobian_row,
    crlb,
    error_ellipse,
    estimate,
    fixed_altitude_covariance,
    fixed_altitude_ellipse,
    measurement_model,
    mirror_across_track,
    range_rate_jacobian,
    range_rate_jacobian_row,
    residuals_against,
)
from spoofgeo.observables import measurement_covariance, synthesize_gamma
from spoofgeo.scenario import canonical_scenario


def R_tcxo(n=21):
    return measurement_covariance(0.1, 0.0729535, n)


def fd_range_rate(tx, p, v, h=1.0):
    g = np.empty(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        g[k] = (range_rates(tx + e, p[None], v[None])[0] - range_rates(tx - e, p[None], v[None])[0]) / (2 * h)
    return g


def test_range_rate_jacobian_random_geometries(rng):
    worst = 0.0
    for _ in range(100):
        tx = geodetic_to_ecef(Geodetic(rng.uniform(-1.4, 1.4), rng.uniform(-3, 3), rng.uniform(0, 3e3)))
        up = tx / np.linalg.norm(tx)
        p = tx + up * rng.uniform(3e5, 2e6) + rng.normal(0, 5e5, 3)
        v = rng.normal(0, 5e3, 3)
        a = range_rate_jacobian_row(tx, p, v)
        worst = max(worst, np.linalg.norm(a - fd_range_rate(tx, p, v)) / np.linalg.norm(a))
    assert worst < 1e-6


def test_altitude_jacobian_random_geometries(rng):
    for _ in range(100):
        g = Geodetic(rng.uniform(-1.5, 1.5), rng.uniform(-3, 3), rng.uniform(-100, 1e4))
        r = geodetic_to_ecef(g)
        row = altitude_jacobian_row(g)
        fd = np.array([(ecef_to_geodetic(r + e).alt - ecef_to_geodetic(r - e).alt) / 2.0
                       for e in np.eye(3)])
        assert np.linalg.norm(row[:3] - fd) / np.linalg.norm(fd) < 1e-6


def test_stacked_jacobian_matches_rows(scn):
    J = range_rate_jacobian(scn.emitter_truth, scn.rx_pos, scn.rx_vel)
    assert J.shape == (scn.n_epochs, 3)
    assert np.allclose(J[3], range_rate_jacobian_row(scn.emitter_truth, scn.rx_pos[3], scn.rx_vel[3]))
    h, H = measurement_model(np.append(scn.emitter_truth, 2.0), scn, True)
    assert H.shape == (scn.n_epochs + 1, 4)
    assert np.allclose(H[:-1, 3], 1.0)


def test_noiseless_recovery(scn):
    z = synthesize_gamma(scn, 3.0, DriftNoiseParams(0, 0))
    est = estimate(z, scn, R_tcxo())
    assert est.converged and est.iterations <= 15
    assert est.horizontal_error(scn.emitter_truth) < 1.0
    assert abs(est.state.b0 - 3.0) < 1e-3
    assert np.allclose(residuals_against(z, scn, est.state), 0.0, atol=1e-6)


def test_two_sided_init_handles_right_of_track():
    s = canonical_scenario(emitter_left_of_track=False)
    z = synthesize_gamma(s, 0.0, DriftNoiseParams(0, 0))
    est = estimate(z, s, R_tcxo(), init="two-sided")
    assert est.horizontal_error(s.emitter_truth) < 1.0


def test_init_from_truth_and_bad_lengths(scn):
    z = synthesize_gamma(scn, 0.0, DriftNoiseParams(0.1, 0.0729535), rng_seed=2)
    est = estimate(z, scn, R_tcxo(), init=GeoState(scn.emitter_truth, 0.0))
    assert est.converged
    with pytest.raises(ValueError):
        estimate(z.z[:-1], scn, R_tcxo())
    with pytest.raises(ValueError):
        estimate(z, scn, R_tcxo(20))


def test_max_iter_reports_not_converged(scn):
    z = synthesize_gamma(scn, 0.0, DriftNoiseParams(0, 0))
    est = estimate(z, scn, R_tcxo(), max_iter=1)
    assert not est.converged


def test_singular_geometry_is_reported(scn):
    z = synthesize_gamma(scn, 0.0, DriftNoiseParams(0, 0)).z
    # a receiver parked in place sees no geometry
    frozen = scn.__class__(scn.times, np.repeat(scn.rx_pos[:1], scn.n_epochs, 0),
                           np.zeros_like(scn.rx_vel), scn.emitter_truth, scn.spoofed_position)
    with pytest.raises((SingularGeometryError, np.linalg.LinAlgError)):
        estimate(z, frozen, R_tcxo(), alt_constraint=None)


def test_crlb_is_symmetric_and_ellipse_consistent(scn):
    P = crlb(np.append(scn.emitter_truth, 0.0), scn, R_tcxo())
    assert np.allclose(P, P.T)
    assert np.linalg.eigvalsh(P).min() > 0
    ell = error_ellipse(P, scn.emitter_geodetic)
    assert ell.semi_major >= ell.semi_minor > 0
    assert 0 <= ell.orientation < math.pi
    wide = error_ellipse(P, scn.emitter_geodetic, 0.99)
    assert wide.semi_major > ell.semi_major


@settings(max_examples=20)
@given(st.floats(1.0, 100.0))
def test_crlb_scales_with_noise(k):
    scn = canonical_scenario()
    x = np.append(scn.emitter_truth, 0.0)
    P1 = crlb(x, scn, R_tcxo(), alt_constraint=None)
    Pk = crlb(x, scn, k * R_tcxo(), alt_constraint=None)
    # without the altitude row the normal matrix has condition ~1e13, so allow for roundoff
    assert np.allclose(Pk, k * P1, rtol=1e-4)


def test_tighter_altitude_shrinks_ellipse(scn):
    x = np.append(scn.emitter_truth, 0.0)
    loose = error_ellipse(crlb(x, scn, R_tcxo(), (0.0, 1000.0)), scn.emitter_geodetic)
    tight = error_ellipse(crlb(x, scn, R_tcxo(), (0.0, 1.0)), scn.emitter_geodetic)
    assert tight.area < loose.area


def test_fixed_altitude_axes(scn):
    P = fixed_altitude_covariance(scn, R_tcxo())
    assert P.shape == (3, 3)
    ell = fixed_altitude_ellipse(scn, R_tcxo())
    assert ell.semi_major > ell.semi_minor > 0


def test_mirror_is_roughly_an_involution(scn):
    m = mirror_across_track(scn.emitter_truth, scn)
    assert np.linalg.norm(m - scn.emitter_truth) > 1e5
    back = mirror_across_track(m, scn)
    assert np.linalg.norm(back - scn.emitter_truth) < 2e3


def test_estimate_dict_and_containment(scn):
    z = synthesize_gamma(scn, 0.0, DriftNoiseParams(0, 0))
    est = estimate(z, scn, R_tcxo())
    d = est.to_dict()
    assert d["lat_deg"] == pytest.approx(-31.95, abs=1e-4)
    assert est.contains(scn.emitter_truth)
    assert est.dof == scn.n_epochs + 1 - 4
