"""Synthetic geolocation observables: the common-mode clock-drift series and per-PRN Doppler."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clocks import STREAM_AWGN, STREAM_PRN, DriftNoiseParams, rng_stream, sample_random_walk
from .constants import C
from .geodesy import elevation, range_rates
from .scenario import CaptureScenario, SpoofedConstellation

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GammaSeries:
    """Velocity-equivalent clock-drift estimate ``z = c * gamma_hat`` (m/s) per epoch."""

    z: np.ndarray
    times: np.ndarray
    truth_range_rate: np.ndarray
    b0_true: float

    def __len__(self):
        return len(self.z)

    def write_csv(self, path) -> None:
        _write_series(path, self.times, self.z, "z_mps")


@dataclass(frozen=True, eq=False)
class DopplerSeries:
    prn: int
    times: np.ndarray
    f: np.ndarray  # Hz
    wavelength: float

    def range_rate_equivalent(self) -> np.ndarray:
        """``-lambda * f``: the series in the same sign and units as ``GammaSeries.z``."""
        return -self.wavelength * self.f

    def as_gamma(self) -> GammaSeries:
        return GammaSeries(self.range_rate_equivalent(), self.times, np.full(len(self.f), np.nan),
                           math.nan)

    def write_csv(self, path) -> None:
        _write_series(path, self.times, self.f, "f_hz")


@dataclass(frozen=True)
class CovarianceModel:
    sigma_a: float
    sigma_v: float
    n: int

    def __post_init__(self):
        if self.sigma_a < 0 or self.sigma_v < 0:
            raise ValueError("noise standard deviations must be non-negative")
        if self.n < 1:
            raise ValueError("covariance needs at least one epoch")


def _write_series(path, t, y, name) -> None:
    rows = [f"t_s,{name}"] + [f"{a!r},{b!r}" for a, b in zip(map(float, t), map(float, y))]
    Path(path).write_text("\n".join(rows) + "\n")


def min_kernel(n: int) -> np.ndarray:
    """``M[i, j] = min(i, j)`` with 1-based indices."""
    k = np.arange(1, n + 1)
    return np.minimum.outer(k, k).astype(float)


def build_covariance(cov: CovarianceModel) -> np.ndarray:
    """``R = sigma_a^2 I + sigma_v^2 M``: white estimation noise plus transmitter random walk."""
    return cov.sigma_a**2 * np.eye(cov.n) + cov.sigma_v**2 * min_kernel(cov.n)


def measurement_covariance(sigma_a: float, sigma_v: float, n: int) -> np.ndarray:
    return build_covariance(CovarianceModel(sigma_a, sigma_v, n))


def synthesize_gamma(
    scn: CaptureScenario,
    b0: float,
    noise: DriftNoiseParams,
    spoofed_drift=None,
    rng_seed: int = 0,
) -> GammaSeries:
    """``z[i] = range_rate[i] + b0 + w_a[i] + b[i] + eps[i]``.

    The receiver's own clock drift is taken as compensated.  ``b`` is
    :func:`~spoofgeo.clocks.sample_random_walk` for the same seed, so a run
    with ``sigma_v = 0`` plus that walk reproduces the full synthesis exactly.
    ``spoofed_drift`` is the spoofer-induced time-varying ``c * dt_spoofed[i]``.
    """
    rr = range_rates(scn.emitter_truth, scn.rx_pos, scn.rx_vel)
    n = rr.size
    if noise.delta_t is not None and abs(noise.delta_t - scn.delta_t) > 1e-9 * scn.delta_t:
        log.warning("noise delta_t %.6g s differs from scenario spacing %.6g s",
                    noise.delta_t, scn.delta_t)
    w_a = noise.sigma_a * rng_stream(rng_seed, STREAM_AWGN).standard_normal(n)
    walk = sample_random_walk(noise.sigma_v, n, rng_seed)
    z = rr + b0 + w_a + walk
    if spoofed_drift is not None:
        eps = np.asarray(spoofed_drift, dtype=float)
        if eps.shape != (n,):
            raise ValueError(f"spoofed_drift must have length {n}")
        z = z + eps
    return GammaSeries(z, scn.times.copy(), rr, float(b0))


def satellite_terms(scn: CaptureScenario, con: SpoofedConstellation) -> np.ndarray:
    """Per epoch and satellite, ``-r_hat^T v_sat - c * sat_clock_drift`` in m/s (I x N).

    ``r_hat`` points from the spoofed satellite to the static spoofed position,
    so the first term is the satellite-to-spoofed-position range-rate.
    """
    out = np.empty((scn.n_epochs, con.n_sats))
    for i, t in enumerate(scn.times):
        pos, vel = con.states(float(t))
        d = scn.spoofed_position - pos
        u = d / np.linalg.norm(d, axis=1)[:, None]
        out[i] = -np.einsum("ij,ij->i", u, vel) - C * con.clock_drift
    return out


def synthesize_prn_doppler(
    scn: CaptureScenario,
    con: SpoofedConstellation,
    spoofed_rx_drift: float,
    noise: DriftNoiseParams,
    rng_seed: int = 0,
    *,
    tx_drift: float = 0.0,
    mask: float = math.radians(10.0),
) -> list[DopplerSeries]:
    """Observed Doppler of each spoofed signal at the LEO receiver, in Hz.

    ``-lambda * f_n = range_rate + b0 + b[i] + sat_term_n + n_n[i]`` with
    ``b0 = -c * tx_drift + c * spoofed_rx_drift``.  The common part (through
    ``b[i]``) matches :func:`synthesize_gamma` for the same seed; ``n_n`` is
    independent per-signal tracking noise of std ``noise.sigma_a``.  Satellites
    below ``mask`` at any epoch, seen from the spoofed position, are dropped.
    """
    lam = scn.carrier_wavelength
    rr = range_rates(scn.emitter_truth, scn.rx_pos, scn.rx_vel)
    n = rr.size
    b0 = -C * tx_drift + C * spoofed_rx_drift
    walk = sample_random_walk(noise.sigma_v, n, rng_seed)
    common = rr + b0 + walk
    sat = satellite_terms(scn, con)
    rng = rng_stream(rng_seed, STREAM_PRN)

    keep = np.ones(con.n_sats, dtype=bool)
    for t in (scn.times[0], scn.times[-1]):
        keep &= con.visible(scn.spoofed_position, float(t), mask)
    for k in np.flatnonzero(~keep):
        log.warning("PRN %d below %.0f deg from the spoofed position; excluded",
                    con.prns[k], math.degrees(mask))

    out = []
    for k in range(con.n_sats):
        tracking = noise.sigma_a * rng.standard_normal(n)
        if not keep[k]:
            continue
        f = -(common + sat[:, k] + tracking) / lam
        out.append(DopplerSeries(con.prns[k], scn.times.copy(), f, lam))
    return out


def transmitted_doppler(scn: CaptureScenario, con: SpoofedConstellation,
                        spoofed_rx_drift: float = 0.0) -> np.ndarray:
    """Doppler each spoofed signal carries at transmission (I x N, Hz)."""
    return -(satellite_terms(scn, con) + C * spoofed_rx_drift) / scn.carrier_wavelength


def doppler_rate_bound(con: SpoofedConstellation, site, t0: float, t1: float,
                       wavelength: float, step: float = 1.0,
                       mask: float = math.radians(10.0)) -> float:
    """Largest |d/dt| of the satellite-to-site Doppler (Hz/s) over visible satellites."""
    ts = np.arange(t0, t1 + step / 2, step)
    rates = []
    vis = np.ones(con.n_sats, dtype=bool)
    for t in ts:
        pos, vel = con.states(float(t))
        d = site - pos
        u = d / np.linalg.norm(d, axis=1)[:, None]
        rates.append(-np.einsum("ij,ij->i", u, vel))
        vis &= np.array([elevation(site, p) > mask for p in pos])
    rates = np.array(rates)[:, vis]
    if rates.size == 0:
        return 0.0
    return float(np.max(np.abs(np.diff(rates, axis=0) / step)) / wavelength)
