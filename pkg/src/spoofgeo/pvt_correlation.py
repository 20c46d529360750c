"""Time correlation of sequential clock-drift errors from a static-position PVT Kalman filter.

The victim's filter estimates position, clock bias and clock drift from one
pseudorange and one pseudorange-rate per visible satellite.  At steady state
the error recursion is ``x~[k+1] = (I - W H)(F x~[k] + w) - W v`` so the lag-one
cross-covariance is ``(I - W H) F P`` and the drift entry divided by the drift
variance is the Pearson coefficient of consecutive drift errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import solve_discrete_are

from .clocks import rng_stream
from .constants import C
from .geodesy import Geodetic, as_ecef, geodetic_to_ecef
from .scenario import AUSTIN, SpoofedConstellation, build_spoofed_constellation

N_STATES = 5  # x, y, z [m], clock bias [m], clock drift [m/s]
DRIFT = 4
BIAS = 3

H0_DEFAULT = 1e-21
CURVE_SEED = 7
CURVE_N_VISIBLE = 7


@dataclass(frozen=True)
class PvtFilterConfig:
    """Static-receiver PVT filter.  Satellite geometry is frozen at ``t = 0``.

    ``position_q`` is a small position random-walk intensity (m^2/s); a truly
    static position never lets the Riccati recursion settle to a fixed point.
    """

    h_minus_2_model: float
    delta_t: float
    constellation: SpoofedConstellation
    site: np.ndarray
    pseudorange_sigma: float = 1.0
    doppler_sigma: float = 0.5
    h_0_model: float = H0_DEFAULT
    position_q: float = 1e-6
    mask: float = math.radians(10.0)

    def __post_init__(self):
        if not (self.pseudorange_sigma > 0 and self.doppler_sigma > 0):
            raise ValueError("measurement sigmas must be positive")
        if self.delta_t <= 0:
            raise ValueError("delta_t must be positive")
        if self.h_minus_2_model < 0 or self.h_0_model < 0 or self.position_q < 0:
            raise ValueError("process noise parameters must be non-negative")

    def replace(self, **kw) -> "PvtFilterConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return PvtFilterConfig(**d)


@dataclass(frozen=True, eq=False)
class SteadyState:
    P: np.ndarray  # posterior covariance
    W: np.ndarray
    F: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    iterations: int


@dataclass(frozen=True, eq=False)
class CorrelationCurve:
    delta_t: np.ndarray
    pearson: np.ndarray
    h_minus_2: float

    def write_csv(self, path) -> None:
        rows = ["delta_t_s,pearson"] + [f"{t!r},{p!r}" for t, p in
                                        zip(map(float, self.delta_t), map(float, self.pearson))]
        Path(path).write_text("\n".join(rows) + "\n")


def default_config(h_minus_2: float, delta_t: float, **kw) -> PvtFilterConfig:
    """Filter on the fixed-seed synthetic constellation, trimmed to 7 visible satellites."""
    site = kw.pop("site", AUSTIN)
    site = geodetic_to_ecef(site) if isinstance(site, Geodetic) else as_ecef(site)
    con = build_spoofed_constellation(CURVE_SEED, n_sats=12, spoofed_position=site,
                                      min_visible=CURVE_N_VISIBLE)
    vis = np.flatnonzero(con.visible(site, 0.0))[:CURVE_N_VISIBLE]
    return PvtFilterConfig(h_minus_2, delta_t, con.subset(vis), site, **kw)


def transition(delta_t: float) -> np.ndarray:
    F = np.eye(N_STATES)
    F[BIAS, DRIFT] = delta_t
    return F


def process_noise(cfg: PvtFilterConfig) -> np.ndarray:
    """Two-state clock model (white frequency ``h0`` plus random-walk frequency ``h-2``)."""
    dt = cfg.delta_t
    s_f = 0.5 * cfg.h_0_model * C**2
    s_g = 2.0 * math.pi**2 * cfg.h_minus_2_model * C**2
    Q = np.zeros((N_STATES, N_STATES))
    Q[:3, :3] = cfg.position_q * dt * np.eye(3)
    Q[BIAS, BIAS] = s_f * dt + s_g * dt**3 / 3.0
    Q[BIAS, DRIFT] = Q[DRIFT, BIAS] = s_g * dt**2 / 2.0
    Q[DRIFT, DRIFT] = s_g * dt
    return Q


def measurement_matrices(cfg: PvtFilterConfig) -> tuple[np.ndarray, np.ndarray]:
    """Stacked pseudorange rows ``[u^T, 1, 0]`` and pseudorange-rate rows ``[0, 0, 0, 0, 1]``."""
    pos, _ = cfg.constellation.states(0.0)
    vis = cfg.constellation.visible(cfg.site, 0.0, cfg.mask)
    if vis.sum() < 4:
        raise ValueError(f"only {int(vis.sum())} satellites visible; need 4")
    d = cfg.site - pos[vis]
    u = d / np.linalg.norm(d, axis=1)[:, None]
    n = len(u)
    H = np.zeros((2 * n, N_STATES))
    H[:n, :3] = u  # pseudorange grows along the satellite-to-site direction
    H[:n, BIAS] = 1.0
    H[n:, DRIFT] = 1.0
    R = np.diag(np.r_[np.full(n, cfg.pseudorange_sigma**2), np.full(n, cfg.doppler_sigma**2)])
    return H, R


def _update(P_prior, H, R):
    S = H @ P_prior @ H.T + R
    W = np.linalg.solve(S, H @ P_prior).T
    ImWH = np.eye(len(P_prior)) - W @ H
    # Joseph form keeps P symmetric PSD over many iterations
    P = ImWH @ P_prior @ ImWH.T + W @ R @ W.T
    return 0.5 * (P + P.T), W


def steady_state_filter(cfg: PvtFilterConfig, tol: float = 1e-12,
                        max_iter: int = 1_000_000) -> SteadyState:
    """Iterate the Riccati recursion until the relative change in ``P`` is below ``tol``
    (or stalls at rounding level within a factor 1e4 of it).

    The iteration is seeded with the discrete algebraic Riccati solution, so
    it usually settles within a handful of steps.
    """
    F = transition(cfg.delta_t)
    Q = process_noise(cfg)
    H, R = measurement_matrices(cfg)
    if np.linalg.matrix_rank(H) < N_STATES:
        raise ValueError("measurement geometry does not observe the full state")
    try:
        # start from the algebraic fixed point; the loop below then confirms it
        P = _update(solve_discrete_are(F.T, H.T, Q, R), H, R)[0]
    except (np.linalg.LinAlgError, ValueError):
        P = np.linalg.inv(H.T @ np.linalg.solve(R, H))
    prev = math.inf
    for k in range(1, max_iter + 1):
        P_new, W = _update(F @ P @ F.T + Q, H, R)
        if not np.all(np.isfinite(P_new)):
            raise ArithmeticError("Riccati recursion diverged")
        rel = np.linalg.norm(P_new - P) / np.linalg.norm(P)
        # a change that no longer shrinks is the rounding floor of the update
        if rel < tol or (rel < 1e4 * tol and rel >= 0.999 * prev):
            return SteadyState(P_new, W, F, H, Q, R, k)
        P, prev = P_new, rel
    raise ArithmeticError(f"Riccati recursion did not settle in {max_iter} iterations")


def lag_one_covariance(ss: SteadyState) -> np.ndarray:
    """``E{x~[k+1] x~[k]^T} = (I - W H) F P``."""
    return (np.eye(N_STATES) - ss.W @ ss.H) @ ss.F @ ss.P


def sequential_error_correlation(cfg: PvtFilterConfig) -> float:
    ss = steady_state_filter(cfg)
    return float(lag_one_covariance(ss)[DRIFT, DRIFT] / ss.P[DRIFT, DRIFT])


def correlation_curve(h_minus_2: float, delta_ts, **kw) -> CorrelationCurve:
    dts = np.sort(np.asarray(delta_ts, dtype=float))
    rho = np.array([sequential_error_correlation(default_config(h_minus_2, float(dt), **kw))
                    for dt in dts])
    return CorrelationCurve(dts, rho, float(h_minus_2))


def simulate_drift_errors(cfg: PvtFilterConfig, n_runs: int, n_steps: int = 2,
                          seed: int = 0, burn_in: int | None = None) -> np.ndarray:
    """Drift estimation errors of ``n_runs`` independent filters (``n_runs x n_steps``).

    Each run starts from the steady-state covariance, draws a true state error,
    and propagates truth and filter with sampled process and measurement noise;
    the first ``burn_in`` epochs are discarded.
    """
    ss = steady_state_filter(cfg)
    rng = rng_stream(seed, 11)
    if burn_in is None:
        burn_in = 20
    LQ = np.linalg.cholesky(ss.Q + 1e-30 * np.eye(N_STATES))
    LR = np.linalg.cholesky(ss.R)
    LP = np.linalg.cholesky(ss.P)
    err = rng.standard_normal((n_runs, N_STATES)) @ LP.T
    ImWH = np.eye(N_STATES) - ss.W @ ss.H
    out = np.empty((n_runs, n_steps))
    for k in range(burn_in + n_steps):
        w = rng.standard_normal((n_runs, N_STATES)) @ LQ.T
        v = rng.standard_normal((n_runs, len(ss.R))) @ LR.T
        err = (err @ ss.F.T + w) @ ImWH.T - v @ ss.W.T
        if k >= burn_in:
            out[:, k - burn_in] = err[:, DRIFT]
    return out


def sample_pearson(errors: np.ndarray) -> float:
    """Lag-one Pearson coefficient pooled over runs."""
    a = errors[:, :-1].ravel()
    b = errors[:, 1:].ravel()
    return float(np.corrcoef(a, b)[0, 1])
