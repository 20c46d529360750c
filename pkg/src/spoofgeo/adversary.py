"""Worst-case spoofed clock-drift trajectories against single-pass range-rate geolocation.

The spoofer adds ``eps`` to every victim's drift estimate and hence to the
geolocation measurements.  Linearized at truth with altitude held, the induced
east/north/bias error is ``B eps`` and the squared horizontal error is
``eps^T A eps``.  Under a norm budget ``zeta`` the maximizer is ``zeta`` times
the top eigenvector of ``A``; ``zeta`` itself is set by how detectable the
implied drift increments are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .clocks import rng_stream
from .detector import DetectorConfig, detect_many, prob_detection, prob_detection_lambda
from .geodesy import as_ecef, ecef_to_geodetic, enu_basis, range_rates
from .geolocator import SingularGeometryError, estimate, range_rate_jacobian
from .scenario import CaptureScenario

DEGENERACY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ErrorMap:
    B: np.ndarray  # 3 x I, perturbation -> [east, north, bias] error
    A: np.ndarray  # I x I, B_h^T B_h
    H_tilde: np.ndarray  # I x 3
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns, matching eigenvalues

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d1(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def v_star(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    @property
    def degenerate(self) -> bool:
        return bool(self.eigenvalues[0] - self.eigenvalues[1] <= DEGENERACY_TOL * max(self.d1, 1e-300))

    def horizontal_error(self, eps) -> float:
        e = self.B[:2] @ np.asarray(eps, dtype=float)
        return float(np.hypot(e[0], e[1]))


@dataclass(frozen=True, eq=False)
class AttackDesign:
    zeta: float
    trajectory: np.ndarray  # c * spoofed drift per epoch, m/s, first entry 0
    predicted_eh: float
    p_detect: float
    sign: int
    mu: np.ndarray  # normalized increments seen by the detector
    d1: float
    degenerate: bool

    @property
    def lam(self) -> float:
        return float(self.mu @ self.mu)

    def write_csv(self, path, times=None) -> None:
        t = np.arange(1, len(self.trajectory) + 1) if times is None else np.asarray(times)
        rows = ["t_s,spoofed_drift_mps"] + [f"{a!r},{b!r}" for a, b in
                                            zip(map(float, t), map(float, self.trajectory))]
        Path(path).write_text("\n".join(rows) + "\n")


def enu_jacobian(scn: CaptureScenario, truth) -> np.ndarray:
    """Range-rate partials with respect to east and north displacement at ``truth``, plus a ones column."""
    r = as_ecef(truth)
    basis = enu_basis(ecef_to_geodetic(r))
    J = range_rate_jacobian(r, scn.rx_pos, scn.rx_vel)
    return np.column_stack([J @ basis[0], J @ basis[1], np.ones(scn.n_epochs)])


def build_error_map(scn: CaptureScenario, R: np.ndarray, truth=None) -> ErrorMap:
    """``B = (H~^T R^-1 H~)^-1 H~^T R^-1`` and ``A = B[:2]^T B[:2]``."""
    truth = scn.emitter_truth if truth is None else truth
    Ht = enu_jacobian(scn, truth)
    R = np.asarray(R, dtype=float)
    if R.shape != (scn.n_epochs, scn.n_epochs):
        raise ValueError("R does not match the number of epochs")
    RiH = cho_solve(cho_factor(R, lower=True), Ht)
    normal = Ht.T @ RiH
    s = 1.0 / np.sqrt(np.diag(normal))
    cond = np.linalg.cond(normal * np.outer(s, s))
    if not np.isfinite(cond) or cond > 1e13:
        raise SingularGeometryError("east/north/bias Jacobian is rank deficient")
    B = np.linalg.solve(normal, RiH.T)
    Bh = B[:2]
    A = Bh.T @ Bh
    A = 0.5 * (A + A.T)
    w, V = np.linalg.eigh(A)
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    # sign convention: largest-magnitude entry positive, so results are reproducible
    for k in range(V.shape[1]):
        if V[np.argmax(np.abs(V[:, k])), k] < 0:
            V[:, k] = -V[:, k]
    return ErrorMap(B, A, Ht, w, V)


def worst_case_perturbation(emap: ErrorMap, zeta: float) -> tuple[np.ndarray, float, bool]:
    """``(eps*, predicted e_h, degenerate)`` with ``eps* = zeta v*``."""
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    eps = zeta * emap.v_star
    return eps, zeta * math.sqrt(max(emap.d1, 0.0)), emap.degenerate


def difference_matrix(n: int) -> np.ndarray:
    """``(n-1) x n`` first-difference operator, rows ``[-1, 1]``."""
    C = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    C[idx, idx] = -1.0
    C[idx, idx + 1] = 1.0
    return C


def _increment_norm(emap: ErrorMap) -> float:
    return float(np.linalg.norm(np.diff(emap.v_star)))


def _check_detector(emap: ErrorMap, det: DetectorConfig) -> None:
    if det.K != emap.n - 1:
        raise ValueError(f"detector K={det.K} must equal I - 1 = {emap.n - 1}")


def solve_zeta(emap: ErrorMap, det: DetectorConfig, p_detect_budget: float,
               tol: float = 1e-8) -> float:
    """Largest perturbation norm whose drift increments are detected with probability ``p_detect_budget``."""
    _check_detector(emap, det)
    if not p_detect_budget < 1.0:
        raise ValueError("p_detect_budget must be below 1")
    if p_detect_budget <= det.p_false_alarm:
        raise ValueError("p_detect_budget must exceed p_false_alarm; P_D never drops below P_F")
    g = _increment_norm(emap) / det.sigma_u
    if g == 0:
        raise ValueError("top eigenvector is constant; the detector cannot see it")

    def pd(zeta):
        return prob_detection_lambda((zeta * g) ** 2, det)

    lo, hi = 0.0, 1.0 / g
    while pd(hi) < p_detect_budget:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise ArithmeticError("could not bracket zeta")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        p = pd(mid)
        if abs(p - p_detect_budget) < tol or hi - lo <= 1e-15 * hi:
            return mid
        if p < p_detect_budget:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def attack_trajectory(emap: ErrorMap, zeta: float, sign: int, det: DetectorConfig) -> AttackDesign:
    """``c * spoofed drift = sign * zeta (v* - v*[0])``; starts at zero."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    _check_detector(emap, det)
    _, eh, degenerate = worst_case_perturbation(emap, zeta)
    v = emap.v_star
    traj = sign * zeta * (v - v[0])
    traj[0] = 0.0
    mu = sign * (zeta / det.sigma_u) * np.diff(v)
    return AttackDesign(float(zeta), traj, eh, prob_detection(mu, det), sign, mu, emap.d1, degenerate)


def design_attack(scn: CaptureScenario, R: np.ndarray, det: DetectorConfig,
                  p_detect_budget: float, sign: int = 1) -> AttackDesign:
    emap = build_error_map(scn, R)
    return attack_trajectory(emap, solve_zeta(emap, det, p_detect_budget), sign, det)


def realized_detection_rate(design: AttackDesign, det: DetectorConfig, n_trials: int,
                            seed: int = 0) -> float:
    """Fraction of simulated victims that flag the attack.

    Victim drift estimates follow the detector's own noise model: i.i.d.
    N(0, sigma_u^2) increments (estimation noise plus receiver clock walk)
    accumulated on top of the spoofed trajectory.
    """
    rng = rng_stream(seed, 21)
    n = len(design.trajectory)
    steps = det.sigma_u * rng.standard_normal((n_trials, n))
    drift = design.trajectory[None, :] + np.cumsum(steps, axis=1)
    theta = np.diff(drift, axis=1) / det.sigma_u
    return float(np.mean(detect_many(theta, det)))


def error_vs_budget(emap: ErrorMap, det: DetectorConfig, budgets) -> list[dict]:
    rows = []
    for pd in budgets:
        z = solve_zeta(emap, det, float(pd))
        rows.append({"p_detect": float(pd), "p_false_alarm": det.p_false_alarm, "zeta_mps": z,
                     "d1": emap.d1, "predicted_eh_m": z * math.sqrt(emap.d1)})
    return rows


def realized_error(scn: CaptureScenario, design: AttackDesign, R: np.ndarray,
                   alt_constraint, truth_b0: float = 0.0):
    """Estimate from noiseless measurements carrying the attack; returns (e_h, estimate)."""
    z = range_rates(scn.emitter_truth, scn.rx_pos, scn.rx_vel) + truth_b0 + design.trajectory
    est = estimate(z, scn, R, alt_constraint)
    return est.horizontal_error(scn.emitter_truth), est
