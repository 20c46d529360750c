"""Altitude-aided weighted nonlinear least squares for emitter position and frequency bias."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .geodesy import (
    Geodetic,
    as_ecef,
    ecef_to_geodetic,
    enu_basis,
    geodetic_to_ecef,
    geodetic_jacobian,
    range_rates,
    wrap_lon,
)
from .observables import GammaSeries
from .scenario import CaptureScenario
from .special import chi2_quantile

DEFAULT_ALT_CONSTRAINT = (0.0, 100.0)  # (alt0 [m], sigma_alt [m])

STATE_LABELS = ("x", "y", "z", "b0")


class SingularGeometryError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class GeoState:
    r_t: np.ndarray
    b0: float

    def __post_init__(self):
        object.__setattr__(self, "r_t", as_ecef(self.r_t))
        if not math.isfinite(self.b0):
            raise ValueError("b0 must be finite")

    @property
    def vector(self) -> np.ndarray:
        return np.append(self.r_t, self.b0)

    @classmethod
    def from_vector(cls, x) -> "GeoState":
        return cls(np.asarray(x[:3], dtype=float), float(x[3]))


@dataclass(frozen=True)
class ErrorEllipse:
    semi_major: float
    semi_minor: float
    orientation: float  # semi-major axis, radians east of north in [0, pi)
    confidence: float = 0.95

    @property
    def area(self) -> float:
        return math.pi * self.semi_major * self.semi_minor


@dataclass(frozen=True, eq=False)
class GeolocationEstimate:
    state: GeoState
    covariance: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: bool
    ellipse: ErrorEllipse
    cost: float
    message: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def geodetic(self) -> Geodetic:
        return ecef_to_geodetic(self.state.r_t)

    @property
    def chi2(self) -> float:
        """Whitened residual sum of squares, ``2 J`` at the solution."""
        return 2.0 * self.cost

    @property
    def dof(self) -> int:
        return len(self.residuals) - 4

    def enu_error(self, truth) -> np.ndarray:
        """Estimate minus ``truth`` in the ENU frame at ``truth``."""
        g = truth if isinstance(truth, Geodetic) else ecef_to_geodetic(truth)
        return enu_basis(g) @ (self.state.r_t - geodetic_to_ecef(g))

    def horizontal_error(self, truth) -> float:
        return float(np.hypot(*self.enu_error(truth)[:2]))

    def contains(self, truth, confidence: float | None = None) -> bool:
        """Whether ``truth`` lies inside the horizontal ellipse centered at the estimate."""
        conf = self.ellipse.confidence if confidence is None else confidence
        g = self.geodetic
        rot = enu_basis(g)[:2]
        d = rot @ (as_ecef(truth) - self.state.r_t)
        p_en = rot @ self.covariance[:3, :3] @ rot.T
        return float(d @ np.linalg.solve(p_en, d)) <= chi2_quantile(conf, 2)

    def to_dict(self) -> dict:
        g = self.geodetic
        return {
            "lat": g.lat,
            "lon": g.lon,
            "alt": g.alt,
            "lat_deg": g.lat_deg,
            "lon_deg": g.lon_deg,
            "b0": self.state.b0,
            "semi_major_m": self.ellipse.semi_major,
            "semi_minor_m": self.ellipse.semi_minor,
            "orientation_rad": self.ellipse.orientation,
            "converged": self.converged,
            "iterations": self.iterations,
        }


# --- measurement model -------------------------------------------------------------


def range_rate_jacobian_row(tx, rx_pos, rx_vel) -> np.ndarray:
    """d(range-rate)/d(tx) = v^T (u u^T - I) / rho for a static transmitter."""
    d = as_ecef(rx_pos) - as_ecef(tx)
    rho = float(np.linalg.norm(d))
    if rho < 1e-6:
        raise ValueError("transmitter and receiver positions coincide")
    u = d / rho
    v = np.asarray(rx_vel, dtype=float)
    return (u * (u @ v) - v) / rho


def range_rate_jacobian(tx, rx_pos: np.ndarray, rx_vel: np.ndarray) -> np.ndarray:
    d = np.asarray(rx_pos) - as_ecef(tx)
    rho = np.linalg.norm(d, axis=1)
    if np.any(rho < 1e-6):
        raise ValueError("transmitter and receiver positions coincide")
    u = d / rho[:, None]
    uv = np.einsum("ij,ij->i", u, rx_vel)
    return (u * uv[:, None] - rx_vel) / rho[:, None]


def altitude_jacobian_row(g: Geodetic) -> np.ndarray:
    cl = math.cos(g.lat)
    return np.array([cl * math.cos(g.lon), cl * math.sin(g.lon), math.sin(g.lat), 0.0])


def measurement_model(x: np.ndarray, scn: CaptureScenario, with_altitude: bool):
    """Predicted measurements and Jacobian at state vector ``x = [r_t, b0]``."""
    r_t = x[:3]
    h = range_rates(r_t, scn.rx_pos, scn.rx_vel) + x[3]
    jac = np.ones((len(h), 4))
    jac[:, :3] = range_rate_jacobian(r_t, scn.rx_pos, scn.rx_vel)
    if with_altitude:
        g = ecef_to_geodetic(r_t)
        h = np.append(h, g.alt)
        jac = np.vstack([jac, altitude_jacobian_row(g)])
    return h, jac


def _augment(z: np.ndarray, R: np.ndarray, alt_constraint):
    if alt_constraint is None:
        return z, R
    alt0, sigma_alt = alt_constraint
    if not sigma_alt > 0:
        raise ValueError("sigma_alt must be positive")
    n = len(z)
    R_aug = np.zeros((n + 1, n + 1))
    R_aug[:n, :n] = R
    R_aug[n, n] = sigma_alt**2
    return np.append(z, alt0), R_aug


def _cholesky(R: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise ValueError("measurement covariance is not positive definite") from None


def information_matrix(x, scn: CaptureScenario, R: np.ndarray, alt_constraint=DEFAULT_ALT_CONSTRAINT):
    """``H^T R^-1 H`` at state ``x`` with the (optional) altitude row appended."""
    x = x.vector if isinstance(x, GeoState) else np.asarray(x, dtype=float)
    _, jac = measurement_model(x, scn, alt_constraint is not None)
    _, R_aug = _augment(np.zeros(scn.n_epochs), R, alt_constraint)
    L = _cholesky(R_aug)
    jw = solve_triangular(L, jac, lower=True)
    return jw.T @ jw


def _invert_information(info: np.ndarray) -> np.ndarray:
    # scale to unit diagonal so position (m) and bias (m/s) columns are comparable
    d = np.diag(info)
    if not np.all(d > 0):
        lab = STATE_LABELS[int(np.argmin(d))]
        raise SingularGeometryError(f"no information on state {lab}")
    s = 1.0 / np.sqrt(d)
    scaled = info * np.outer(s, s)
    w, vecs = np.linalg.eigh(scaled)
    if w[0] <= 1e-13 * w[-1]:
        worst = vecs[:, 0]
        desc = ", ".join(f"{lab}:{c:+.3f}" for lab, c in zip(STATE_LABELS, worst))
        raise SingularGeometryError(f"normal matrix is singular along [{desc}]")
    inv = (vecs / w) @ vecs.T
    out = inv * np.outer(s, s)
    return 0.5 * (out + out.T)


def crlb(x, scn: CaptureScenario, R: np.ndarray, alt_constraint=DEFAULT_ALT_CONSTRAINT) -> np.ndarray:
    """``(H^T R^-1 H)^-1`` at state ``x``."""
    return _invert_information(information_matrix(x, scn, R, alt_constraint))


# --- error ellipse -----------------------------------------------------------------


def horizontal_covariance(P: np.ndarray, at: Geodetic) -> np.ndarray:
    rot = enu_basis(at)[:2]
    return rot @ np.asarray(P)[:3, :3] @ rot.T


def error_ellipse(P: np.ndarray, at: Geodetic, confidence: float = 0.95) -> ErrorEllipse:
    """Horizontal confidence ellipse of the position block of ``P`` in the ENU frame at ``at``."""
    if not 0.0 <= confidence < 1.0:
        raise ValueError("confidence must lie in [0, 1)")
    P = np.asarray(P, dtype=float)
    if not np.allclose(P, P.T, rtol=1e-8, atol=0.0):
        raise ValueError("covariance must be symmetric")
    en = horizontal_covariance(P, at)
    en = 0.5 * (en + en.T)
    w, vecs = np.linalg.eigh(en)
    if w[0] < -1e-9 * max(abs(w[1]), 1e-300):
        raise ValueError("horizontal covariance block is not positive semi-definite")
    w = np.clip(w, 0.0, None)
    k = chi2_quantile(confidence, 2) if confidence > 0 else 0.0
    major = vecs[:, 1]
    orient = math.atan2(major[0], major[1]) % math.pi
    return ErrorEllipse(math.sqrt(k * w[1]), math.sqrt(k * w[0]), orient, confidence)


# --- estimation ----------------------------------------------------------------------


def fixed_altitude_covariance(scn: CaptureScenario, R: np.ndarray, truth=None) -> np.ndarray:
    """East/north/bias covariance ``(H~^T R^-1 H~)^-1`` with the emitter altitude held at truth.

    This is the hard-constraint limit of the altitude pseudo-measurement; only
    ``R`` feeds it, so it isolates one error source at a time.
    """
    r = scn.emitter_truth if truth is None else as_ecef(truth)
    basis = enu_basis(ecef_to_geodetic(r))
    J = range_rate_jacobian(r, scn.rx_pos, scn.rx_vel)
    Ht = np.column_stack([J @ basis[0], J @ basis[1], np.ones(scn.n_epochs)])
    L = _cholesky(np.asarray(R, dtype=float))
    hw = solve_triangular(L, Ht, lower=True)
    return _invert_information(hw.T @ hw)


def fixed_altitude_ellipse(scn: CaptureScenario, R: np.ndarray, confidence: float = 0.95,
                           truth=None) -> ErrorEllipse:
    P = fixed_altitude_covariance(scn, R, truth)
    w, vecs = np.linalg.eigh(0.5 * (P[:2, :2] + P[:2, :2].T))
    k = chi2_quantile(confidence, 2) if confidence > 0 else 0.0
    major = vecs[:, 1]
    orient = math.atan2(major[0], major[1]) % math.pi
    return ErrorEllipse(math.sqrt(k * max(w[1], 0.0)), math.sqrt(k * max(w[0], 0.0)), orient,
                        confidence)


def mirror_across_track(r, scn: CaptureScenario) -> np.ndarray:
    """Approximate reflection of ``r`` across the mid-capture ground track, kept at its altitude."""
    mid = scn.n_epochs // 2
    g = ecef_to_geodetic(as_ecef(r))
    basis = enu_basis(g)
    vel_en = basis[:2] @ scn.rx_vel[mid]
    along = vel_en / np.linalg.norm(vel_en)
    nadir = ecef_to_geodetic(scn.rx_pos[mid])
    offset = basis[:2] @ (as_ecef(r) - geodetic_to_ecef(Geodetic(nadir.lat, nadir.lon, g.alt)))
    cross = np.array([along[1], -along[0]])
    d = float(offset @ cross)
    shifted = as_ecef(r) - 2.0 * d * (cross[0] * basis[0] + cross[1] * basis[1])
    gs = ecef_to_geodetic(shifted)
    return geodetic_to_ecef(Geodetic(gs.lat, gs.lon, g.alt))


def nadir_init(z, scn: CaptureScenario, alt0: float = 0.0) -> GeoState:
    """Sub-satellite point at mid-capture on the ``alt0`` surface; bias from the mean residual."""
    mid = scn.n_epochs // 2
    g = ecef_to_geodetic(scn.rx_pos[mid])
    r = geodetic_to_ecef(Geodetic(g.lat, g.lon, alt0))
    b0 = float(np.mean(np.asarray(z) - range_rates(r, scn.rx_pos, scn.rx_vel)))
    return GeoState(r, b0)


def _z_vector(z) -> np.ndarray:
    return np.asarray(z.z if isinstance(z, GammaSeries) else z, dtype=float)


def estimate(
    z,
    scn: CaptureScenario,
    R: np.ndarray,
    alt_constraint=DEFAULT_ALT_CONSTRAINT,
    init=None,
    *,
    confidence: float = 0.95,
    max_iter: int = 50,
    lambda0: float = 1e-3,
    cost_tol: float = 1e-10,
    step_tol: float = 1e-4,
    keep_history: bool = False,
) -> GeolocationEstimate:
    """Levenberg-Marquardt fit of ``[r_t, b0]`` to the range-rate series ``z``.

    ``R`` is the I x I measurement covariance; ``alt_constraint`` is
    ``(alt0, sigma_alt)`` for the altitude pseudo-measurement or ``None``.
    ``init`` defaults to :func:`nadir_init`; ``"two-sided"`` also refits from
    the mirror image across the ground track and keeps the lower cost, which
    matters when the emitter lies to the right of the track.  Iteration stops when the
    relative cost change drops below ``cost_tol`` or the position step below
    ``step_tol`` meters.  A run that exhausts ``max_iter`` returns with
    ``converged=False``; a singular normal matrix at the solution raises
    :class:`SingularGeometryError`.
    """
    zv = _z_vector(z)
    n = scn.n_epochs
    if zv.shape != (n,):
        raise ValueError(f"measurement vector length {zv.size} does not match {n} epochs")
    if n < 4:
        raise ValueError("need at least 4 measurements")
    R = np.asarray(R, dtype=float)
    if R.shape != (n, n):
        raise ValueError(f"R must be {n} x {n}")
    z_aug, R_aug = _augment(zv, R, alt_constraint)
    L = _cholesky(R_aug)
    with_alt = alt_constraint is not None
    alt0 = alt_constraint[0] if with_alt else 0.0

    if isinstance(init, str):
        if init == "two-sided":
            first = estimate(zv, scn, R, alt_constraint, None, confidence=confidence,
                             max_iter=max_iter, lambda0=lambda0, cost_tol=cost_tol,
                             step_tol=step_tol, keep_history=keep_history)
            second = estimate(zv, scn, R, alt_constraint, mirror_across_track(first.state.r_t, scn),
                              confidence=confidence, max_iter=max_iter, lambda0=lambda0,
                              cost_tol=cost_tol, step_tol=step_tol, keep_history=keep_history)
            return second if second.cost < first.cost else first
        if init != "nadir":
            raise ValueError(f"unknown init mode {init!r}")
        init = None
    if init is None:
        init = nadir_init(zv, scn, alt0)
    elif not isinstance(init, GeoState):
        init = GeoState(np.asarray(init, dtype=float), 0.0)
        init = GeoState(init.r_t, float(np.mean(zv - range_rates(init.r_t, scn.rx_pos, scn.rx_vel))))
    # iterate in geodetic coordinates so the altitude row is linear and steps
    # follow the ellipsoid; the result is reported in ECEF
    g0 = ecef_to_geodetic(init.r_t)
    y = np.array([g0.lat, g0.lon, g0.alt, init.b0])

    def to_ecef(yy):
        lat = min(max(yy[0], -0.5 * math.pi), 0.5 * math.pi)
        g = Geodetic(lat, wrap_lon(yy[1]), yy[2])
        return g, np.r_[geodetic_to_ecef(g), yy[3]]

    def evaluate(yy):
        g, xx = to_ecef(yy)
        h, jac = measurement_model(xx, scn, with_alt)
        dr = geodetic_jacobian(g)
        jac_y = np.empty_like(jac)
        jac_y[:, :3] = jac[:, :3] @ dr
        jac_y[:, 3] = jac[:, 3]
        rw = solve_triangular(L, z_aug - h, lower=True)
        return rw, jac_y, 0.5 * float(rw @ rw), dr

    rw, jac, cost, dr = evaluate(y)
    lam = lambda0
    converged = False
    message = "maximum iterations reached"
    history = [(to_ecef(y)[1], cost)] if keep_history else []
    it = 0
    while it < max_iter:
        it += 1
        jw = solve_triangular(L, jac, lower=True)
        normal = jw.T @ jw
        grad = jw.T @ rw
        diag = np.diag(normal).copy()
        diag[diag <= 0] = 1.0
        accepted = False
        for _ in range(30):
            try:
                step = np.linalg.solve(normal + lam * np.diag(diag), grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            y_new = y + step
            rw_new, jac_new, cost_new, dr_new = evaluate(y_new)
            if cost_new <= cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            message = "no cost-reducing step found"
            converged = bool(np.linalg.norm(grad) <= 1e-8 * max(1.0, math.sqrt(2 * cost)))
            break
        rel = (cost - cost_new) / max(cost, 1e-300)
        step_m = float(np.linalg.norm(dr @ step[:3]))
        y, rw, jac, cost, dr = y_new, rw_new, jac_new, cost_new, dr_new
        lam = max(lam / 10.0, 1e-12)
        if keep_history:
            history.append((to_ecef(y)[1], cost))
        if rel < cost_tol or step_m < step_tol:
            converged = True
            message = "converged"
            break

    x = to_ecef(y)[1]
    P = crlb(x, scn, R, alt_constraint)
    state = GeoState.from_vector(x)
    h, _ = measurement_model(x, scn, with_alt)
    ell = error_ellipse(P, ecef_to_geodetic(state.r_t), confidence)
    return GeolocationEstimate(state, P, z_aug - h, it, converged, ell, cost, message, history)


def residuals_against(z, scn: CaptureScenario, state: GeoState, refit_bias: bool = False) -> np.ndarray:
    """Range-rate residuals ``z - r_hat^T v - b0`` against a given emitter state.

    With ``refit_bias`` the bias is replaced by the residual mean, which is how
    residuals against an externally supplied position (e.g. truth) are shown.
    """
    rr = range_rates(state.r_t, scn.rx_pos, scn.rx_vel)
    res = _z_vector(z) - rr
    b0 = float(np.mean(res)) if refit_bias else state.b0
    return res - b0


def estimate_per_prn(series, scn: CaptureScenario, R: np.ndarray,
                     alt_constraint=DEFAULT_ALT_CONSTRAINT, init=None) -> dict:
    """Biased fixes from each spoofed signal's own Doppler, keyed by PRN."""
    return {s.prn: estimate(s.range_rate_equivalent(), scn, R, alt_constraint, init) for s in series}
