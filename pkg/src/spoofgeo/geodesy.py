"""WGS-84 frames and transmitter-to-receiver line-of-sight kinematics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import WGS84_A, WGS84_B, WGS84_E2, WGS84_F

_EP2 = (WGS84_A**2 - WGS84_B**2) / WGS84_B**2


@dataclass(frozen=True)
class Geodetic:
    """Geodetic coordinates; ``lat``/``lon`` in radians, ``alt`` in meters."""

    lat: float
    lon: float
    alt: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.lat, self.lon, self.alt)):
            raise ValueError("geodetic coordinates must be finite")
        if abs(self.lat) > math.pi / 2 + 1e-12:
            raise ValueError(f"latitude {self.lat} rad outside [-pi/2, pi/2]")
        if not -math.pi - 1e-12 <= self.lon <= math.pi + 1e-12:
            raise ValueError(f"longitude {self.lon} rad outside (-pi, pi]")

    @classmethod
    def from_degrees(cls, lat_deg: float, lon_deg: float, alt: float = 0.0) -> "Geodetic":
        return cls(math.radians(lat_deg), wrap_lon(math.radians(lon_deg)), alt)

    @property
    def lat_deg(self) -> float:
        return math.degrees(self.lat)

    @property
    def lon_deg(self) -> float:
        return math.degrees(self.lon)


@dataclass(frozen=True)
class LosState:
    unit_los: np.ndarray  # transmitter -> receiver
    range: float
    range_rate: float


def wrap_lon(lon: float) -> float:
    """Wrap a longitude into (-pi, pi]."""
    w = math.remainder(lon, 2.0 * math.pi)
    return math.pi if w == -math.pi else w


def as_ecef(p) -> np.ndarray:
    v = np.asarray(p, dtype=float).reshape(3)
    if not np.all(np.isfinite(v)):
        raise ValueError("ECEF vector must be finite")
    return v


def geodetic_to_ecef(g: Geodetic) -> np.ndarray:
    sl, cl = math.sin(g.lat), math.cos(g.lat)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sl * sl)
    return np.array([
        (n + g.alt) * cl * math.cos(g.lon),
        (n + g.alt) * cl * math.sin(g.lon),
        (n * (1.0 - WGS84_E2) + g.alt) * sl,
    ])


def ecef_to_geodetic(p, tol: float = 1e-12, max_iter: int = 20) -> Geodetic:
    """Invert :func:`geodetic_to_ecef` with Bowring's parametric-latitude iteration.

    Converges to ``tol`` radians in two or three passes for any point
    outside a 1 km ball around the Earth's center; closer points raise.
    """
    x, y, z = as_ecef(p)
    r_xy = math.hypot(x, y)
    if math.hypot(r_xy, z) < 1.0e3:
        raise ValueError("position too close to the Earth's center for a geodetic solution")
    lon = math.atan2(y, x) if r_xy > 0.0 else 0.0

    beta = math.atan2(z, (1.0 - WGS84_F) * r_xy)
    lat = math.nan
    for _ in range(max_iter):
        sb, cb = math.sin(beta), math.cos(beta)
        lat_new = math.atan2(z + _EP2 * WGS84_B * sb**3, r_xy - WGS84_E2 * WGS84_A * cb**3)
        done = abs(lat_new - lat) < tol
        lat = lat_new
        if done:
            break
        beta = math.atan2((1.0 - WGS84_F) * math.sin(lat), math.cos(lat))

    sl, cl = math.sin(lat), math.cos(lat)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sl * sl)
    # well conditioned at both the equator and the poles
    alt = r_xy * cl + z * sl - WGS84_A * WGS84_A / n
    return Geodetic(lat, wrap_lon(lon), float(alt))


def enu_basis(origin: Geodetic) -> np.ndarray:
    """Rows are the east, north and up unit vectors at ``origin`` in ECEF."""
    sl, cl = math.sin(origin.lat), math.cos(origin.lat)
    so, co = math.sin(origin.lon), math.cos(origin.lon)
    return np.array([
        [-so, co, 0.0],
        [-sl * co, -sl * so, cl],
        [cl * co, cl * so, sl],
    ])


def ecef_to_enu(p, origin: Geodetic) -> np.ndarray:
    return enu_basis(origin) @ (as_ecef(p) - geodetic_to_ecef(origin))


def enu_to_ecef(enu, origin: Geodetic) -> np.ndarray:
    return geodetic_to_ecef(origin) + enu_basis(origin).T @ np.asarray(enu, dtype=float)


def los_state(tx, rx_pos, rx_vel) -> LosState:
    """Unit line of sight from ``tx`` to ``rx_pos``, range and range-rate of a moving receiver."""
    d = as_ecef(rx_pos) - as_ecef(tx)
    rho = float(np.linalg.norm(d))
    if rho < 1e-6:
        raise ValueError("transmitter and receiver positions coincide")
    u = d / rho
    return LosState(u, rho, float(u @ np.asarray(rx_vel, dtype=float)))


def range_rates(tx, rx_pos: np.ndarray, rx_vel: np.ndarray) -> np.ndarray:
    """Vectorized range-rate of a static transmitter seen from a sampled receiver track."""
    d = np.asarray(rx_pos, dtype=float) - as_ecef(tx)
    rho = np.linalg.norm(d, axis=1)
    if np.any(rho < 1e-6):
        raise ValueError("transmitter and receiver positions coincide")
    return np.einsum("ij,ij->i", d, rx_vel) / rho


def elevation(site, target) -> float:
    """Elevation angle [rad] of ``target`` seen from ``site`` (both ECEF)."""
    g = ecef_to_geodetic(site)
    enu = enu_basis(g) @ (as_ecef(target) - as_ecef(site))
    return math.atan2(enu[2], math.hypot(enu[0], enu[1]))


def geodetic_jacobian(g: Geodetic) -> np.ndarray:
    """``d(ECEF) / d(lat, lon, alt)`` as a 3 x 3 matrix (columns per geodetic coordinate)."""
    sl, cl = math.sin(g.lat), math.cos(g.lat)
    so, co = math.sin(g.lon), math.cos(g.lon)
    w = 1.0 - WGS84_E2 * sl * sl
    n = WGS84_A / math.sqrt(w)
    m = WGS84_A * (1.0 - WGS84_E2) / w**1.5
    return np.column_stack([
        (m + g.alt) * np.array([-sl * co, -sl * so, cl]),
        (n + g.alt) * cl * np.array([-so, co, 0.0]),
        np.array([cl * co, cl * so, sl]),
    ])
