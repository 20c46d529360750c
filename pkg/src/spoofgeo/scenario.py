"""Capture geometry: LEO receiver pass, emitter truth and the spoofed GNSS constellation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import (
    GPS_INCLINATION_DEG,
    GPS_L1_WAVELENGTH,
    GPS_ORBIT_RADIUS,
    MU_EARTH,
    OMEGA_EARTH,
    WGS84_A,
)
from .geodesy import Geodetic, as_ecef, ecef_to_geodetic, elevation, geodetic_to_ecef

log = logging.getLogger(__name__)

PERTH = Geodetic.from_degrees(-31.95, 115.86, 0.0)
AUSTIN = Geodetic.from_degrees(30.2862, -97.7366, 170.0)

VEL_CONSISTENCY_MPS = 1e-2
_OMEGA = np.array([0.0, 0.0, OMEGA_EARTH])


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CaptureScenario:
    """Sampled receiver track plus the static emitter it observes.

    Samples are indexed ``i = 1..I`` at ``times = i * delta_t`` (or whatever
    uniform grid an ephemeris table supplied).
    """

    times: np.ndarray
    rx_pos: np.ndarray
    rx_vel: np.ndarray
    emitter_truth: np.ndarray
    spoofed_position: np.ndarray
    carrier_wavelength: float = GPS_L1_WAVELENGTH
    delta_t: float = field(init=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        pos = np.asarray(self.rx_pos, dtype=float)
        vel = np.asarray(self.rx_vel, dtype=float)
        for name, arr in (("times", t), ("rx_pos", pos), ("rx_vel", vel)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "emitter_truth", as_ecef(self.emitter_truth))
        object.__setattr__(self, "spoofed_position", as_ecef(self.spoofed_position))

        if t.ndim != 1 or t.size < 5:
            raise ScenarioError(f"need at least 5 epochs, got {t.size}")
        if pos.shape != (t.size, 3) or vel.shape != (t.size, 3):
            raise ScenarioError("rx_pos and rx_vel must be I x 3 arrays matching times")
        steps = np.diff(t)
        dt = float(steps.mean())
        if dt <= 0 or np.any(steps <= 0):
            bad = int(np.argmax(steps <= 0)) + 1
            raise ScenarioError(f"times must be strictly increasing (index {bad})")
        bad = np.flatnonzero(np.abs(steps - dt) > 1e-9 * max(dt, 1.0))
        if bad.size:
            raise ScenarioError(f"non-uniform time spacing at index {int(bad[0]) + 1}")
        object.__setattr__(self, "delta_t", dt)
        if not self.carrier_wavelength > 0:
            raise ScenarioError("carrier_wavelength must be positive")

        mismatch = velocity_mismatch(pos, vel, dt)
        worst = int(np.argmax(mismatch))
        if mismatch[worst] > VEL_CONSISTENCY_MPS:
            raise ScenarioError(
                f"rx_vel inconsistent with rx_pos at index {worst + 1}: "
                f"{mismatch[worst]:.3g} m/s > {VEL_CONSISTENCY_MPS} m/s"
            )
        alt = ecef_to_geodetic(self.emitter_truth).alt
        if abs(alt) >= 10e3:
            raise ScenarioError(f"emitter altitude {alt:.0f} m is not near the ellipsoid")

    @property
    def n_epochs(self) -> int:
        return self.times.size

    @property
    def emitter_geodetic(self) -> Geodetic:
        return ecef_to_geodetic(self.emitter_truth)

    def replace_emitter(self, emitter) -> "CaptureScenario":
        return CaptureScenario(self.times, self.rx_pos, self.rx_vel, emitter,
                               self.spoofed_position, self.carrier_wavelength)

    def segment(self, start: int, stop: int) -> "CaptureScenario":
        s = slice(start, stop)
        return CaptureScenario(self.times[s], self.rx_pos[s], self.rx_vel[s], self.emitter_truth,
                               self.spoofed_position, self.carrier_wavelength)


def velocity_mismatch(pos: np.ndarray, vel: np.ndarray, dt: float) -> np.ndarray:
    """Per interior sample, |central-difference velocity - Simpson average of rx_vel|.

    ``(p[i+1] - p[i-1]) / 2dt`` equals the Simpson mean ``(v[i-1] + 4 v[i] + v[i+1]) / 6``
    to fourth order in ``dt``, so the check stays tight for coarse epoch spacing.
    """
    cd = (pos[2:] - pos[:-2]) / (2.0 * dt)
    simpson = (vel[:-2] + 4.0 * vel[1:-1] + vel[2:]) / 6.0
    out = np.zeros(len(pos))
    out[1:-1] = np.linalg.norm(cd - simpson, axis=1)
    return out


# --- LEO pass ------------------------------------------------------------------------


def inertial_to_ecef(r_eci: np.ndarray, v_eci: np.ndarray, tau: np.ndarray):
    """Rotate inertial states into ECEF; the frames coincide at ``tau = 0``."""
    r_eci = np.atleast_2d(r_eci)
    v_eci = np.atleast_2d(v_eci)
    ang = OMEGA_EARTH * np.atleast_1d(tau)
    c, s = np.cos(ang), np.sin(ang)
    v_rel = v_eci - np.cross(_OMEGA, r_eci)

    def rot(u):
        return np.column_stack([c * u[:, 0] + s * u[:, 1], -s * u[:, 0] + c * u[:, 1], u[:, 2]])

    return rot(r_eci), rot(v_rel)


def _plane_normal(site_dir: np.ndarray, sin_psi: float, inclination: float, ascending: bool):
    """Unit orbit normal whose plane passes ``psi`` from ``site_dir`` with the given inclination."""
    z = np.array([0.0, 0.0, 1.0])
    c = float(site_dir @ z)
    if abs(c) > 1.0 - 1e-12:
        raise ScenarioError("polar emitter sites are not supported by the pass builder")
    ci = math.cos(inclination)
    det = 1.0 - c * c
    a = (sin_psi - c * ci) / det
    b = (ci - c * sin_psi) / det
    g2 = 1.0 - (a * a + b * b + 2.0 * a * b * c)
    if g2 < 0.0:
        raise ScenarioError(
            f"inclination {math.degrees(inclination):.2f} deg cannot reach this elevation "
            "over the emitter latitude"
        )
    third = np.cross(site_dir, z)
    third /= np.linalg.norm(third)
    for g in (math.sqrt(g2), -math.sqrt(g2)):
        n = a * site_dir + b * z + g * third
        u = site_dir - (site_dir @ n) * n
        u /= np.linalg.norm(u)
        if (np.cross(n, u)[2] > 0.0) == ascending:
            return n, u
    return n, u  # g2 == 0: both roots coincide


def build_circular_pass(
    emitter: Geodetic = PERTH,
    orbit_alt: float = 500e3,
    inclination: float = math.radians(97.4),
    max_elevation: float = math.radians(70.0),
    duration: float = 20.0,
    delta_t: float = 1.0,
    *,
    ascending: bool = True,
    emitter_left_of_track: bool = True,
    spoofed_position: Geodetic = AUSTIN,
    carrier_wavelength: float = GPS_L1_WAVELENGTH,
) -> CaptureScenario:
    """Two-body circular LEO pass whose peak elevation over ``emitter`` falls at mid-capture.

    Built in an inertial frame aligned with ECEF at the midpoint and rotated
    into ECEF (Earth-rotation velocity included).  The orbit phase is tuned so
    closest approach (zero range-rate) falls on the midpoint, and the plane
    offset so the ECEF elevation peak equals ``max_elevation``.  A zenith
    request places the plane through the geocentric site direction; the
    ellipsoid normal then leaves the true peak a few hundredths of a degree
    short of 90.
    """
    if not 300e3 <= orbit_alt <= 1500e3:
        raise ScenarioError(f"orbit_alt {orbit_alt:.0f} m outside [300 km, 1500 km]")
    if not 0.0 < max_elevation <= math.pi / 2:
        raise ScenarioError("max_elevation must lie in (0, pi/2] radians")
    if delta_t <= 0 or duration / delta_t < 5 - 1e-9:
        raise ScenarioError("need duration / delta_t >= 5")

    n_ep = int(round(duration / delta_t)) + 1
    times = delta_t * np.arange(1, n_ep + 1)
    t_mid = times[(n_ep - 1) // 2] if n_ep % 2 else 0.5 * (times[n_ep // 2 - 1] + times[n_ep // 2])

    site = geodetic_to_ecef(emitter)
    site_dir = site / np.linalg.norm(site)
    radius = WGS84_A + orbit_alt
    n_orb = math.sqrt(MU_EARTH / radius**3)
    side = 1.0 if emitter_left_of_track else -1.0

    def central_angle(el):
        return math.acos(min(1.0, np.linalg.norm(site) * math.cos(el) / radius)) - el

    def states(psi, phase, tau):
        n, u = _plane_normal(site_dir, side * math.sin(psi), inclination, ascending)
        w = np.cross(n, u)
        th = n_orb * tau + phase
        r = radius * (np.outer(np.cos(th), u) + np.outer(np.sin(th), w))
        v = radius * n_orb * (np.outer(-np.sin(th), u) + np.outer(np.cos(th), w))
        return inertial_to_ecef(r, v, tau)

    def closest_approach_rate(psi, phase):
        r, v = states(psi, phase, np.array([0.0]))
        d = r[0] - site
        return float(d @ v[0]) / float(np.linalg.norm(d))

    def align(psi, phase):
        # put the range minimum (zero range-rate) on tau = 0
        for _ in range(20):
            f = closest_approach_rate(psi, phase)
            dfd = (closest_approach_rate(psi, phase + 1e-6) - f) / 1e-6
            step = f / dfd
            phase -= step
            if abs(step) < 1e-13:
                break
        return phase

    def peak_elevation(psi, phase):
        tau = np.linspace(-1.0, 1.0, 41)
        r, _ = states(psi, phase, tau)
        return max(elevation(site, p) for p in r)

    psi = central_angle(max_elevation)
    phase = align(psi, 0.0)
    if max_elevation < math.pi / 2 - 1e-9:
        for _ in range(10):
            el_pk = peak_elevation(psi, phase)
            d = 1e-6
            slope = (peak_elevation(psi + d, align(psi + d, phase)) - el_pk) / d
            step = (max_elevation - el_pk) / slope
            psi += step
            phase = align(psi, phase)
            if abs(step) < 1e-11:
                break

    rx_pos, rx_vel = states(psi, phase, times - t_mid)
    return CaptureScenario(times, rx_pos, rx_vel, site, geodetic_to_ecef(spoofed_position),
                           carrier_wavelength)


def canonical_scenario(**overrides) -> CaptureScenario:
    """Perth emitter, 500 km orbit, 70 deg peak elevation, 20 s at 1 s spacing (I = 21)."""
    kw = dict(emitter=PERTH, orbit_alt=500e3, max_elevation=math.radians(70.0),
              duration=20.0, delta_t=1.0)
    kw.update(overrides)
    return build_circular_pass(**kw)


# --- ephemeris tables ------------------------------------------------------------------

_TRACK_HEADER = "# t_s,x_m,y_m,z_m,vx_mps,vy_mps,vz_mps"


def load_ephemeris_track(table, emitter, spoofed_position=None,
                         carrier_wavelength: float = GPS_L1_WAVELENGTH) -> CaptureScenario:
    """Build a scenario from ``(t, pos, vel)`` records; failures name the offending index."""
    rows = list(table)
    if len(rows) < 5:
        raise ScenarioError(f"ephemeris table needs at least 5 records, got {len(rows)}")
    t = np.array([float(r[0]) for r in rows])
    pos = np.array([np.asarray(r[1], dtype=float).reshape(3) for r in rows])
    vel = np.array([np.asarray(r[2], dtype=float).reshape(3) for r in rows])
    if isinstance(emitter, Geodetic):
        emitter = geodetic_to_ecef(emitter)
    if spoofed_position is None:
        spoofed_position = geodetic_to_ecef(AUSTIN)
    elif isinstance(spoofed_position, Geodetic):
        spoofed_position = geodetic_to_ecef(spoofed_position)
    return CaptureScenario(t, pos, vel, emitter, spoofed_position, carrier_wavelength)


def export_ephemeris_track(scn: CaptureScenario) -> list:
    return [(float(t), p.copy(), v.copy()) for t, p, v in zip(scn.times, scn.rx_pos, scn.rx_vel)]


def write_ephemeris_file(scn: CaptureScenario, path) -> None:
    lines = [
        _TRACK_HEADER,
        "# emitter_ecef_m: " + " ".join(repr(float(x)) for x in scn.emitter_truth),
        "# spoofed_ecef_m: " + " ".join(repr(float(x)) for x in scn.spoofed_position),
        f"# carrier_wavelength_m: {scn.carrier_wavelength!r}",
    ]
    for t, p, v in zip(scn.times, scn.rx_pos, scn.rx_vel):
        lines.append(",".join(repr(float(x)) for x in (t, *p, *v)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_ephemeris_file(path, emitter=None, spoofed_position=None,
                        carrier_wavelength: float | None = None) -> CaptureScenario:
    """Parse a ``t,x,y,z,vx,vy,vz`` track; ``#`` lines may carry emitter/spoofed metadata."""
    meta: dict[str, str] = {}
    table = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, val = line[1:].partition(":")
            if sep:
                meta[key.strip()] = val.strip()
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise ScenarioError(f"{path}:{lineno}: expected 7 comma-separated fields")
        vals = [float(x) for x in parts]
        table.append((vals[0], vals[1:4], vals[4:7]))
    if emitter is None:
        if "emitter_ecef_m" not in meta:
            raise ScenarioError("emitter position not given and absent from the track header")
        emitter = np.array([float(x) for x in meta["emitter_ecef_m"].split()])
    if spoofed_position is None and "spoofed_ecef_m" in meta:
        spoofed_position = np.array([float(x) for x in meta["spoofed_ecef_m"].split()])
    if carrier_wavelength is None:
        carrier_wavelength = float(meta.get("carrier_wavelength_m", GPS_L1_WAVELENGTH))
    return load_ephemeris_track(table, emitter, spoofed_position, carrier_wavelength)


# --- spoofed constellation ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpoofedConstellation:
    """Circular GPS-like orbits; inertial frame coincides with ECEF at ``t = 0``."""

    raan: np.ndarray
    arg_lat0: np.ndarray
    clock_drift: np.ndarray  # s/s
    prns: tuple
    radius: float = GPS_ORBIT_RADIUS
    inclination: float = math.radians(GPS_INCLINATION_DEG)

    def __post_init__(self):
        if len(self.raan) < 4:
            raise ScenarioError("a spoofed constellation needs at least 4 satellites")
        if not 2e7 <= self.radius <= 3e7:
            raise ScenarioError("spoofed satellites must be on MEO-scale orbits")

    @property
    def n_sats(self) -> int:
        return len(self.raan)

    @property
    def mean_motion(self) -> float:
        return math.sqrt(MU_EARTH / self.radius**3)

    def states(self, t: float):
        """ECEF positions and velocities (N x 3 each) at time ``t``."""
        th = self.arg_lat0 + self.mean_motion * t
        ci, si = math.cos(self.inclination), math.sin(self.inclination)
        co, so = np.cos(self.raan), np.sin(self.raan)
        ct, st = np.cos(th), np.sin(th)
        # perifocal-to-inertial with argument of latitude in place of true anomaly
        p = np.column_stack([co * ct - so * st * ci, so * ct + co * st * ci, st * si])
        q = np.column_stack([-co * st - so * ct * ci, -so * st + co * ct * ci, ct * si])
        r = self.radius * p
        v = self.radius * self.mean_motion * q
        tau = np.full(len(r), t)
        return inertial_to_ecef(r, v, tau)

    def visible(self, site, t: float = 0.0, mask: float = math.radians(10.0)) -> np.ndarray:
        pos, _ = self.states(t)
        return np.array([elevation(site, p) > mask for p in pos])

    def subset(self, idx) -> "SpoofedConstellation":
        idx = np.asarray(idx)
        return SpoofedConstellation(self.raan[idx], self.arg_lat0[idx], self.clock_drift[idx],
                                    tuple(np.asarray(self.prns)[idx].tolist()),
                                    self.radius, self.inclination)


def build_spoofed_constellation(
    seed: int,
    n_sats: int = 8,
    spoofed_position=None,
    *,
    t_ref: float = 0.0,
    min_visible: int = 4,
    mask: float = math.radians(10.0),
    max_retries: int = 200,
) -> SpoofedConstellation:
    """Random circular 26,560 km / 55 deg constellation, deterministic per ``seed``.

    Redraws (up to ``max_retries`` times) until ``min_visible`` satellites sit
    above ``mask`` from ``spoofed_position`` at ``t_ref``.
    """
    if n_sats < 4:
        raise ScenarioError("n_sats must be at least 4")
    if min_visible > n_sats:
        raise ScenarioError("min_visible cannot exceed n_sats")
    if spoofed_position is None:
        spoofed_position = AUSTIN
    if isinstance(spoofed_position, Geodetic):
        spoofed_position = geodetic_to_ecef(spoofed_position)
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        raan = rng.uniform(0.0, 2 * math.pi, n_sats)
        arg_lat0 = rng.uniform(0.0, 2 * math.pi, n_sats)
        drift = rng.uniform(-1e-11, 1e-11, n_sats)
        prns = tuple(int(p) for p in rng.choice(np.arange(1, 33), n_sats, replace=n_sats > 32))
        con = SpoofedConstellation(raan, arg_lat0, drift, prns)
        if con.visible(spoofed_position, t_ref, mask).sum() >= min_visible:
            return con
    raise ScenarioError(
        f"no draw with {min_visible} satellites above {math.degrees(mask):.0f} deg "
        f"after {max_retries} retries"
    )
