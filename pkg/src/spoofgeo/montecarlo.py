"""Monte Carlo harness for estimator accuracy and ellipse calibration under clock instability.

Trial ``k`` uses seed ``base_seed + k`` for every noise stream (AWGN, random
walk, altitude pseudo-measurement), so results are reproducible and
independent of how trials are split across workers.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .clocks import STREAM_ALTITUDE, ClockModel, DriftNoiseParams, preset, rng_stream, sigma_v
from .geodesy import enu_basis
from .geolocator import (
    DEFAULT_ALT_CONSTRAINT,
    GeoState,
    crlb,
    error_ellipse,
    estimate,
    fixed_altitude_ellipse,
    horizontal_covariance,
)
from .observables import measurement_covariance, synthesize_gamma
from .scenario import CaptureScenario, canonical_scenario

log = logging.getLogger(__name__)

WORKERS_ENV = "SPOOFGEO_WORKERS"

RECORD_DTYPE = np.dtype([
    ("seed", "i8"),
    ("east_m", "f8"),
    ("north_m", "f8"),
    ("up_m", "f8"),
    ("b0_err_mps", "f8"),
    ("semi_major_m", "f8"),
    ("semi_minor_m", "f8"),
    ("orientation_rad", "f8"),
    ("area_m2", "f8"),
    ("contained", "?"),
    ("converged", "?"),
    ("iterations", "i4"),
])


class StudyDivergenceError(RuntimeError):
    def __init__(self, n_diverged: int, n_trials: int, limit: float):
        super().__init__(f"{n_diverged} of {n_trials} trials failed to converge "
                         f"(limit {100 * limit:.1f}%)")
        self.n_diverged = n_diverged
        self.n_trials = n_trials


@dataclass(frozen=True)
class TrialConfig:
    """One Monte Carlo study.

    ``estimator_R_mode`` is ``"full"`` (AWGN plus random walk) or ``"awgn_only"``;
    ``estimator_sigma_a_model`` (default: the true ``sigma_a``) is the AWGN
    level the estimator assumes.  The altitude pseudo-measurement is drawn
    as ``alt0 + N(0, sigma_alt^2)`` each trial.  ``init_mode="truth"`` starts
    the solver at the true emitter so the cross-track mirror solution, which
    the data cannot rule out, does not enter accuracy statistics.
    """

    scenario: CaptureScenario = field(default_factory=canonical_scenario)
    clock: ClockModel = field(default_factory=lambda: preset("TCXO"))
    sigma_a: float = 0.1
    n_trials: int = 10_000
    estimator_R_mode: str = "full"
    estimator_sigma_a_model: float | None = None
    base_seed: int = 0
    b0: float = 0.0
    alt_constraint: tuple = DEFAULT_ALT_CONSTRAINT
    confidence: float = 0.95
    max_divergence: float = 0.01
    workers: int | None = None
    init_mode: str = "truth"

    def __post_init__(self):
        if self.n_trials < 100:
            raise ValueError("n_trials must be at least 100")
        if self.estimator_R_mode not in ("full", "awgn_only"):
            raise ValueError("estimator_R_mode must be 'full' or 'awgn_only'")
        if self.sigma_a < 0:
            raise ValueError("sigma_a must be non-negative")
        if self.estimator_sigma_a_model is not None and not self.estimator_sigma_a_model > 0:
            raise ValueError("estimator_sigma_a_model must be positive")
        if self.init_mode not in ("truth", "nadir", "two-sided"):
            raise ValueError("init_mode must be 'truth', 'nadir' or 'two-sided'")

    @property
    def sigma_v(self) -> float:
        return sigma_v(self.clock, self.scenario.delta_t)

    @property
    def noise(self) -> DriftNoiseParams:
        return DriftNoiseParams(self.sigma_a, self.sigma_v, self.scenario.delta_t)

    def true_R(self) -> np.ndarray:
        return measurement_covariance(self.sigma_a, self.sigma_v, self.scenario.n_epochs)

    def estimator_R(self) -> np.ndarray:
        sa = self.sigma_a if self.estimator_sigma_a_model is None else self.estimator_sigma_a_model
        sv = self.sigma_v if self.estimator_R_mode == "full" else 0.0
        return measurement_covariance(sa, sv, self.scenario.n_epochs)


@dataclass(frozen=True, eq=False)
class StudyResult:
    config: TrialConfig
    rmse_h: float
    containment: float
    containment_se: float
    mean_ellipse_area: float
    crlb_rmse: float
    mean_error_enu: np.ndarray
    n_diverged: int
    records: np.ndarray

    @property
    def n_used(self) -> int:
        return int(self.records["converged"].sum())

    def summary(self) -> dict:
        cfg = self.config
        return {
            "clock_label": cfg.clock.label,
            "h_minus_2": cfg.clock.h_minus_2,
            "sigma_a_mps": cfg.sigma_a,
            "estimator_R_mode": cfg.estimator_R_mode,
            "estimator_sigma_a_model_mps": cfg.estimator_sigma_a_model,
            "n_trials": cfg.n_trials,
            "base_seed": cfg.base_seed,
            "n_diverged": self.n_diverged,
            "rmse_h_m": self.rmse_h,
            "crlb_rmse_m": self.crlb_rmse,
            "rmse_over_crlb": self.rmse_h / self.crlb_rmse,
            "containment": self.containment,
            "containment_se": self.containment_se,
            "mean_ellipse_area_m2": self.mean_ellipse_area,
            "mean_error_east_m": float(self.mean_error_enu[0]),
            "mean_error_north_m": float(self.mean_error_enu[1]),
        }

    def write_csv(self, path) -> None:
        names = self.records.dtype.names
        lines = [",".join(names)]
        for row in self.records:
            lines.append(",".join(repr(bool(v)) if isinstance(v, np.bool_) else repr(v.item())
                                  for v in (row[n] for n in names)))
        Path(path).write_text("\n".join(lines) + "\n")


def _run_trials(cfg: TrialConfig, indices: range) -> np.ndarray:
    scn = cfg.scenario
    R_est = cfg.estimator_R()
    noise = cfg.noise
    alt0, sigma_alt = cfg.alt_constraint
    truth = scn.emitter_geodetic
    rot = enu_basis(truth)
    init = GeoState(scn.emitter_truth, cfg.b0) if cfg.init_mode == "truth" else (
        None if cfg.init_mode == "nadir" else cfg.init_mode)
    out = np.zeros(len(indices), dtype=RECORD_DTYPE)
    for j, k in enumerate(indices):
        seed = cfg.base_seed + k
        g = synthesize_gamma(scn, cfg.b0, noise, rng_seed=seed)
        alt_meas = alt0 + sigma_alt * rng_stream(seed, STREAM_ALTITUDE).standard_normal()
        rec = out[j]
        rec["seed"] = seed
        try:
            est = estimate(g, scn, R_est, (alt_meas, sigma_alt), init, confidence=cfg.confidence)
        except (np.linalg.LinAlgError, ValueError) as exc:
            log.debug("trial %d failed: %s", seed, exc)
            rec["converged"] = False
            for name in ("east_m", "north_m", "up_m", "b0_err_mps", "semi_major_m",
                         "semi_minor_m", "orientation_rad", "area_m2"):
                rec[name] = np.nan
            continue
        err = rot @ (est.state.r_t - scn.emitter_truth)
        rec["east_m"], rec["north_m"], rec["up_m"] = err
        rec["b0_err_mps"] = est.state.b0 - cfg.b0
        ell = est.ellipse
        rec["semi_major_m"] = ell.semi_major
        rec["semi_minor_m"] = ell.semi_minor
        rec["orientation_rad"] = ell.orientation
        rec["area_m2"] = ell.area
        rec["contained"] = est.contains(scn.emitter_truth, cfg.confidence)
        rec["converged"] = est.converged
        rec["iterations"] = est.iterations
    return out


def _chunks(n: int, parts: int) -> list[range]:
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [range(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    return max(1, int(workers))


def crlb_rmse(cfg: TrialConfig) -> float:
    """sqrt(trace) of the horizontal CRLB at truth under the true ``R``."""
    scn = cfg.scenario
    P = crlb(np.r_[scn.emitter_truth, cfg.b0], scn, cfg.true_R(), cfg.alt_constraint)
    return float(math.sqrt(np.trace(horizontal_covariance(P, scn.emitter_geodetic))))


def run_study(cfg: TrialConfig) -> StudyResult:
    workers = resolve_workers(cfg.workers)
    if workers == 1:
        records = _run_trials(cfg, range(cfg.n_trials))
    else:
        parts = _chunks(cfg.n_trials, 4 * workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pieces = list(pool.map(_run_trials, [cfg] * len(parts), parts))
        records = np.concatenate(pieces)

    ok = records["converged"]
    n_div = int((~ok).sum())
    if n_div > cfg.max_divergence * cfg.n_trials:
        raise StudyDivergenceError(n_div, cfg.n_trials, cfg.max_divergence)
    if n_div:
        log.warning("%d of %d trials did not converge; excluded", n_div, cfg.n_trials)
    good = records[ok]
    eh2 = good["east_m"] ** 2 + good["north_m"] ** 2
    cont = float(np.mean(good["contained"]))
    return StudyResult(
        config=cfg,
        rmse_h=float(math.sqrt(np.mean(eh2))),
        containment=cont,
        containment_se=float(math.sqrt(cont * (1.0 - cont) / len(good))),
        mean_ellipse_area=float(np.mean(good["area_m2"])),
        crlb_rmse=crlb_rmse(cfg),
        mean_error_enu=np.array([good["east_m"].mean(), good["north_m"].mean(), good["up_m"].mean()]),
        n_diverged=n_div,
        records=records,
    )


# --- sweeps --------------------------------------------------------------------------


def track_heading(scn: CaptureScenario) -> float:
    """Mid-capture ground-track heading at the emitter, radians east of north in [0, pi)."""
    v = enu_basis(scn.emitter_geodetic) @ scn.rx_vel[scn.n_epochs // 2]
    return math.atan2(v[0], v[1]) % math.pi


def angle_to_track(orientation: float, scn: CaptureScenario) -> float:
    """Acute angle (radians) between an ellipse axis and the ground track."""
    d = abs(orientation - track_heading(scn)) % math.pi
    return min(d, math.pi - d)


@dataclass(frozen=True, eq=False)
class ClockSweepRow:
    label: str
    h_minus_2: float
    clock_semi_major_m: float
    clock_semi_minor_m: float
    clock_major_to_track_rad: float
    full: StudyResult | None
    awgn_only: StudyResult | None

    def as_dict(self) -> dict:
        d = {"label": self.label, "h_minus_2": self.h_minus_2,
             "clock_semi_major_m": self.clock_semi_major_m,
             "clock_semi_minor_m": self.clock_semi_minor_m,
             "clock_major_to_track_deg": math.degrees(self.clock_major_to_track_rad)}
        for tag, res in (("full", self.full), ("awgn_only", self.awgn_only)):
            if res is not None:
                d[f"rmse_{tag}_m"] = res.rmse_h
                d[f"containment_{tag}"] = res.containment
                d[f"area_{tag}_m2"] = res.mean_ellipse_area
                d["crlb_rmse_m"] = res.crlb_rmse
        return d


def clock_only_axes(scn: CaptureScenario, clock: ClockModel, confidence: float = 0.95):
    """95% ellipse from transmitter clock walk alone, with the emitter altitude known."""
    R = measurement_covariance(0.0, sigma_v(clock, scn.delta_t), scn.n_epochs)
    return fixed_altitude_ellipse(scn, R, confidence)


def sweep_clock_quality(labels, cfg: TrialConfig, *, run_trials: bool = True,
                        modes=("full", "awgn_only")) -> list[ClockSweepRow]:
    rows = []
    for label in labels:
        clock = preset(label) if isinstance(label, str) else label
        ell = clock_only_axes(cfg.scenario, clock, cfg.confidence)
        res = {}
        if run_trials:
            for mode in modes:
                res[mode] = run_study(replace(cfg, clock=clock, estimator_R_mode=mode))
        rows.append(ClockSweepRow(clock.label, clock.h_minus_2, ell.semi_major, ell.semi_minor,
                                  angle_to_track(ell.orientation, cfg.scenario),
                                  res.get("full"), res.get("awgn_only")))
    return rows


@dataclass(frozen=True)
class InflationRow:
    sigma_a_model: float
    containment: float
    containment_se: float
    mean_area_m2: float
    rmse_h: float


def sweep_sigma_a_inflation(values, cfg: TrialConfig) -> list[InflationRow]:
    """Containment and ellipse area of the AWGN-only estimator as its assumed ``sigma_a`` grows."""
    rows = []
    for s in values:
        r = run_study(replace(cfg, estimator_R_mode="awgn_only", estimator_sigma_a_model=float(s)))
        rows.append(InflationRow(float(s), r.containment, r.containment_se, r.mean_ellipse_area,
                                 r.rmse_h))
    return rows


def theoretical_area(cfg: TrialConfig, sigma_a_model: float | None = None,
                     mode: str | None = None) -> float:
    """Area of the 95% ellipse at truth for the estimator's assumed ``R``."""
    c = replace(cfg, estimator_sigma_a_model=sigma_a_model,
                estimator_R_mode=mode or cfg.estimator_R_mode)
    scn = c.scenario
    P = crlb(np.r_[scn.emitter_truth, c.b0], scn, c.estimator_R(), c.alt_constraint)
    return error_ellipse(P, scn.emitter_geodetic, c.confidence).area


def equal_area_sigma_a(cfg: TrialConfig, target_area: float, lo: float = 1e-3,
                       hi: float = 100.0) -> float:
    """AWGN-only ``sigma_a`` whose theoretical ellipse area matches ``target_area`` (bisection in log)."""
    f = lambda s: theoretical_area(cfg, s, "awgn_only") - target_area  # noqa: E731
    if f(lo) > 0 or f(hi) < 0:
        raise ValueError("target area not bracketed")
    for _ in range(100):
        mid = math.sqrt(lo * hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi / lo < 1 + 1e-10:
            break
    return math.sqrt(lo * hi)


def interpolate_crossing(rows: list[InflationRow], level: float = 0.95) -> float:
    """Smallest swept ``sigma_a`` (linearly interpolated) where containment reaches ``level``."""
    xs = [r.sigma_a_model for r in rows]
    ys = [r.containment for r in rows]
    for (x0, y0), (x1, y1) in zip(zip(xs, ys), zip(xs[1:], ys[1:])):
        if y0 < level <= y1:
            return x0 + (level - y0) * (x1 - x0) / (y1 - y0)
    if ys and ys[0] >= level:
        return xs[0]
    raise ValueError(f"containment never reaches {level}")
