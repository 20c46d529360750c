"""Single-pass LEO geolocation of broadcast GNSS spoofers from victims' clock-drift estimates."""

from .adversary import AttackDesign, ErrorMap, attack_trajectory, build_error_map, solve_zeta, worst_case_perturbation
from .clocks import PRESETS, ClockModel, DriftNoiseParams, preset, sample_random_walk, sigma_v
from .detector import DetectionOutcome, DetectorConfig, detect, normalized_increments, prob_detection
from .geodesy import Geodetic, LosState, ecef_to_enu, ecef_to_geodetic, geodetic_to_ecef, los_state
from .geolocator import (
    ErrorEllipse,
    GeolocationEstimate,
    GeoState,
    altitude_jacobian_row,
    crlb,
    error_ellipse,
    estimate,
    range_rate_jacobian_row,
    residuals_against,
)
from .montecarlo import StudyResult, TrialConfig, run_study, sweep_clock_quality, sweep_sigma_a_inflation
from .observables import (
    CovarianceModel,
    DopplerSeries,
    GammaSeries,
    build_covariance,
    measurement_covariance,
    synthesize_gamma,
    synthesize_prn_doppler,
)
from .pvt_correlation import CorrelationCurve, PvtFilterConfig, sequential_error_correlation, steady_state_filter
from .scenario import CaptureScenario, SpoofedConstellation, build_circular_pass, build_spoofed_constellation, canonical_scenario, load_ephemeris_track

__version__ = "0.1.0"
