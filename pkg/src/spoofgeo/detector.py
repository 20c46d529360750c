"""Clock-drift increment monitor: chi-squared energy test with a Marcum-Q detection probability.

Under H0 the normalized increments ``theta_k`` of a static receiver's drift
estimate are i.i.d. N(0, 1), so ``theta^T theta`` is central chi-squared with K
degrees of freedom.  A spoofer adding increments ``mu`` makes it noncentral
with ``lambda = mu^T mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import C
from .special import (  # noqa: F401  re-exported
    chi2_cdf,
    chi2_quantile,
    chi2_sf,
    marcum_q,
    noncentral_chi2_cdf,
    noncentral_chi2_sf,
)


@dataclass(frozen=True)
class DetectorConfig:
    """``sigma_m`` is the drift-estimate noise (m/s); the receiver clock adds ``q``."""

    sigma_m: float
    h_minus_2_rx: float
    delta_t: float
    p_false_alarm: float
    K: int

    def __post_init__(self):
        if not 0.0 < self.p_false_alarm < 1.0:
            raise ValueError("p_false_alarm must lie in (0, 1)")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.sigma_m < 0 or self.h_minus_2_rx < 0:
            raise ValueError("noise parameters must be non-negative")
        if self.delta_t <= 0:
            raise ValueError("delta_t must be positive")
        if not self.sigma_u > 0:
            raise ValueError("sigma_u must be positive")

    @property
    def q(self) -> float:
        """Receiver clock random-walk variance per step, (m/s)^2."""
        return 2.0 * math.pi**2 * self.h_minus_2_rx * self.delta_t * C**2

    @property
    def sigma_u(self) -> float:
        return math.sqrt(self.sigma_m**2 + self.q)

    @property
    def threshold(self) -> float:
        return chi2_quantile(1.0 - self.p_false_alarm, self.K)


@dataclass(frozen=True)
class DetectionOutcome:
    statistic: float
    threshold: float
    decision: str  # "H0" or "H1"
    p_detect_predicted: float

    @property
    def spoofed(self) -> bool:
        return self.decision == "H1"


def normalized_increments(drift_series, sigma_u: float) -> np.ndarray:
    """``theta_k = (d[k] - d[k-1]) / sigma_u``; length one less than the series."""
    if not sigma_u > 0:
        raise ValueError("sigma_u must be positive")
    d = np.asarray(drift_series, dtype=float)
    if d.ndim != 1 or d.size < 2:
        raise ValueError("drift series needs at least two samples")
    return np.diff(d) / sigma_u


def prob_detection(mu, cfg: DetectorConfig) -> float:
    """``Q_{K/2}(sqrt(mu^T mu), sqrt(nu*))``."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (cfg.K,):
        raise ValueError(f"mu must have length K={cfg.K}")
    lam = float(mu @ mu)
    return prob_detection_lambda(lam, cfg)


def prob_detection_lambda(lam: float, cfg: DetectorConfig) -> float:
    return marcum_q(0.5 * cfg.K, math.sqrt(lam), math.sqrt(cfg.threshold))


def detect(theta, cfg: DetectorConfig, mu=None) -> DetectionOutcome:
    """Energy test ``theta^T theta > nu*``.  ``mu`` (if given) fills the predicted P_D."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (cfg.K,):
        raise ValueError(f"theta must have length K={cfg.K}")
    stat = float(theta @ theta)
    nu = cfg.threshold
    pd = prob_detection(mu, cfg) if mu is not None else math.nan
    return DetectionOutcome(stat, nu, "H1" if stat > nu else "H0", pd)


def detect_many(theta: np.ndarray, cfg: DetectorConfig) -> np.ndarray:
    """Vectorized decisions for a trials x K array; True where H1."""
    theta = np.asarray(theta, dtype=float)
    return np.einsum("ij,ij->i", theta, theta) > cfg.threshold
