"""Oscillator quality presets and random-walk frequency noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import C

# h_{-2} of the fractional-frequency power spectrum, one decade of sigma_v per preset
PRESETS = {
    "low-quality TCXO": 3e-19,
    "TCXO": 3e-21,
    "low-quality OCXO": 3e-23,
    "OCXO": 3e-25,
}

# SeedSequence spawn keys; one independent stream per noise source
STREAM_RANDOM_WALK = 1
STREAM_AWGN = 2
STREAM_PRN = 3
STREAM_ALTITUDE = 4


@dataclass(frozen=True)
class ClockModel:
    h_minus_2: float
    label: str = "custom"

    def __post_init__(self):
        if not self.h_minus_2 >= 0:
            raise ValueError("h_minus_2 must be non-negative")


@dataclass(frozen=True)
class DriftNoiseParams:
    """White estimation noise ``sigma_a`` and per-step random-walk ``sigma_v`` (both m/s)."""

    sigma_a: float
    sigma_v: float
    delta_t: float = 1.0

    def __post_init__(self):
        if self.sigma_a < 0 or self.sigma_v < 0:
            raise ValueError("noise standard deviations must be non-negative")
        if self.delta_t <= 0:
            raise ValueError("delta_t must be positive")

    @classmethod
    def from_clock(cls, model: ClockModel, sigma_a: float, delta_t: float) -> "DriftNoiseParams":
        return cls(sigma_a, sigma_v(model, delta_t), delta_t)


def preset(label: str) -> ClockModel:
    try:
        return ClockModel(PRESETS[label], label)
    except KeyError:
        raise ValueError(f"unknown clock preset {label!r}; choose from {sorted(PRESETS)}") from None


def sigma_v(model: ClockModel | float, delta_t: float) -> float:
    """Velocity-equivalent random-walk step, sqrt(2 pi^2 h_{-2} dt) c, in m/s."""
    if delta_t <= 0:
        raise ValueError("delta_t must be positive")
    h = model.h_minus_2 if isinstance(model, ClockModel) else float(model)
    if h < 0:
        raise ValueError("h_minus_2 must be non-negative")
    return math.sqrt(2.0 * math.pi**2 * h * delta_t) * C


def rng_stream(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for ``(seed, stream)``; identical pairs give identical draws."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream),)))


def sample_random_walk(sigma_v: float, n: int, rng_seed: int) -> np.ndarray:
    """``b[i] = v[1] + ... + v[i]`` for ``i = 1..n`` with i.i.d. N(0, sigma_v^2) steps."""
    if n < 1:
        raise ValueError("need at least one sample")
    if sigma_v < 0:
        raise ValueError("sigma_v must be non-negative")
    steps = rng_stream(rng_seed, STREAM_RANDOM_WALK).standard_normal(n)
    return np.cumsum(sigma_v * steps)
