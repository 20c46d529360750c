"""Plot-ready CSV tables.  Column headers carry units."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .montecarlo import ClockSweepRow, InflationRow
from .observables import DopplerSeries, GammaSeries
from .pvt_correlation import CorrelationCurve

KINDS = ("rmse_vs_h2", "containment_vs_sigma_a", "correlation_curve", "worst_case_vs_pd",
         "doppler_series")


@dataclass(frozen=True, eq=False)
class DopplerBundle:
    """The common-mode drift series plus each spoofed signal's observed Doppler."""

    gamma: GammaSeries
    series: list
    wavelength: float


def _rows_rmse(result) -> tuple[list[str], list[list]]:
    header = ["h_minus_2", "rmse_full_m", "rmse_awgn_only_m", "crlb_rmse_m",
              "clock_semi_major_m", "clock_semi_minor_m"]
    rows = []
    for r in result:
        if not isinstance(r, ClockSweepRow):
            raise TypeError("rmse_vs_h2 expects ClockSweepRow items")
        crlb = r.full.crlb_rmse if r.full is not None else np.nan
        rows.append([r.h_minus_2, r.full.rmse_h if r.full else np.nan,
                     r.awgn_only.rmse_h if r.awgn_only else np.nan, crlb,
                     r.clock_semi_major_m, r.clock_semi_minor_m])
    return header, rows


def _rows_containment(result):
    header = ["sigma_a_model_mps", "containment", "containment_se", "mean_area_m2", "rmse_h_m"]
    rows = []
    for r in result:
        if not isinstance(r, InflationRow):
            raise TypeError("containment_vs_sigma_a expects InflationRow items")
        rows.append([r.sigma_a_model, r.containment, r.containment_se, r.mean_area_m2, r.rmse_h])
    return header, rows


def _rows_correlation(result):
    curves = [result] if isinstance(result, CorrelationCurve) else list(result)
    header = ["h_minus_2", "delta_t_s", "pearson"]
    rows = []
    for c in curves:
        if not isinstance(c, CorrelationCurve):
            raise TypeError("correlation_curve expects CorrelationCurve items")
        rows.extend([c.h_minus_2, float(t), float(p)] for t, p in zip(c.delta_t, c.pearson))
    return header, rows


def _rows_worst_case(result):
    header = ["p_detect", "p_false_alarm", "zeta_mps", "d1", "predicted_eh_m"]
    rows = []
    for r in result:
        if not isinstance(r, dict) or not set(header) <= set(r):
            raise TypeError("worst_case_vs_pd expects rows from adversary.error_vs_budget")
        rows.append([r[k] for k in header])
    return header, rows


def _rows_doppler(result):
    if not isinstance(result, DopplerBundle):
        raise TypeError("doppler_series expects a DopplerBundle")
    header = ["t_s", "trace", "doppler_hz", "range_rate_mps"]
    rows = []
    lam = result.wavelength
    for t, z in zip(result.gamma.times, result.gamma.z):
        rows.append([float(t), "gamma", float(-z / lam), float(z)])
    for s in result.series:
        if not isinstance(s, DopplerSeries):
            raise TypeError("doppler_series expects DopplerSeries entries")
        rr = s.range_rate_equivalent()
        rows.extend([float(t), f"prn{s.prn}", float(f), float(r)] for t, f, r in zip(s.times, s.f, rr))
    return header, rows


_BUILDERS = {
    "rmse_vs_h2": _rows_rmse,
    "containment_vs_sigma_a": _rows_containment,
    "correlation_curve": _rows_correlation,
    "worst_case_vs_pd": _rows_worst_case,
    "doppler_series": _rows_doppler,
}


def plot_table(result, kind: str) -> tuple[list[str], list[list]]:
    if kind not in _BUILDERS:
        raise ValueError(f"unknown export kind {kind!r}; choose from {list(KINDS)}")
    try:
        return _BUILDERS[kind](result)
    except TypeError as exc:
        raise ValueError(f"result does not match kind {kind!r}: {exc}") from None


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    return repr(float(v))


def export_plot_data(result, kind: str, path) -> Path:
    header, rows = plot_table(result, kind)
    path = Path(path)
    lines = [",".join(header)] + [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_table(path) -> tuple[list[str], list[list[str]]]:
    lines = Path(path).read_text().strip().splitlines()
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]
