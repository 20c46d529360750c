"""Matplotlib figures for CLI reports.  Everything renders off-screen to files."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .export import plot_table  # noqa: E402
from .geodesy import enu_basis  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def ellipse_points(semi_major, semi_minor, orientation, n=200):
    """East/north outline of an ellipse whose major axis is ``orientation`` east of north."""
    t = np.linspace(0.0, 2 * math.pi, n)
    a, b = semi_major * np.cos(t), semi_minor * np.sin(t)
    s, c = math.sin(orientation), math.cos(orientation)
    return a * s + b * c, a * c - b * s


def geolocation_figure(est, scn, z, path):
    truth = scn.emitter_geodetic
    rot = enu_basis(truth)
    e_hat = rot @ (est.state.r_t - scn.emitter_truth)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ex, ny = ellipse_points(est.ellipse.semi_major, est.ellipse.semi_minor, est.ellipse.orientation)
    ax1.plot(ex + e_hat[0], ny + e_hat[1], "C0-", label=f"{100 * est.ellipse.confidence:.0f}% ellipse")
    ax1.plot(e_hat[0], e_hat[1], "C0x", label="estimate")
    ax1.plot(0, 0, "k*", label="truth")
    ax1.set_xlabel("east [m]")
    ax1.set_ylabel("north [m]")
    ax1.set_aspect("equal", adjustable="datalim")
    ax1.legend(fontsize=8)
    res = est.residuals[: scn.n_epochs]
    ax2.plot(scn.times, res, "o-", ms=3)
    ax2.axhline(0.0, color="k", lw=0.5)
    ax2.set_xlabel("t [s]")
    ax2.set_ylabel("post-fit residual [m/s]")
    return _save(fig, path)


def table_figure(result, kind, path):
    header, rows = plot_table(result, kind)
    fig, ax = plt.subplots(figsize=(6, 4))
    if kind == "rmse_vs_h2":
        a = np.array(rows, dtype=float)
        for j, lab in ((1, "R (full)"), (2, "R_a only"), (3, "CRLB")):
            if np.isfinite(a[:, j]).any():
                ax.loglog(a[:, 0], a[:, j], "o-", label=lab)
        ax.set_xlabel("h_-2")
        ax.set_ylabel("horizontal RMSE [m]")
    elif kind == "containment_vs_sigma_a":
        a = np.array(rows, dtype=float)
        ax.errorbar(a[:, 0], 100 * a[:, 1], yerr=300 * a[:, 2], fmt="o-", label="containment")
        ax.axhline(95.0, color="k", ls=":")
        ax.set_xlabel("modeled sigma_a [m/s]")
        ax.set_ylabel("containment [%]")
        ax2 = ax.twinx()
        ax2.plot(a[:, 0], a[:, 3] / 1e6, "C1s--", label="area")
        ax2.set_ylabel("mean 95% area [km^2]")
    elif kind == "correlation_curve":
        a = np.array(rows, dtype=float)
        for h in np.unique(a[:, 0]):
            m = a[:, 0] == h
            ax.semilogx(a[m, 1], a[m, 2], "o-", label=f"h_-2={h:.0e}")
        ax.set_xlabel("time between epochs [s]")
        ax.set_ylabel("Pearson coefficient")
    elif kind == "worst_case_vs_pd":
        a = np.array(rows, dtype=float)
        ax.plot(a[:, 0], a[:, 4] / 1e3, "o-", label=f"P_F={a[0, 1]:g}")
        ax.set_xlabel("allowed P_D")
        ax.set_ylabel("worst-case horizontal error [km]")
    elif kind == "doppler_series":
        traces = {}
        for t, name, f, _ in rows:
            traces.setdefault(name, ([], []))
            traces[name][0].append(float(t))
            traces[name][1].append(float(f))
        for name, (t, f) in traces.items():
            f = np.asarray(f)
            ax.plot(t, f - f[0], label=name,
                    lw=2 if name == "gamma" else 1)
        ax.set_xlabel("t [s]")
        ax.set_ylabel("Doppler change from first epoch [Hz]")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def trajectory_figure(designs, times, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    for d in designs:
        ax.plot(times, d.trajectory, "o-", ms=3, label=f"P_D={d.p_detect:.2f}")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("c * spoofed drift [m/s]")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def error_scatter_figure(records, path):
    fig, ax = plt.subplots(figsize=(5, 5))
    ok = records["converged"]
    c = records["contained"][ok]
    ax.plot(records["east_m"][ok][c], records["north_m"][ok][c], ".", ms=2, label="contained")
    ax.plot(records["east_m"][ok][~c], records["north_m"][ok][~c], ".", ms=2, label="missed")
    ax.set_xlabel("east error [m]")
    ax.set_ylabel("north error [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(fontsize=8)
    return _save(fig, path)
