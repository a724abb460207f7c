"""Figure rendering for campaign and CLI outputs (Agg backend, files only)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 140


def _save(fig, out_dir, name):
    path = out_dir / f"{name}.png"
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_calibration_stability(result, out_dir):
    from .campaign import calibration_series, stability_statistics

    d0, kappa = calibration_series(result)
    if d0.size < 2:
        return None
    runs = np.arange(d0.size)
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), gridspec_kw={"width_ratios": [2.2, 1]})
    axes[0, 0].plot(runs, d0 * 1e9, ".", ms=4, color="tab:blue")
    axes[0, 0].set_ylabel("d0 (nm)")
    axes[1, 0].plot(runs, kappa * 1e9, ".", ms=4, color="tab:green")
    axes[1, 0].set_ylabel("kappa (nm/V)")
    axes[1, 0].set_xlabel("run")

    stats = stability_statistics(result)
    if stats is not None:
        from .analysis import smooth_trend

        n = d0.size
        win = min(101, n if n % 2 == 1 else n - 1)
        if n >= 7:
            axes[0, 0].plot(runs, smooth_trend(d0, win) * 1e9, "-", color="0.4", lw=1)
            axes[1, 0].plot(runs, smooth_trend(kappa, min(201, win)) * 1e9, "-",
                            color="0.4", lw=1)
            d0_res = (d0 - smooth_trend(d0, win)) * 1e9
            k_res = 100 * (kappa / smooth_trend(kappa, min(201, win)) - 1.0)
        else:
            d0_res = (d0 - d0.mean()) * 1e9
            k_res = 100 * (kappa / kappa.mean() - 1.0)
        axes[0, 1].hist(d0_res, bins=max(6, d0.size // 5), color="tab:blue", alpha=0.7)
        axes[0, 1].set_xlabel("d0 residual (nm)")
        axes[1, 1].hist(k_res, bins=max(6, d0.size // 5), color="tab:green", alpha=0.7)
        axes[1, 1].set_xlabel("kappa residual (%)")
    fig.suptitle("calibration stability")
    return _save(fig, out_dir, "calibration_stability")


def plot_gradient_curves(result, out_dir, max_runs=30):
    runs = result.good_runs
    if not runs:
        return None
    fig, ax = plt.subplots(figsize=(7, 5))
    for run in runs[:max_runs]:
        ax.loglog(run.total.d * 1e9, np.abs(run.total.grad_over_R), ".", ms=2.5,
                  color="tab:blue", alpha=0.35)
        ax.loglog(run.elec.d * 1e9, np.abs(run.elec.grad_over_R), "-",
                  color="tab:orange", alpha=0.2, lw=0.8)
    theory = np.abs(2.0 * math.pi * result.theory_pressure)
    if np.any(theory > 0):
        ax.loglog(result.theory_d * 1e9, theory, "k-", lw=1.4, label="theory |2 pi P|")
        ax.legend()
    ax.set_xlabel("separation (nm)")
    ax.set_ylabel("|1/R dF/dd| (N/m$^2$)")
    ax.set_title("total force gradient (dots) and electrostatic part (lines)")
    return _save(fig, out_dir, "gradients")


def plot_scatter_95nm(result, out_dir):
    from .campaign import gradient_at

    vals = gradient_at(result)
    if vals.size < 5:
        return None
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6),
                                   gridspec_kw={"width_ratios": [2, 1]})
    ax1.plot(np.arange(vals.size), vals, ".", color="tab:blue")
    ax1.axhline(vals.mean(), color="0.4", lw=1)
    ax1.set_xlabel("run")
    ax1.set_ylabel("1/R dF/dd at 95 nm (N/m$^2$)")
    ax2.hist(100 * (vals / vals.mean() - 1), bins=max(6, vals.size // 6),
             color="tab:blue", alpha=0.7)
    ax2.set_xlabel("deviation (%)")
    fig.suptitle("force-gradient stability at 95 nm")
    return _save(fig, out_dir, "scatter_95nm")


def plot_hydro(result, out_dir, max_runs=20):
    runs = [r for r in result.good_runs if r.hydro_over_R is not None]
    if not runs:
        return None
    fig, ax = plt.subplots(figsize=(6.5, 5))
    for run in runs[:max_runs]:
        d, f_r, _ = run.hydro_over_R.T
        ax.loglog(d * 1e9, f_r * result.config.truth.R * 1e12, ".", ms=3,
                  color="tab:green", alpha=0.5)
    ax.set_xlabel("separation (nm)")
    ax.set_ylabel("hydrodynamic force RMS (pN)")
    ax.set_title("squeeze-film channel")
    return _save(fig, out_dir, "hydro")


def plot_spring(result, out_dir):
    runs = [r for r in result.good_runs if r.spring is not None]
    if not runs:
        return None
    run = runs[0]
    xs, ys = [], []
    for rec in run.records:
        ratio = rec.S_2w1 / rec.S_4w1 if rec.S_4w1 != 0 else -1
        if ratio > 0:
            xs.append(rec.d_pz * 1e9)
            ys.append(rec.V_AC * math.sqrt(ratio))
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    ax.plot(xs, ys, "o", ms=4, color="tab:blue")
    s = run.spring
    from .constants import EPS0

    slope = -2.0 * math.sqrt(s.k_over_R / (EPS0 * math.pi))
    x_arr = np.array(xs) * 1e-9
    ax.plot(np.array(xs), slope * x_arr + (np.mean(ys) - slope * x_arr.mean()), "k-", lw=1)
    ax.set_xlabel("d_pz (nm)")
    ax.set_ylabel(r"V_AC sqrt(S_2w1/S_4w1) (V)")
    ax.set_title(f"spring-constant line: k/R = {s.k_over_R:.4g} N/m$^2$")
    return _save(fig, out_dir, "spring_fit")


def plot_difference_check(result, out_dir):
    from .campaign import comparison_profile

    rows = comparison_profile(result)
    if rows is None:
        return None
    d, measured, predicted, ratio = rows
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.5, 6), sharex=True)
    ax1.loglog(d * 1e9, np.abs(measured), "o", ms=3, label="measured diff")
    ax1.loglog(d * 1e9, np.abs(predicted), "k-", lw=1, label="predicted (calibration)")
    ax1.set_ylabel("|gradient difference| (N/m$^2$)")
    ax1.legend()
    ax2.semilogx(d * 1e9, ratio, ".-", ms=3)
    ax2.axhline(1.0, color="0.5", lw=0.8)
    ax2.set_xlabel("separation (nm)")
    ax2.set_ylabel("measured / predicted")
    fig.suptitle("high/low drive electrostatic difference check")
    return _save(fig, out_dir, "difference_check")


def plot_theory(d, grad_by_label: dict, out_dir, name="theory"):
    fig, ax = plt.subplots(figsize=(6.5, 5))
    for label, grad in grad_by_label.items():
        mag = np.abs(grad)
        if np.all(mag == 0):
            continue
        ax.loglog(d * 1e9, mag, lw=1.4, label=label)
    ax.set_xlabel("separation (nm)")
    ax.set_ylabel("|1/R dF_C/dd| = |2 pi P| (N/m$^2$)")
    if grad_by_label:
        ax.legend()
    return _save(fig, out_dir, name)


def plot_spectra(energies, spectra_by_label: dict, out_dir, name="spectra"):
    """R/T spectra; zooms transmission when it is metal-film small."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.5, 6), sharex=True)
    for label, (r_spec, t_spec) in spectra_by_label.items():
        ax1.plot(energies, r_spec, lw=1.2, label=f"R {label}")
        ax2.plot(energies, t_spec, lw=1.2, label=f"T {label}")
    ax1.set_ylabel("reflectance")
    ax2.set_ylabel("transmittance")
    ax2.set_xlabel("photon energy (eV)")
    ax1.legend()
    ax2.legend()
    return _save(fig, out_dir, name)


def render_campaign_figures(result):
    out = result.out_dir
    made = []
    for fn in (plot_calibration_stability, plot_gradient_curves, plot_scatter_95nm,
               plot_hydro):
        path = fn(result, out)
        if path:
            made.append(path)
    if result.config.profile == "spring_constant":
        path = plot_spring(result, out)
        if path:
            made.append(path)
    if result.config.profile == "high_vac_comparison":
        path = plot_difference_check(result, out)
        if path:
            made.append(path)
    return made
