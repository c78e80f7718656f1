"""Figure rendering for the command-line report path.

Each function takes the data produced by an experiment protocol and returns a
matplotlib figure; the CLI saves it next to the CSV output.  Rendering is
headless (Agg).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .theory import SphereParams, progress_rate_full

__all__ = [
    "plot_progress_rate",
    "plot_gamma",
    "plot_generation_count",
    "plot_schedule",
    "plot_signals",
    "plot_mu_percentiles",
    "plot_benchmark",
    "plot_psa_steady",
    "plot_median_shift",
]


def plot_progress_rate(n, rows):
    """rows: (mu, sigma_star, phi_formula, phi_mc, stderr) tuples."""
    fig, ax = plt.subplots(figsize=(6, 4))
    mus = sorted({r[0] for r in rows})
    for mu in mus:
        pts = [r for r in rows if r[0] == mu]
        ss = np.array([r[1] for r in pts])
        grid = np.linspace(0, 1.1 * ss.max(), 300)
        line, = ax.plot(grid, progress_rate_full(grid, SphereParams(n=n, mu=mu)),
                        label=f"mu={mu}")
        ax.errorbar(ss, [r[3] for r in pts], yerr=[2 * r[4] for r in pts],
                    fmt="o", color=line.get_color(), capsize=3)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel(r"$\sigma^*$")
    ax.set_ylabel(r"$\varphi^*$")
    ax.set_title(f"Progress rate, N={n} (lines: formula, points: Monte Carlo)")
    ax.legend()
    fig.tight_layout()
    return fig


def plot_gamma(rows, zero, predicted=None):
    """rows: (trial, sigma_star_median, gamma) tuples."""
    fig, ax = plt.subplots(figsize=(6, 4))
    trials = [r[0] for r in rows]
    gammas = [r[2] for r in rows]
    ax.plot(trials, gammas, "o-", label="measured per trial")
    ax.axhline(np.mean(gammas), color="C1", ls="--",
               label=f"mean {np.mean(gammas):.3f}")
    if predicted is not None:
        ax.axhline(predicted, color="C2", ls=":", label=f"predicted {predicted:.3f}")
    ax.set_xlabel("trial")
    ax.set_ylabel(r"$\gamma = \sigma^*_{ss}/\sigma^*_0$")
    ax.set_title(rf"Steady-state ratio ($\sigma^*_0$ = {zero:.2f})")
    ax.legend()
    fig.tight_layout()
    return fig


def plot_generation_count(rows, gamma_line=0.9):
    """rows: (n, run, generations) tuples."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ns = sorted({r[0] for r in rows})
    means = [np.mean([r[2] for r in rows if r[0] == n]) for n in ns]
    ax.loglog(ns, means, "o-", label="measured mean")
    scale = means[0] / np.sqrt(ns[0])
    ax.loglog(ns, scale * np.sqrt(ns), "k--", label=r"$\sqrt{N}$ reference")
    ax.set_xlabel("N")
    ax.set_ylabel("generations")
    ax.set_title("Generations to relative distance target")
    ax.legend()
    fig.tight_layout()
    return fig


def plot_schedule(result):
    fig, ax = plt.subplots(figsize=(7, 4))
    g = np.arange(1, result.generations + 1)
    ax.semilogy(g, result.radius, "C0", label="R(g)")
    ax.set_xlabel("generation")
    ax.set_ylabel("R", color="C0")
    ax2 = ax.twinx()
    ax2.semilogy(g, result.mu, color="0.5", lw=0.8, label="mu(g)")
    ax2.set_ylabel("mu", color="0.5")
    ax.set_title(f"Population schedule: {result.verdict.value}")
    fig.tight_layout()
    return fig


def plot_signals(traces, threshold, method):
    fig, ax = plt.subplots(figsize=(7, 4))
    for mu, trace in sorted(traces.items()):
        ax.plot(trace.g, trace.signal, lw=0.8, label=f"mu={mu}")
    ax.axhline(threshold, color="k", label="threshold")
    ax.set_xlabel("generation")
    ax.set_ylabel("signal")
    ax.set_title(f"{method} signal, population control disabled")
    ax.legend()
    fig.tight_layout()
    return fig


def plot_mu_percentiles(rows):
    """rows: (label, mu_p25, mu_med, mu_p75) aggregated per configuration."""
    fig, ax = plt.subplots(figsize=(7, 4))
    labels = [r[0] for r in rows]
    x = np.arange(len(labels))
    med = np.array([r[2] for r in rows], dtype=float)
    lo = med - np.array([r[1] for r in rows], dtype=float)
    hi = np.array([r[3] for r in rows], dtype=float) - med
    ax.errorbar(x, med, yerr=[lo, hi], fmt="s", capsize=4)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_yscale("log")
    ax.set_ylabel("mu percentiles (25/50/75)")
    ax.set_title("Population-size levels per configuration")
    fig.tight_layout()
    return fig


def plot_benchmark(rows):
    """rows: (n, a, method, trials, p_success, e_runtime, ...) tuples."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    methods = sorted({r[2] for r in rows})
    for m in methods:
        pts = sorted((r for r in rows if r[2] == m), key=lambda r: r[0])
        ns = [r[0] for r in pts]
        ax1.plot(ns, [r[4] for r in pts], "o-", label=m)
        er = [(r[0], r[5]) for r in pts if r[5] is not None and r[5] == r[5]]
        if er:
            ax2.loglog([e[0] for e in er], [e[1] for e in er], "o-", label=m)
    ax1.set_xscale("log")
    ax1.set_xlabel("N")
    ax1.set_ylabel(r"$P_S$")
    ax1.set_ylim(-0.05, 1.05)
    ax1.legend()
    ax2.set_xlabel("N")
    ax2.set_ylabel(r"$E_r$ (evaluations)")
    fig.suptitle("Success rate and expected running time")
    fig.tight_layout()
    return fig


def plot_psa_steady(rows):
    """rows: (mu, gamma, pm_meas, pc_meas, pm_pred, pc_pred) tuples."""
    fig, ax = plt.subplots(figsize=(6, 4))
    mus = [r[0] for r in rows]
    ax.loglog(mus, [r[2] for r in rows], "o", label=r"$\|p_m\|^2$ measured")
    ax.loglog(mus, [r[4] for r in rows], "C0--", label=r"$\|p_m\|^2$ predicted")
    ax.loglog(mus, [r[3] for r in rows], "s", color="C3", label=r"$\|p_c\|^2$ measured")
    ax.loglog(mus, [r[5] for r in rows], "C3--", label=r"$\|p_c\|^2$ predicted")
    ax.set_xlabel("mu")
    ax.set_ylabel("steady-state squared norms")
    ax.set_title("Path norms on the sphere at fixed mu")
    ax.legend()
    fig.tight_layout()
    return fig


def plot_median_shift(shift):
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = ["generation g", "g+1, sigma rescaled", "g+1, sigma kept"]
    values = [shift.before, shift.after_rescaled, shift.after_unrescaled]
    errors = [shift.stderr_before, shift.stderr_rescaled, shift.stderr_unrescaled]
    ax.bar(labels, values, yerr=[3 * e for e in errors], color=["C3", "C0", "C9"])
    ax.set_ylabel("median of selected offspring fitness")
    lo = min(values) - 1.0
    ax.set_ylim(lo, max(values) + 0.5)
    ax.set_title("Offspring-median shift under sigma rescaling")
    fig.tight_layout()
    return fig
