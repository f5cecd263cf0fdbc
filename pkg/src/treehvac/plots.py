"""Figures written next to the CSV outputs of the command line."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = {"baseline": "#7f7f7f", "rs_mbrl": "#d62728", "tree": "#1f77b4", "verified_tree": "#1f77b4"}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _shade_comfort(ax, comfort):
    ax.axhspan(comfort.lower, comfort.upper, color="#2ca02c", alpha=0.12, lw=0, label="comfort")


def plot_episode(ep, comfort, path, title=None):
    hours = np.arange(len(ep)) * ep.dt / 3600.0
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(9, 5.5), sharex=True,
                                   gridspec_kw={"height_ratios": [3, 1]})
    _shade_comfort(ax1, comfort)
    ax1.plot(hours, ep.zone_temp, color="k", lw=1.2, label="zone")
    ax1.step(hours, ep.heat_sp, where="post", color="#d62728", lw=0.9, label="heat sp")
    ax1.step(hours, ep.cool_sp, where="post", color="#1f77b4", lw=0.9, label="cool sp")
    ax1.set_ylabel("degC")
    ax1.legend(loc="upper right", fontsize=8, ncol=4)
    ax1.set_title(title or f"{ep.policy} closed loop")
    ax2.bar(hours, np.array(ep.hvac_energy_J) / 3.6e6, width=ep.dt / 3600.0, color="#ff7f0e")
    ax2.set_ylabel("kWh/step")
    ax2.set_xlabel("hours")
    return _finish(fig, path)


def plot_setpoint_spread(diag: dict, trace, path):
    """Mean heating setpoint +/- one std across seeded runs, per policy."""
    fig, ax = plt.subplots(figsize=(9, 4))
    hours = np.arange(len(trace)) * trace.dt / 3600.0
    for name, d in diag.items():
        heat = np.array([ep.heat_sp for ep in d["episodes"]], dtype=float)
        mu, sd = heat.mean(axis=0), heat.std(axis=0)
        c = COLORS.get(name, None)
        ax.plot(hours, mu, color=c, label=f"{name} (max std {sd.max():.2f})")
        ax.fill_between(hours, mu - sd, mu + sd, color=c, alpha=0.25, lw=0)
    ax.set_xlabel("hours")
    ax.set_ylabel("heating setpoint (degC)")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_noise_sweep(rows, path):
    lv = [r["noise_level"] for r in rows]
    fig, ax1 = plt.subplots(figsize=(6.5, 4))
    ax1.plot(lv, [r["mean_entropy_bits"] for r in rows], "o-", color="#1f77b4", label="entropy (augmented)")
    ax1.axhline(rows[0]["source_entropy_bits"], color="#1f77b4", ls=":", label="entropy (history)")
    if "reference_entropy_bits" in rows[0]:
        ax1.axhline(rows[0]["reference_entropy_bits"], color="#1f77b4", ls="--", label="entropy (other site)")
    ax1.set_xlabel("noise level")
    ax1.set_ylabel("mean entropy (bits)")
    ax2 = ax1.twinx()
    ax2.plot(lv, [r["mean_jsd"] for r in rows], "s-", color="#d62728", label="JSD to history")
    if "reference_jsd" in rows[0]:
        ax2.axhline(rows[0]["reference_jsd"], color="#d62728", ls="--", label="JSD other site")
    ax2.set_ylabel("mean JS distance")
    h1, l1 = ax1.get_legend_handles_labels()
    h2, l2 = ax2.get_legend_handles_labels()
    ax1.legend(h1 + h2, l1 + l2, fontsize=7, loc="center right")
    return _finish(fig, path)


def plot_sweep(rows, path):
    n = [r["n"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax1.plot(n, [r["performance_ratio"] for r in rows], "o-")
    ax1.set_xscale("log")
    ax1.set_xlabel("decision records")
    ax1.set_ylabel("comfort rate / kWh x 1000")
    ax2.plot(n, [r["tree_size"] for r in rows], "o-", color="#ff7f0e")
    ax2.set_xscale("log")
    ax2.set_xlabel("decision records")
    ax2.set_ylabel("tree nodes")
    return _finish(fig, path)


def plot_compare(metrics: dict, path):
    """Energy against comfort violation; lower-left is better."""
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    for name, m in metrics.items():
        ax.scatter(m.total_energy_kWh, m.violation_degree_hours, s=60, color=COLORS.get(name), label=name)
    ax.set_xlabel("HVAC energy (kWh)")
    ax.set_ylabel("comfort violation (degC h)")
    ax.legend(fontsize=8)
    return _finish(fig, path)
