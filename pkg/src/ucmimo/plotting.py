"""Figure rendering for the report path.

Figures are a convenience layer over the emitted CSV/JSON data: a coverage
heatmap per mode, the throughput CDF comparison and the quantile bars.
Everything renders headless through the Agg backend.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Rectangle

from .metrics import CoverageGrid, ModeComparison
from .scenario import Scenario

MODE_LABELS = {
    "network_centric": "network-centric",
    "user_centric": "user-centric",
}
MODE_COLORS = {
    "network_centric": "tab:red",
    "user_centric": "tab:blue",
}


def _draw_deployment(ax, scenario: Scenario):
    for b in scenario.buildings:
        fp = b.footprint
        ax.add_patch(
            Rectangle(
                (fp.x_min, fp.y_min), fp.width, fp.height,
                facecolor="white", edgecolor="0.6", linewidth=0.5, zorder=3,
            )
        )
    for bs in scenario.base_stations:
        marker = "^" if bs.kind == "macro" else "o"
        ax.plot(bs.x_m, bs.y_m, marker, color="black", markersize=7, zorder=4)
    ax.set_xlim(scenario.bounds.x_min, scenario.bounds.x_max)
    ax.set_ylim(scenario.bounds.y_min, scenario.bounds.y_max)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")


def render_coverage(grid: CoverageGrid, scenario: Scenario, mode: str, path, vmin=None, vmax=None):
    fig, ax = plt.subplots(figsize=(5.0, 6.5))
    sc = ax.scatter(
        grid.positions[:, 0], grid.positions[:, 1],
        c=grid.power_dbm(mode), s=5, marker="s", cmap="turbo",
        vmin=vmin, vmax=vmax, zorder=2,
    )
    _draw_deployment(ax, scenario)
    fig.colorbar(sc, ax=ax, label="received power [dBm]")
    ax.set_title(f"coverage, {MODE_LABELS.get(mode, mode)}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_coverage_gain(grid: CoverageGrid, scenario: Scenario, path):
    gain = grid.user_centric_dbm - grid.best_single_bs_dbm
    fig, ax = plt.subplots(figsize=(5.0, 6.5))
    sc = ax.scatter(
        grid.positions[:, 0], grid.positions[:, 1],
        c=gain, s=5, marker="s", cmap="viridis", zorder=2,
    )
    _draw_deployment(ax, scenario)
    fig.colorbar(sc, ax=ax, label="coherent combining gain [dB]")
    ax.set_title("user-centric minus best single BS")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_cdf(samples_by_mode: dict, path):
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for mode, samples in samples_by_mode.items():
        arr = np.sort(np.asarray(samples, dtype=float)) / 1e6
        cdf = np.arange(1, len(arr) + 1) / len(arr)
        ax.step(
            arr, cdf, where="post",
            label=MODE_LABELS.get(mode, mode),
            color=MODE_COLORS.get(mode),
        )
    ax.set_xlabel("average user throughput [Mbit/s]")
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1)
    ax.grid(alpha=0.3, linestyle=":")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_quantile_bars(cmp: ModeComparison, path):
    quantiles = (10, 50, 90)
    modes = list(cmp.quantiles_bps)
    x = np.arange(len(quantiles))
    width = 0.8 / len(modes)
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for i, mode in enumerate(modes):
        vals = [cmp.quantiles_bps[mode][q] / 1e6 for q in quantiles]
        ax.bar(
            x + (i - (len(modes) - 1) / 2) * width, vals, width,
            label=MODE_LABELS.get(mode, mode),
            color=MODE_COLORS.get(mode),
        )
    ax.set_xticks(x, [f"q{q}" for q in quantiles])
    ax.set_ylabel("throughput [Mbit/s]")
    ax.grid(axis="y", alpha=0.3, linestyle=":")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
